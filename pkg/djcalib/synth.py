"""
Synthetic prediction datasets with known calibration properties, and a brute force
reference implementation of the histogram GECE used to check the estimator.
"""

import math
import numpy as np

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Tuple

from djcalib.core import Dataset, one_hot, rng_for
from djcalib.distances import L2, TVD, DistanceSpec, InterInterval, Weighted
from djcalib.estimator import Adaptive, BinningSpec, Uniform
from djcalib.exceptions import EmptySelection, InvalidSpec
from djcalib.lenses import LensSpec, apply_lens
from djcalib.selectors import SelectorSpec, select


# Generators draw from this stream of their seed.
GENERATOR_STREAM = 0


class GeneratorSpec(object):
    """
    Base class of the synthetic dataset generators; every spec carries its seed.
    """

    seed: int = 0

    def validate(self):
        return None


@dataclass(frozen=True)
class Calibrated(GeneratorSpec):
    """
    Outputs drawn from a symmetric Dirichlet(alpha) and labels drawn from the outputs:
    perfectly calibrated under every lens.
    """

    alpha: float
    k: int
    n: int
    seed: int = 0

    def validate(self):
        if self.alpha <= 0:
            raise InvalidSpec("the Dirichlet concentration must be positive")
        if self.k < 2:
            raise InvalidSpec("a calibrated generator needs at least two classes")
        if self.n < 1:
            raise InvalidSpec("generators need at least one record")


@dataclass(frozen=True)
class TwoPointBinary(GeneratorSpec):
    """
    Half the records output 0.3 for class 1, half output 0.7, with labels drawn
    from Bernoulli(0.5) regardless: the true binary full ECE is 0.2.
    """

    n: int
    seed: int = 0

    def validate(self):
        if self.n < 1:
            raise InvalidSpec("generators need at least one record")


@dataclass(frozen=True)
class Sharpened(GeneratorSpec):
    """
    An overconfident model: the outputs of a calibrated generator raised to the
    power inv_temp and renormalized, with labels still drawn from the original
    outputs. The records keep inv_temp * log(g) as logits.
    """

    base: Calibrated
    inv_temp: float

    @property
    def seed(self):
        return self.base.seed

    def validate(self):
        self.base.validate()
        if not self.inv_temp > 1:
            raise InvalidSpec("sharpening needs an inverse temperature above 1")


@dataclass(frozen=True)
class ConstantBinary(GeneratorSpec):
    """
    Every record outputs p for class 1 and labels are Bernoulli(rate): the true
    ECE is |p - rate|.
    """

    p: float
    rate: float
    n: int
    seed: int = 0

    def validate(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.rate <= 1.0):
            raise InvalidSpec("p and rate must lie in [0, 1]")
        if self.n < 1:
            raise InvalidSpec("generators need at least one record")


def _categorical(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    u = rng.random(probs.shape[0])
    labels = (np.cumsum(probs, axis=1) < u[:, np.newaxis]).sum(axis=1)
    return np.minimum(labels, probs.shape[1] - 1)


def _dirichlet(rng: np.random.Generator, alpha: float, k: int, n: int) -> np.ndarray:
    draws = rng.standard_gamma(alpha, size=(n, k))
    return draws / draws.sum(axis=1, keepdims=True)


def generate(spec: GeneratorSpec) -> Dataset:
    """
    Generate the dataset a spec describes; the same spec always yields the same
    dataset.

    :raises InvalidSpec: If the generator parameters are invalid.
    """
    if not isinstance(spec, GeneratorSpec):
        raise InvalidSpec(f"unknown generator spec {spec!r}")
    spec.validate()
    rng = rng_for(spec.seed, GENERATOR_STREAM)

    if isinstance(spec, Calibrated):
        probs = _dirichlet(rng, spec.alpha, spec.k, spec.n)
        return Dataset(probs=probs, labels=_categorical(rng, probs))

    if isinstance(spec, Sharpened):
        base = spec.base
        probs = _dirichlet(rng, base.alpha, base.k, base.n)
        labels = _categorical(rng, probs)
        logits = spec.inv_temp * np.log(np.maximum(probs, np.finfo(float).tiny))
        return Dataset(logits=logits, labels=labels)

    if isinstance(spec, TwoPointBinary):
        p1 = np.where(np.arange(spec.n) < spec.n // 2, 0.3, 0.7)
        labels = (rng.random(spec.n) < 0.5).astype(int)
        return Dataset(probs=np.column_stack([1.0 - p1, p1]), labels=labels)

    if isinstance(spec, ConstantBinary):
        p1 = np.full(spec.n, spec.p)
        labels = (rng.random(spec.n) < spec.rate).astype(int)
        return Dataset(probs=np.column_stack([1.0 - p1, p1]), labels=labels)

    raise InvalidSpec(f"unknown generator spec {spec!r}")


def _oracle_distance(dist: DistanceSpec, g: List[float], y: List[float]) -> float:
    diff = [a - b for a, b in zip(g, y)]
    if isinstance(dist, TVD):
        if len(diff) == 1:
            return abs(diff[0])
        return 0.5 * sum(abs(d) for d in diff)
    if isinstance(dist, L2):
        return math.sqrt(sum(d * d for d in diff))
    if isinstance(dist, InterInterval):
        return max(0.0, dist.l - y[0], y[0] - dist.h)
    if isinstance(dist, Weighted):
        total = 0.0
        for i, row in enumerate(dist.matrix):
            for j, m in enumerate(row):
                total += diff[i] * m * diff[j]
        return math.sqrt(max(total, 0.0))
    raise InvalidSpec(f"the reference estimator does not support {dist}")


def _oracle_uniform(points: List[List[float]], spec: Uniform) -> List[List[int]]:
    width = (spec.hi - spec.lo) / spec.b
    cells: Dict[Tuple[int, ...], List[int]] = {}
    for i, point in enumerate(points):
        cell = []
        for x in point:
            c = int(math.floor((x - spec.lo) / width))
            cell.append(min(spec.b - 1, max(0, c)))
        cells.setdefault(tuple(cell), []).append(i)
    return [cells[key] for key in sorted(cells)]


def _oracle_adaptive(points: List[List[float]], spec: Adaptive) -> List[List[int]]:
    # exact decimal arithmetic, so 0.1 * 30 is 3
    capacity = max(1, math.ceil(Fraction(repr(float(spec.gamma))) * len(points)))
    dim = len(points[0])
    leaves = []

    def split(members, depth):
        if len(members) <= capacity:
            leaves.append(members)
            return
        axis = depth % dim
        ordered = sorted(members, key=lambda i: (points[i][axis], i))
        half = (len(ordered) + 1) // 2
        split(ordered[:half], depth + 1)
        split(ordered[half:], depth + 1)

    split(list(range(len(points))), 0)
    return leaves


def oracle_gece(
    dataset: Dataset,
    lens: LensSpec,
    selector: SelectorSpec,
    dist: DistanceSpec,
    binning: BinningSpec,
) -> float:
    """
    Recompute the histogram GECE record by record with explicit loops. Slow; meant
    for checking the estimator on small datasets.

    :raises EmptySelection: If no record satisfies the selector.
    """
    lens.validate(dataset.k)
    dist.validate(lens.dim(dataset.k))

    selected = select(selector, dataset)
    if selected.n == 0:
        raise EmptySelection(f"selector '{selector}' matched none of {dataset.n} records")

    outputs, targets = [], []
    for record in selected:
        pair = apply_lens(lens, record.probs, one_hot(record.label, record.k))
        outputs.append(list(pair.output))
        targets.append(list(pair.target))

    if isinstance(binning, Uniform):
        cells = _oracle_uniform(outputs, binning)
    elif isinstance(binning, Adaptive):
        cells = _oracle_adaptive(outputs, binning)
    else:
        raise InvalidSpec(f"the reference estimator does not support {binning}")

    total = 0.0
    for members in cells:
        g_bar, y_bar = [], []
        for axis in range(len(outputs[0])):
            g_bar.append(sum(outputs[i][axis] for i in members) / len(members))
            y_bar.append(sum(targets[i][axis] for i in members) / len(members))
        total += len(members) / len(outputs) * _oracle_distance(dist, g_bar, y_bar)
    return total
