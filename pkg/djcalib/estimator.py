"""
Binning schemes over the lensed output space and the plug-in histogram estimate of
the generalized expected calibration error (GECE):

    GECE = sum over bins B of |B| / N * d(mean lensed output in B, mean lensed target in B)

Bin means are reduced over sorted member values and the weighted sum uses exact
summation, so the estimate does not depend on the order of the records.
"""

import abc
import math
import logging
import numpy as np

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

from djcalib.conf import settings
from djcalib.core import Dataset
from djcalib.lenses import ClassConditional, LensSpec, TopK
from djcalib.selectors import All, SelectorSpec, select
from djcalib.distances import TVD, DistanceSpec
from djcalib.exceptions import EmptySelection, InvalidSpec


logger = logging.getLogger("djcalib.estimator")


@dataclass(frozen=True)
class Bin(object):
    """
    A cell of a partition of the lensed output space. The region is the axis
    aligned box (lower, upper) the cell covers.
    """

    member_indices: Tuple[int, ...]
    mean_output: Tuple[float, ...]
    mean_target: Optional[Tuple[float, ...]]
    region: Tuple[Tuple[float, ...], Tuple[float, ...]]

    @property
    def count(self) -> int:
        return len(self.member_indices)


@dataclass(frozen=True)
class Binning(object):
    """
    A partition of lensed points into non-empty bins.
    """

    bins: Tuple[Bin, ...]

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(b.count for b in self.bins)

    @property
    def n_points(self) -> int:
        return sum(self.sizes)

    def __len__(self):
        return len(self.bins)

    def __iter__(self):
        return iter(self.bins)


def _bin_means(values: np.ndarray, members: np.ndarray) -> Tuple[float, ...]:
    # sorting fixes the reduction order so the mean is independent of record order
    column_sorted = np.sort(values[members], axis=0)
    return tuple(float(v) for v in column_sorted.sum(axis=0) / members.shape[0])


def _make_bin(points, targets, members, region) -> Bin:
    members = np.sort(members)
    return Bin(
        member_indices=tuple(int(i) for i in members),
        mean_output=_bin_means(points, members),
        mean_target=_bin_means(targets, members) if targets is not None else None,
        region=region,
    )


def _as_points(points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, np.newaxis]
    return points


def bin_uniform(
    points: np.ndarray,
    b: int,
    lo: float = 0.0,
    hi: float = 1.0,
    targets: np.ndarray = None,
) -> Binning:
    """
    Partition points on a per-axis grid of b cells of width (hi - lo) / b. A point on
    an inner cell boundary belongs to the higher cell; the top edge closes the last
    cell and points outside [lo, hi] are clamped to the outer cells. Empty cells are
    dropped; the remaining bins are ordered by their grid coordinates.

    :param points: The (n, k') lensed outputs; a 1-d array is read as scalar points.
    :param b: Number of cells per axis.
    :param targets: Optional (n, k') lensed targets used to compute bin mean targets.
    """
    if b < 1:
        raise InvalidSpec("uniform binning needs at least one bin")
    if not lo < hi:
        raise InvalidSpec(f"uniform binning range [{lo}, {hi}] is empty")

    points = _as_points(points)
    targets = _as_points(targets) if targets is not None else None
    if points.shape[0] == 0:
        return Binning(())

    width = (hi - lo) / b
    cells = np.clip(np.floor((points - lo) / width), 0, b - 1).astype(int)
    occupied, inverse = np.unique(cells, axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)

    bins = []
    for j, cell in enumerate(occupied):
        members = np.flatnonzero(inverse == j)
        region = (
            tuple(float(lo + c * width) for c in cell),
            tuple(float(hi) if c == b - 1 else float(lo + (c + 1) * width) for c in cell),
        )
        bins.append(_make_bin(points, targets, members, region))

    logger.debug("uniform binning: %d points in %d occupied bins", points.shape[0], len(bins))
    return Binning(tuple(bins))


def adaptive_capacity(gamma: float, n: int) -> int:
    """
    Maximum number of points a gamma-adaptive bin may hold: ceil(gamma * n), at
    least one.
    """
    # rounding guards against products like 0.1 * 30 = 3.0000000000000004
    return max(1, math.ceil(round(gamma * n, 9)))


def bin_adaptive(points: np.ndarray, gamma: float, targets: np.ndarray = None) -> Binning:
    """
    Partition points with a k-d tree of median splits until every leaf holds at most
    ceil(gamma * n) points. Split axes cycle through the coordinates in order (depth
    mod k'); a node of m points sends the (m + 1) // 2 lowest (the lower median
    included) to the left child, breaking ties on the split coordinate by point
    index. Leaves are returned left to right.

    :param points: The (n, k') lensed outputs; a 1-d array is read as scalar points.
    :param gamma: The bin fraction in (0, 1].
    :param targets: Optional (n, k') lensed targets used to compute bin mean targets.
    """
    if not 0.0 < gamma <= 1.0:
        raise InvalidSpec(f"adaptive binning fraction {gamma} is not in (0, 1]")

    points = _as_points(points)
    targets = _as_points(targets) if targets is not None else None
    n, dim = points.shape
    if n == 0:
        return Binning(())

    capacity = adaptive_capacity(gamma, n)
    bins = []

    def split(indices, depth, lower, upper):
        if indices.shape[0] <= capacity:
            bins.append(_make_bin(points, targets, indices, (tuple(lower), tuple(upper))))
            return

        axis = depth % dim
        ordered = indices[np.lexsort((indices, points[indices, axis]))]
        half = (ordered.shape[0] + 1) // 2
        median = float(points[ordered[half - 1], axis])

        left_upper = list(upper)
        left_upper[axis] = median
        right_lower = list(lower)
        right_lower[axis] = median

        split(ordered[:half], depth + 1, lower, left_upper)
        split(ordered[half:], depth + 1, right_lower, upper)

    split(np.arange(n), 0, [0.0] * dim, [1.0] * dim)
    logger.debug("adaptive binning: %d points, capacity %d, %d bins", n, capacity, len(bins))
    return Binning(tuple(bins))


class BinningSpec(abc.ABC):
    """
    Declarative description of a binning scheme.
    """

    @abc.abstractmethod
    def bin(self, points: np.ndarray, targets: np.ndarray = None) -> Binning:
        return None


@dataclass(frozen=True)
class Uniform(BinningSpec):

    b: int
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.b < 1:
            raise InvalidSpec("uniform binning needs at least one bin")
        if not self.lo < self.hi:
            raise InvalidSpec(f"uniform binning range [{self.lo}, {self.hi}] is empty")

    def bin(self, points, targets=None):
        return bin_uniform(points, self.b, self.lo, self.hi, targets=targets)

    def __str__(self):
        if (self.lo, self.hi) == (0.0, 1.0):
            return f"uniform:{self.b}"
        return f"uniform:{self.b}:{self.lo!r}:{self.hi!r}"


@dataclass(frozen=True)
class Adaptive(BinningSpec):

    gamma: float

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidSpec(f"adaptive binning fraction {self.gamma} is not in (0, 1]")

    def bin(self, points, targets=None):
        return bin_adaptive(points, self.gamma, targets=targets)

    def __str__(self):
        return f"adaptive:{self.gamma!r}"


@dataclass(frozen=True)
class BinResult(object):

    count: int
    mean_output: Tuple[float, ...]
    mean_target: Tuple[float, ...]
    distance: float


@dataclass(frozen=True)
class MetricResult(object):
    """
    A GECE value with its per-bin breakdown and the configuration that produced it.
    """

    value: float
    per_bin: Tuple[BinResult, ...]
    n_selected: int
    config: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "value": self.value,
            "n": self.n_selected,
            "bins": [
                {
                    "count": b.count,
                    "mean_output": list(b.mean_output),
                    "mean_target": list(b.mean_target),
                    "distance": b.distance,
                }
                for b in self.per_bin
            ],
            "config": dict(self.config),
        }


def lensed(dataset: Dataset, lens: LensSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lensed outputs and targets of every record of the dataset.
    """
    lens.validate(dataset.k)
    return lens.transform(dataset.probs, dataset.targets)


def gece(
    dataset: Dataset,
    lens: LensSpec,
    selector: SelectorSpec,
    dist: DistanceSpec,
    binning: BinningSpec,
    seed: int = None,
) -> MetricResult:
    """
    Compute the plug-in histogram GECE: select the records, lens them, bin the
    lensed outputs (on the selection only), and sum the bin distances weighted by
    bin occupancy.

    :param seed: Echoed in the result config when the dataset came from a seeded
        process; the computation itself is deterministic.
    :raises EmptySelection: If no record satisfies the selector.
    :raises DistanceLensMismatch: If the distance is not defined for the lens.
    """
    lens.validate(dataset.k)
    dist.validate(lens.dim(dataset.k))

    selected = select(selector, dataset)
    if selected.n == 0:
        raise EmptySelection(f"selector '{selector}' matched none of {dataset.n} records")

    outputs, targets = lensed(selected, lens)
    partition = binning.bin(outputs, targets)

    g_bars = np.array([b.mean_output for b in partition], dtype=float)
    y_bars = np.array([b.mean_target for b in partition], dtype=float)
    distances = dist.evaluate(g_bars, y_bars)

    n = selected.n
    value = math.fsum(b.count / n * float(d) for b, d in zip(partition, distances))
    per_bin = tuple(
        BinResult(b.count, b.mean_output, b.mean_target, float(d))
        for b, d in zip(partition, distances)
    )

    config = {
        "lens": str(lens),
        "selector": str(selector),
        "distance": str(dist),
        "binning": str(binning),
        "seed": seed,
    }

    logger.debug("gece %s over %d records in %d bins: %.6g", config, n, len(per_bin), value)
    return MetricResult(value=value, per_bin=per_bin, n_selected=n, config=config)


def traditional_ece(dataset: Dataset, bins: int = None) -> MetricResult:
    """
    The traditional top-1 ECE: maximum output against the correctness indicator,
    TVD, uniform bins over [0, 1] (15 by default, DJCALIB_TRADITIONAL_BINS).
    """
    bins = bins or settings.DJCALIB_TRADITIONAL_BINS
    return gece(dataset, TopK(1), All(), TVD(), Uniform(bins, 0.0, 1.0))


def classwise_ece(dataset: Dataset, dist: DistanceSpec, binning: BinningSpec) -> float:
    """
    Mean over all classes of the class-conditional GECE.
    """
    values = [
        gece(dataset, ClassConditional(c), All(), dist, binning).value
        for c in range(dataset.k)
    ]
    return math.fsum(values) / len(values)
