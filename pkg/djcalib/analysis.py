"""
Bootstrap diagnostics of the histogram estimator (gamma sweep, variance versus sample
fraction, points per bin) and descriptive profiles of classifier outputs.

Bootstrap resamples draw from independent PCG64 streams addressed by the spawn key
(stream, grid index, resample index): stream 1 is the gamma sweep and stream 2 the
variance profile. Any resample can therefore be recomputed on its own.
"""

import logging
import numpy as np

from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

from scipy import special

from djcalib.conf import settings
from djcalib.core import Dataset, rng_for
from djcalib.distances import DistanceSpec
from djcalib.estimator import Adaptive, Binning, gece, lensed
from djcalib.exceptions import EmptySelection, FractionTooSmall, InvalidSpec
from djcalib.lenses import Grouping, LensSpec
from djcalib.selectors import All, LabelInGroup, SelectorSpec, select


logger = logging.getLogger("djcalib.analysis")

SWEEP_STREAM = 1
VARIANCE_STREAM = 2


@dataclass(frozen=True)
class BinStats(object):
    """
    Order statistics of the number of points per bin.
    """

    median: float
    min: int
    max: int


def bin_stats(binning: Binning) -> BinStats:
    """
    Median, minimum, and maximum bin occupancy of a binning.

    :raises EmptySelection: If the binning has no bins.
    """
    sizes = np.asarray(binning.sizes, dtype=int)
    if sizes.size == 0:
        raise EmptySelection("cannot compute statistics of an empty binning")
    return BinStats(median=float(np.median(sizes)), min=int(sizes.min()), max=int(sizes.max()))


@dataclass(frozen=True)
class SweepResult(object):
    """
    Bootstrap mean and standard deviation of the adaptive GECE at each gamma of a
    coarse to fine grid, with the recommended gamma.
    """

    gammas: Tuple[float, ...]
    mean_ece: Tuple[float, ...]
    std_ece: Tuple[float, ...]
    n_resamples: int
    recommended_gamma: float
    plateau_found: bool
    seed: int
    bin_stats: Tuple[BinStats, ...] = ()
    config: Dict[str, Any] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "gammas": list(self.gammas),
            "mean_ece": list(self.mean_ece),
            "std_ece": list(self.std_ece),
            "n_resamples": self.n_resamples,
            "recommended_gamma": self.recommended_gamma,
            "plateau_found": self.plateau_found,
            "seed": self.seed,
            "bin_stats": [
                {"median": s.median, "min": s.min, "max": s.max} for s in self.bin_stats
            ],
            "config": dict(self.config or {}),
        }

    def to_rows(self) -> Tuple[List[str], List[list]]:
        header = ["gamma", "mean_ece", "std_ece", "median_points", "min_points", "max_points"]
        rows = [
            [gamma, mean, std, stats.median, stats.min, stats.max]
            for gamma, mean, std, stats in zip(self.gammas, self.mean_ece, self.std_ece, self.bin_stats)
        ]
        return header, rows


@dataclass(frozen=True)
class VarianceProfile(object):
    """
    Bootstrap standard deviation of the GECE at each sample fraction n/N.
    """

    fractions: Tuple[float, ...]
    std_ece: Tuple[float, ...]
    seed: int
    mean_ece: Tuple[float, ...] = ()
    config: Dict[str, Any] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fractions": list(self.fractions),
            "mean_ece": list(self.mean_ece),
            "std_ece": list(self.std_ece),
            "seed": self.seed,
            "config": dict(self.config or {}),
        }

    def to_rows(self) -> Tuple[List[str], List[list]]:
        return ["fraction", "mean_ece", "std_ece"], [
            [f, m, s] for f, m, s in zip(self.fractions, self.mean_ece, self.std_ece)
        ]


def _select(dataset: Dataset, selector: SelectorSpec) -> Dataset:
    selected = select(selector, dataset)
    if selected.n == 0:
        raise EmptySelection(f"selector '{selector}' matched none of {dataset.n} records")
    return selected


def _bootstrap(selected, lens, dist, gamma, draws, n_resamples, seed, key):
    # resamples are drawn from the already selected records
    values = np.empty(n_resamples, dtype=float)
    binning = Adaptive(gamma)
    for r in range(n_resamples):
        rng = rng_for(seed, *key, r)
        indices = rng.integers(0, selected.n, size=draws)
        values[r] = gece(selected.take(indices), lens, All(), dist, binning).value
    return values


def gamma_sweep(
    dataset: Dataset,
    lens: LensSpec,
    selector: SelectorSpec,
    dist: DistanceSpec,
    gamma_grid: Sequence[float] = None,
    n_resamples: int = None,
    seed: int = None,
    stability_epsilon: float = None,
) -> SweepResult:
    """
    Sweep the adaptive binning fraction from coarse to fine. The selector is applied
    once; at each gamma, draw n_resamples bootstrap resamples (N draws with
    replacement from the N selected records) and report the mean and standard
    deviation of the adaptive GECE.

    The recommended gamma is the coarsest grid point whose mean differs from the
    next finer one by less than stability_epsilon; without such a plateau it falls
    back to DJCALIB_DEFAULT_GAMMA.

    :raises InvalidSpec: If the grid is empty or not sorted coarse to fine.
    :raises EmptySelection: If the selector matches no records.
    """
    grid = tuple(float(g) for g in (gamma_grid or settings.DJCALIB_GAMMA_GRID))
    n_resamples = settings.DJCALIB_RESAMPLES if n_resamples is None else n_resamples
    epsilon = settings.DJCALIB_PLATEAU_EPSILON if stability_epsilon is None else stability_epsilon

    if not grid:
        raise InvalidSpec("the gamma grid is empty")
    if any(a <= b for a, b in zip(grid, grid[1:])):
        raise InvalidSpec("the gamma grid must be sorted from coarse to fine")
    if n_resamples < 1:
        raise InvalidSpec("at least one resample is required")

    selected = _select(dataset, selector)
    points, targets = lensed(selected, lens)

    means, stds, stats = [], [], []
    for gi, gamma in enumerate(grid):
        values = _bootstrap(selected, lens, dist, gamma, selected.n, n_resamples, seed, (SWEEP_STREAM, gi))
        means.append(float(np.mean(values)))
        stds.append(float(np.std(values)))
        stats.append(bin_stats(Adaptive(gamma).bin(points, targets)))
        logger.debug("gamma %.6g: mean %.6g std %.6g", gamma, means[-1], stds[-1])

    recommended, plateau = settings.DJCALIB_DEFAULT_GAMMA, False
    for i in range(len(grid) - 1):
        if abs(means[i] - means[i + 1]) < epsilon:
            recommended, plateau = grid[i], True
            break

    if not plateau:
        logger.warning("no stable gamma region found, falling back to gamma=%s", recommended)

    return SweepResult(
        gammas=grid,
        mean_ece=tuple(means),
        std_ece=tuple(stds),
        n_resamples=n_resamples,
        recommended_gamma=recommended,
        plateau_found=plateau,
        seed=seed,
        bin_stats=tuple(stats),
        config={
            "lens": str(lens),
            "selector": str(selector),
            "distance": str(dist),
            "stability_epsilon": epsilon,
            "seed": seed,
        },
    )


def variance_profile(
    dataset: Dataset,
    lens: LensSpec,
    selector: SelectorSpec,
    dist: DistanceSpec,
    gamma: float = None,
    fractions: Sequence[float] = None,
    n_resamples: int = None,
    seed: int = None,
) -> VarianceProfile:
    """
    For each fraction f, draw floor(f * N) of the N selected records with
    replacement n_resamples times and report the standard deviation of the
    adaptive GECE.

    :raises FractionTooSmall: If floor(f * N) is zero for some fraction.
    """
    gamma = settings.DJCALIB_DEFAULT_GAMMA if gamma is None else gamma
    fractions = tuple(float(f) for f in (fractions or settings.DJCALIB_FRACTIONS))
    n_resamples = settings.DJCALIB_RESAMPLES if n_resamples is None else n_resamples
    if n_resamples < 1:
        raise InvalidSpec("at least one resample is required")

    selected = _select(dataset, selector)
    for f in fractions:
        if not 0.0 < f <= 1.0:
            raise InvalidSpec(f"sample fraction {f} is not in (0, 1]")
        if int(np.floor(f * selected.n)) == 0:
            raise FractionTooSmall(f"sample fraction {f} of {selected.n} selected records draws nothing")

    means, stds = [], []
    for fi, f in enumerate(fractions):
        draws = int(np.floor(f * selected.n))
        values = _bootstrap(selected, lens, dist, gamma, draws, n_resamples, seed, (VARIANCE_STREAM, fi))
        means.append(float(np.mean(values)))
        stds.append(float(np.std(values)))

    return VarianceProfile(
        fractions=fractions,
        std_ece=tuple(stds),
        seed=seed,
        mean_ece=tuple(means),
        config={
            "lens": str(lens),
            "selector": str(selector),
            "distance": str(dist),
            "binning": str(Adaptive(gamma)),
            "n_resamples": n_resamples,
            "seed": seed,
        },
    )


def _check_ks(ks: Sequence[int], k: int):
    bad = [m for m in ks if not 1 <= m <= k]
    if bad:
        raise InvalidSpec(f"k values {bad} are not in [1, {k}]")


def confidence_profile(dataset: Dataset, ks: Sequence[int]) -> List[float]:
    """
    Mean over records of the m-th largest output, for each m in ks.
    """
    _check_ks(ks, dataset.k)
    ranked = -np.sort(-dataset.probs, axis=1)
    return [float(ranked[:, m - 1].mean()) for m in ks]


def topk_accuracy(dataset: Dataset, ks: Sequence[int]) -> List[float]:
    """
    Fraction of records whose label is among the m largest outputs, for each m in
    ks. Tied outputs rank the lower class index first.
    """
    _check_ks(ks, dataset.k)
    order = np.argsort(-dataset.probs, axis=1, kind="stable")
    rank = np.argmax(order == dataset.labels[:, np.newaxis], axis=1)
    return [float(np.mean(rank < m)) for m in ks]


def mean_entropy(dataset: Dataset) -> float:
    """
    Mean Shannon entropy of the outputs in nats, with 0 ln 0 = 0.
    """
    if dataset.n == 0:
        raise EmptySelection("cannot compute the entropy of an empty dataset")
    return float(special.entr(dataset.probs).sum(axis=1).mean())


def group_conditional_confidence(dataset: Dataset, grouping: Grouping, group: int) -> List[float]:
    """
    Mean grouped output over the records whose label belongs to the given group.

    :raises EmptySelection: If no record has a label in the group.
    """
    grouping.validate(dataset.k)
    if not 0 <= group < len(grouping.groups):
        raise InvalidSpec(f"group {group} does not exist in a grouping of {len(grouping.groups)}")

    selected = select(LabelInGroup(frozenset(grouping.groups[group])), dataset)
    if selected.n == 0:
        raise EmptySelection(f"no record has a label in group {group}")

    outputs, _ = lensed(selected, grouping)
    return [float(v) for v in outputs.mean(axis=0)]
