"""
Distance functions between the mean lensed output and the mean lensed target of a
bin. Every distance evaluates whole batches of bins at once.
"""

import abc
import numpy as np

from dataclasses import dataclass
from typing import Sequence, Tuple

from djcalib.exceptions import (
    DimensionMismatch,
    DistanceLensMismatch,
    InterIntervalOnNonScalar,
    InvalidSpec,
    NonFiniteInput,
    NonPSDMatrix,
)


# Smallest eigenvalue accepted for a positive semi-definite weight matrix.
PSD_TOLERANCE = -1e-8


class DistanceSpec(abc.ABC):
    """
    Base class for all distances d(g_bar, y_bar) >= 0.
    """

    def validate(self, dim: int):
        """
        Check that the distance is defined on lensed vectors of length dim.

        :raises DistanceLensMismatch: If it is not.
        """
        return None

    @abc.abstractmethod
    def evaluate(self, g_bars: np.ndarray, y_bars: np.ndarray) -> np.ndarray:
        """
        Distances between the rows of two (b, k') matrices, as a (b,) array.
        """
        return None


@dataclass(frozen=True)
class TVD(DistanceSpec):
    """
    Total variation distance. A scalar (k' = 1) output p is read as the binary
    point [1 - p, p], which makes the distance |g - y|.
    """

    def evaluate(self, g_bars, y_bars):
        diff = np.abs(g_bars - y_bars)
        if diff.shape[1] == 1:
            return diff[:, 0]
        return 0.5 * diff.sum(axis=1)

    def __str__(self):
        return "tvd"


@dataclass(frozen=True)
class L2(DistanceSpec):

    def evaluate(self, g_bars, y_bars):
        return np.linalg.norm(g_bars - y_bars, axis=1)

    def __str__(self):
        return "l2"


@dataclass(frozen=True)
class InterInterval(DistanceSpec):
    """
    Hinge distance of the mean target from the interval [l, h]; zero whenever the
    mean label falls inside the interval. The mean output does not enter.
    """

    l: float
    h: float

    def __post_init__(self):
        if not 0.0 <= self.l < self.h <= 1.0:
            raise InvalidSpec(f"interval [{self.l}, {self.h}] must satisfy 0 <= l < h <= 1")

    def validate(self, dim):
        if dim != 1:
            raise InterIntervalOnNonScalar(
                f"interval distance needs scalar (k'=1) outputs, not k'={dim}"
            )

    def evaluate(self, g_bars, y_bars):
        y = y_bars[:, 0]
        return np.maximum(0.0, np.maximum(self.l - y, y - self.h))

    def __str__(self):
        return f"interval:{self.l!r}:{self.h!r}"


@dataclass(frozen=True, eq=False)
class Weighted(DistanceSpec):
    """
    Generalized Mahalanobis distance sqrt((g - y)^T M (g - y)) for a symmetric
    positive semi-definite M. Build it with validate_weight_matrix.
    """

    matrix: Tuple[Tuple[float, ...], ...]
    source: str = None

    @property
    def M(self) -> np.ndarray:
        return np.array(self.matrix, dtype=float)

    def validate(self, dim):
        if len(self.matrix) != dim:
            raise DistanceLensMismatch(
                f"weight matrix is {len(self.matrix)}x{len(self.matrix)} but lensed outputs have k'={dim}"
            )

    def evaluate(self, g_bars, y_bars):
        diff = g_bars - y_bars
        quad = np.einsum("bi,ij,bj->b", diff, self.M, diff)
        # rounding can push a PSD quadratic form just below zero
        return np.sqrt(np.maximum(quad, 0.0))

    def __eq__(self, other):
        return isinstance(other, Weighted) and self.matrix == other.matrix

    def __hash__(self):
        return hash(self.matrix)

    def __str__(self):
        if self.source:
            return f"weighted:{self.source}"
        return "weighted:" + ";".join(",".join(repr(v) for v in row) for row in self.matrix)


def validate_weight_matrix(M: Sequence[Sequence[float]], source: str = None) -> Weighted:
    """
    Symmetrize M as (M + M^T) / 2 and check that it is positive semi-definite.

    :param M: A square matrix of finite entries.
    :param source: Where the matrix came from, echoed in reports.
    :raises NonPSDMatrix: With the offending eigenvalue if M is not PSD.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] == 0:
        raise DimensionMismatch(f"weight matrix must be square, got shape {M.shape}")

    if not np.all(np.isfinite(M)):
        raise NonFiniteInput("weight matrix entries must be finite")

    M = (M + M.T) / 2.0
    smallest = float(np.linalg.eigvalsh(M).min())
    if smallest < PSD_TOLERANCE:
        raise NonPSDMatrix(smallest)

    return Weighted(tuple(tuple(float(v) for v in row) for row in M), source=source)


def distance(spec: DistanceSpec, g_bar: Sequence[float], y_bar: Sequence[float]) -> float:
    """
    Distance between a mean lensed output and a mean lensed target.

    :raises DimensionMismatch: If the vectors differ in length.
    :raises DistanceLensMismatch: If the distance is not defined for their length.
    """
    g_bar = np.asarray(g_bar, dtype=float).reshape(-1)
    y_bar = np.asarray(y_bar, dtype=float).reshape(-1)
    if g_bar.shape != y_bar.shape:
        raise DimensionMismatch(f"mean output has {g_bar.size} entries but mean target has {y_bar.size}")

    spec.validate(g_bar.shape[0])
    return float(spec.evaluate(g_bar[np.newaxis, :], y_bar[np.newaxis, :])[0])
