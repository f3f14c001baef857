"""
Canonical data model for predictions and labels, and the simplex arithmetic shared
by the rest of the library. Datasets keep their probabilities, logits, and labels as
read-only numpy arrays so that lenses and estimators can work on whole batches;
individual records are materialized on request.
"""

import numpy as np

from typing import Iterable, Optional, Sequence, Tuple
from dataclasses import dataclass
from scipy import special

from djcalib.conf import settings
from djcalib.exceptions import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidSeed,
    MissingProbs,
    NonFiniteInput,
    SimplexViolation,
    SumOutOfTolerance,
)


# Agreement required between stored probabilities and softmax(logits).
LOGIT_AGREEMENT = 1e-6


@dataclass(frozen=True)
class ProbabilityVector(object):
    """
    A point of the probability simplex with k >= 2 entries. Construct it with
    validate_simplex or softmax rather than directly.
    """

    values: Tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.values)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, idx):
        return self.values[idx]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype or float)


@dataclass(frozen=True)
class TargetVector(object):
    """
    A one-hot encoded label, or a lensed target with entries in [0, 1].
    """

    values: Tuple[float, ...]

    def __len__(self):
        return len(self.values)

    def __getitem__(self, idx):
        return self.values[idx]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype or float)


def validate_simplex(values: Sequence[float], tolerance: float = None) -> ProbabilityVector:
    """
    Validate that values lie on the probability simplex and renormalize them so that
    they sum to exactly one.

    :param values: The candidate probabilities.
    :param tolerance: Allowed deviation of each entry from [0, 1] and of the sum
        from 1; defaults to the DJCALIB_SIMPLEX_TOLERANCE setting.
    :raises SimplexViolation: If an entry is out of range or there are too few entries.
    :raises SumOutOfTolerance: If the entries do not sum to one within tolerance.
    """
    row = validate_simplex_rows(np.asarray(values, dtype=float)[np.newaxis, :], tolerance)
    return ProbabilityVector(tuple(float(v) for v in row[0]))


def validate_simplex_rows(matrix: np.ndarray, tolerance: float = None) -> np.ndarray:
    """
    Row-wise validate_simplex over an (n, k) matrix; returns a renormalized copy.
    The error message names the zero-based row of the first violation.
    """
    if tolerance is None:
        tolerance = settings.DJCALIB_SIMPLEX_TOLERANCE

    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise SimplexViolation("probability vectors must be non-empty")

    if matrix.shape[1] < 2:
        raise SimplexViolation("probability vectors need at least two classes")

    if not np.all(np.isfinite(matrix)):
        row = int(np.argwhere(~np.isfinite(matrix))[0, 0])
        raise NonFiniteInput(f"row {row}: probabilities must be finite")

    bad = np.any((matrix < -tolerance) | (matrix > 1 + tolerance), axis=1)
    if np.any(bad):
        row = int(np.argmax(bad))
        raise SimplexViolation(f"row {row}: probability outside [0, 1]")

    sums = matrix.sum(axis=1)
    bad = np.abs(sums - 1.0) > tolerance
    if np.any(bad):
        row = int(np.argmax(bad))
        raise SumOutOfTolerance(f"row {row}: probabilities sum to {sums[row]:.10g}")

    clipped = np.clip(matrix, 0.0, 1.0)
    return clipped / clipped.sum(axis=1, keepdims=True)


def one_hot(label: int, k: int) -> TargetVector:
    """
    Encode a class index as a one-hot target vector of length k.

    :raises IndexOutOfRange: If label is not in [0, k).
    """
    if not 0 <= label < k:
        raise IndexOutOfRange(f"label {label} is not a class index for k={k}")
    return TargetVector(tuple(1.0 if i == label else 0.0 for i in range(k)))


def one_hot_rows(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise IndexOutOfRange(f"labels must be class indices in [0, {k})")
    targets = np.zeros((labels.shape[0], k), dtype=float)
    targets[np.arange(labels.shape[0]), labels] = 1.0
    return targets


def softmax(logits: Sequence[float]) -> ProbabilityVector:
    """
    Map logits onto the probability simplex with a max-subtracted exponential
    normalization.

    :raises NonFiniteInput: If a logit is nan or infinite.
    :raises DimensionMismatch: If there are fewer than two logits.
    """
    logits = np.asarray(logits, dtype=float)
    if logits.ndim != 1 or logits.shape[0] < 2:
        raise DimensionMismatch("softmax needs at least two logits")
    return ProbabilityVector(tuple(float(v) for v in softmax_rows(logits[np.newaxis, :])[0]))


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(logits)):
        raise NonFiniteInput("logits must be finite")
    return special.softmax(logits, axis=1)


def rng_for(seed: int, *spawn_key: int) -> np.random.Generator:
    """
    A PCG64 generator for one independent stream of a seeded process. Streams are
    addressed by a spawn key so that the draws of each (stream, index) pair do not
    depend on how many other streams were consumed, or in which order.
    """
    if seed is None:
        raise InvalidSeed("a seed is required for stochastic computations")
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in spawn_key))
    return np.random.Generator(np.random.PCG64(sequence))


def scalar_to_binary(p: float) -> ProbabilityVector:
    """
    Interpret a scalar binary output p as the simplex point [1 - p, p].
    """
    return validate_simplex([1.0 - p, p])


@dataclass(frozen=True)
class PredictionRecord(object):
    """
    One instance's classifier output (probabilities and/or logits) and true label.
    If only logits are given, the probabilities are their softmax.
    """

    label: int
    probs: Optional[ProbabilityVector] = None
    logits: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.probs is None and self.logits is None:
            raise MissingProbs("a prediction record needs probs or logits")

        if self.logits is not None:
            object.__setattr__(self, "logits", tuple(float(z) for z in self.logits))
            derived = softmax(self.logits)
            if self.probs is None:
                object.__setattr__(self, "probs", derived)
            elif len(self.probs) != len(derived) or not np.allclose(
                self.probs, derived, rtol=0, atol=LOGIT_AGREEMENT
            ):
                raise SimplexViolation("probs do not agree with softmax(logits)")

        if not 0 <= self.label < self.k:
            raise IndexOutOfRange(f"label {self.label} is not a class index for k={self.k}")

    @property
    def k(self) -> int:
        return len(self.probs)

    @property
    def target(self) -> TargetVector:
        return one_hot(self.label, self.k)


class Dataset(object):
    """
    An immutable collection of prediction records sharing the same number of
    classes. The arrays are exposed read-only: probs (n, k), labels (n,) and,
    when every record carried them, logits (n, k).

    Selections may produce an empty dataset; estimators reject those.
    """

    def __init__(
        self,
        probs: np.ndarray = None,
        labels: Iterable[int] = (),
        logits: np.ndarray = None,
        class_names: Sequence[str] = None,
        tolerance: float = None,
    ):
        labels = np.asarray(list(labels) if not isinstance(labels, np.ndarray) else labels)
        if labels.ndim != 1:
            raise DimensionMismatch("labels must be a one dimensional sequence")
        if labels.size and not np.all(np.equal(np.mod(labels, 1), 0)):
            raise IndexOutOfRange("labels must be integer class indices")
        labels = labels.astype(int)

        if logits is not None:
            logits = np.asarray(logits, dtype=float)
            if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
                raise DimensionMismatch("logits must be an (n, k) matrix with one row per label")
            derived = softmax_rows(logits)
            if probs is None:
                probs = derived
            elif np.shape(probs) != derived.shape or not np.allclose(
                probs, derived, rtol=0, atol=LOGIT_AGREEMENT
            ):
                raise SimplexViolation("probs do not agree with softmax(logits)")

        if probs is None:
            raise MissingProbs("a dataset needs probs or logits")

        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != labels.shape[0]:
            raise DimensionMismatch("probs must be an (n, k) matrix with one row per label")

        if probs.shape[0] > 0:
            probs = validate_simplex_rows(probs, tolerance)
        elif probs.shape[1] < 2:
            raise SimplexViolation("probability vectors need at least two classes")

        k = probs.shape[1]
        if labels.size and (labels.min() < 0 or labels.max() >= k):
            raise IndexOutOfRange(f"labels must be class indices in [0, {k})")

        if class_names is not None:
            class_names = tuple(str(name) for name in class_names)
            if len(class_names) != k:
                raise DimensionMismatch(f"expected {k} class names, got {len(class_names)}")

        self._probs = _readonly(probs)
        self._labels = _readonly(labels)
        self._logits = _readonly(logits) if logits is not None else None
        self.class_names = class_names

    @classmethod
    def from_records(cls, records: Iterable[PredictionRecord], class_names=None) -> "Dataset":
        """
        Build a dataset from prediction records; logits are kept only if every
        record has them.
        """
        records = list(records)
        if not records:
            raise SimplexViolation("a dataset needs at least one record")

        widths = {record.k for record in records}
        if len(widths) != 1:
            raise DimensionMismatch(f"records disagree on the number of classes: {sorted(widths)}")

        logits = None
        if all(record.logits is not None for record in records):
            logits = np.array([record.logits for record in records], dtype=float)

        return cls(
            probs=np.array([record.probs.values for record in records], dtype=float),
            labels=[record.label for record in records],
            logits=logits,
            class_names=class_names,
        )

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    @property
    def logits(self) -> Optional[np.ndarray]:
        return self._logits

    @property
    def has_logits(self) -> bool:
        return self._logits is not None

    @property
    def n(self) -> int:
        return self._probs.shape[0]

    @property
    def k(self) -> int:
        return self._probs.shape[1]

    @property
    def targets(self) -> np.ndarray:
        """
        One-hot encoded labels as an (n, k) matrix.
        """
        return one_hot_rows(self._labels, self.k)

    @property
    def records(self) -> Tuple[PredictionRecord, ...]:
        return tuple(self)

    def __len__(self):
        return self.n

    def __iter__(self):
        for i in range(self.n):
            yield PredictionRecord(
                label=int(self._labels[i]),
                probs=ProbabilityVector(tuple(float(p) for p in self._probs[i])),
                logits=tuple(self._logits[i]) if self._logits is not None else None,
            )

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.class_names == other.class_names
            and np.array_equal(self._labels, other._labels)
            and np.array_equal(self._probs, other._probs)
            and (
                (self._logits is None and other._logits is None)
                or (
                    self._logits is not None
                    and other._logits is not None
                    and np.array_equal(self._logits, other._logits)
                )
            )
        )

    def take(self, indices: Sequence[int]) -> "Dataset":
        """
        Return the records at the given indices (repeats allowed), in that order.
        """
        indices = np.asarray(indices, dtype=int)
        return self._derive(indices)

    def subset(self, mask: np.ndarray) -> "Dataset":
        """
        Return the records where the boolean mask is true, preserving order.
        """
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (self.n,):
            raise DimensionMismatch("selection mask must have one entry per record")
        return self._derive(np.flatnonzero(mask))

    def with_probs(self, probs: np.ndarray) -> "Dataset":
        """
        Return a dataset with the same labels and class names but new probabilities;
        logits are dropped since they no longer describe the outputs.
        """
        return Dataset(probs=probs, labels=self._labels, class_names=self.class_names)

    def _derive(self, indices: np.ndarray) -> "Dataset":
        derived = Dataset.__new__(Dataset)
        derived._probs = _readonly(self._probs[indices])
        derived._labels = _readonly(self._labels[indices])
        derived._logits = _readonly(self._logits[indices]) if self._logits is not None else None
        derived.class_names = self.class_names
        return derived


def _readonly(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array
