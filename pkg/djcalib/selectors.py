"""
Selection operators pick the evaluation subset a calibration metric refers to, by a
condition on the labels or on the classifier outputs.
"""

import abc
import operator
import numpy as np

from dataclasses import dataclass
from typing import FrozenSet, Tuple

from djcalib.core import Dataset
from djcalib.exceptions import InvalidClassIndex, InvalidSpec


# Tolerance of the equality comparator on real valued outputs.
EQUALITY_TOLERANCE = 1e-9

COMPARATORS = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "=": None,
}


class SelectorSpec(abc.ABC):
    """
    Base class for selection operators.
    """

    @abc.abstractmethod
    def validate(self, k: int):
        """
        Check that the selector is defined for a k class dataset.

        :raises InvalidSpec: If it is not.
        """
        return None

    @abc.abstractmethod
    def mask(self, dataset: Dataset) -> np.ndarray:
        """
        Boolean mask of the records of the dataset that satisfy the condition.
        """
        return None


@dataclass(frozen=True)
class All(SelectorSpec):

    def validate(self, k):
        return None

    def mask(self, dataset):
        return np.ones(dataset.n, dtype=bool)

    def __str__(self):
        return "all"


@dataclass(frozen=True)
class LabelEquals(SelectorSpec):

    c: int

    def validate(self, k):
        if not 0 <= self.c < k:
            raise InvalidClassIndex(f"label={self.c} is not a class index for k={k}")

    def mask(self, dataset):
        return dataset.labels == self.c

    def __str__(self):
        return f"label={self.c}"


@dataclass(frozen=True)
class LabelInGroup(SelectorSpec):
    """
    Selects records whose label is one of a group of classes.
    """

    group: FrozenSet[int]

    def __post_init__(self):
        object.__setattr__(self, "group", frozenset(int(c) for c in self.group))
        if not self.group:
            raise InvalidSpec("label-in needs at least one class")

    def validate(self, k):
        bad = sorted(c for c in self.group if not 0 <= c < k)
        if bad:
            raise InvalidClassIndex(f"label-in classes {bad} are not class indices for k={k}")

    def mask(self, dataset):
        return np.isin(dataset.labels, sorted(self.group))

    def __str__(self):
        return "label-in=" + ",".join(str(c) for c in sorted(self.group))


class Projection(abc.ABC):
    """
    Reduces each classifier output to the scalar an output condition compares.
    """

    @abc.abstractmethod
    def validate(self, k: int):
        return None

    @abc.abstractmethod
    def project(self, probs: np.ndarray) -> np.ndarray:
        return None


@dataclass(frozen=True)
class MaxProb(Projection):

    def validate(self, k):
        return None

    def project(self, probs):
        return probs.max(axis=1)

    def __str__(self):
        return "maxprob"


@dataclass(frozen=True)
class ClassProb(Projection):

    c: int

    def validate(self, k):
        if not 0 <= self.c < k:
            raise InvalidClassIndex(f"p{self.c} is not a class index for k={k}")

    def project(self, probs):
        return probs[:, self.c]

    def __str__(self):
        return f"p{self.c}"


@dataclass(frozen=True)
class ScalarBinary(Projection):
    """
    The scalar output of a binary classifier, i.e. the probability of class 1.
    """

    def validate(self, k):
        if k != 2:
            raise InvalidSpec(f"score is only defined for binary datasets, not k={k}")

    def project(self, probs):
        return probs[:, 1]

    def __str__(self):
        return "score"


@dataclass(frozen=True)
class OutputCompare(SelectorSpec):

    projection: Projection
    comparator: str
    threshold: float

    def __post_init__(self):
        if self.comparator not in COMPARATORS:
            raise InvalidSpec(f"unknown comparator '{self.comparator}'")
        if not 0.0 <= self.threshold <= 1.0:
            raise InvalidSpec(f"threshold {self.threshold} is not in [0, 1]")

    def validate(self, k):
        self.projection.validate(k)

    def mask(self, dataset):
        values = self.projection.project(dataset.probs)
        if self.comparator == "=":
            return np.abs(values - self.threshold) <= EQUALITY_TOLERANCE
        return COMPARATORS[self.comparator](values, self.threshold)

    def __str__(self):
        return f"{self.projection}{self.comparator}{self.threshold!r}"


@dataclass(frozen=True)
class Conjunction(SelectorSpec):

    selectors: Tuple[SelectorSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "selectors", tuple(self.selectors))
        if not self.selectors:
            raise InvalidSpec("a conjunction needs at least one selector")

    def validate(self, k):
        for selector in self.selectors:
            selector.validate(k)

    def mask(self, dataset):
        mask = np.ones(dataset.n, dtype=bool)
        for selector in self.selectors:
            mask &= selector.mask(dataset)
        return mask

    def __str__(self):
        return ",".join(str(selector) for selector in self.selectors)


def select(selector: SelectorSpec, dataset: Dataset) -> Dataset:
    """
    Return the records of the dataset that satisfy the selector, preserving order.
    An empty result is not an error here; estimators reject empty selections.

    :raises InvalidSpec: If the selector is not defined for the dataset's classes.
    """
    selector.validate(dataset.k)
    if isinstance(selector, All):
        return dataset
    return dataset.subset(selector.mask(dataset))
