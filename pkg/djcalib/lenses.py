"""
Lenses are output/target transformation pairs that induce the classification
problem a calibration condition refers to: the full problem, the top-k outputs,
groups of classes, or a single class.
"""

import abc
import numpy as np

from dataclasses import dataclass
from typing import Mapping, Tuple

from djcalib.core import ProbabilityVector, TargetVector
from djcalib.exceptions import (
    DimensionMismatch,
    EmptyGroup,
    InvalidLensForK,
    PartialMap,
)


@dataclass(frozen=True)
class LensedPair(object):
    """
    The lensed output and lensed target of a single record.
    """

    output: Tuple[float, ...]
    target: Tuple[float, ...]


class LensSpec(abc.ABC):
    """
    Base class for all lenses. Subclasses transform whole batches of outputs and
    one-hot targets at once; apply_lens is the single record form.
    """

    @abc.abstractmethod
    def validate(self, k: int):
        """
        Check that the lens is defined for a k class problem.

        :raises InvalidLensForK: If it is not.
        """
        return None

    @abc.abstractmethod
    def dim(self, k: int) -> int:
        """
        The dimension k' of the lensed outputs for a k class problem.
        """
        return None

    @abc.abstractmethod
    def transform(self, probs: np.ndarray, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Map (n, k) outputs and targets to (n, k') lensed outputs and targets.
        """
        return None


@dataclass(frozen=True)
class Full(LensSpec):

    def validate(self, k):
        if k < 2:
            raise InvalidLensForK("the full lens needs at least two classes")

    def dim(self, k):
        return k

    def transform(self, probs, targets):
        return np.array(probs, dtype=float), np.array(targets, dtype=float)

    def __str__(self):
        return "full"


@dataclass(frozen=True)
class TopK(LensSpec):
    """
    Keeps the k_sel largest outputs in descending order along with the targets at
    the same classes; ties are broken by the lowest class index.
    """

    k_sel: int

    def validate(self, k):
        if not 1 <= self.k_sel <= k:
            raise InvalidLensForK(f"topk:{self.k_sel} is not defined for k={k}")

    def dim(self, k):
        return self.k_sel

    def transform(self, probs, targets):
        probs = np.asarray(probs, dtype=float)
        # stable sort on the negated outputs keeps lower class indices first on ties
        order = np.argsort(-probs, axis=1, kind="stable")[:, : self.k_sel]
        return (
            np.take_along_axis(probs, order, axis=1),
            np.take_along_axis(np.asarray(targets, dtype=float), order, axis=1),
        )

    def __str__(self):
        return f"topk:{self.k_sel}"


@dataclass(frozen=True)
class Grouping(LensSpec):
    """
    Sums outputs and targets over each group of a partition of the classes.
    """

    groups: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(int(c) for c in group) for group in self.groups)
        if not groups:
            raise EmptyGroup("a grouping needs at least one group")
        for idx, group in enumerate(groups):
            if not group:
                raise EmptyGroup(f"group {idx} has no classes")
        object.__setattr__(self, "groups", groups)

    def validate(self, k):
        members = [c for group in self.groups for c in group]
        if len(members) != len(set(members)):
            raise InvalidLensForK("grouping has a class in more than one group")
        if set(members) != set(range(k)):
            raise InvalidLensForK(f"grouping does not partition the {k} classes")

    def dim(self, k):
        return len(self.groups)

    def transform(self, probs, targets):
        probs = np.asarray(probs, dtype=float)
        targets = np.asarray(targets, dtype=float)
        outputs = np.empty((probs.shape[0], len(self.groups)))
        lensed = np.empty((targets.shape[0], len(self.groups)))
        for j, group in enumerate(self.groups):
            outputs[:, j] = probs[:, list(group)].sum(axis=1)
            lensed[:, j] = targets[:, list(group)].sum(axis=1)
        return outputs, lensed

    def __str__(self):
        return "group:" + ";".join(",".join(str(c) for c in group) for group in self.groups)


@dataclass(frozen=True)
class ClassConditional(LensSpec):

    c: int

    def validate(self, k):
        if not 0 <= self.c < k:
            raise InvalidLensForK(f"class:{self.c} is not defined for k={k}")

    def dim(self, k):
        return 1

    def transform(self, probs, targets):
        probs = np.asarray(probs, dtype=float)
        targets = np.asarray(targets, dtype=float)
        return probs[:, [self.c]], targets[:, [self.c]]

    def __str__(self):
        return f"class:{self.c}"


def apply_lens(lens: LensSpec, g: ProbabilityVector, y: TargetVector) -> LensedPair:
    """
    Apply a lens to a single classifier output and its one-hot target.

    :raises DimensionMismatch: If g and y have different lengths.
    :raises InvalidLensForK: If the lens is not defined for this many classes.
    """
    g = np.asarray(g, dtype=float)
    y = np.asarray(y, dtype=float)
    if g.shape != y.shape:
        raise DimensionMismatch(f"output has {g.size} entries but target has {y.size}")

    lens.validate(g.shape[0])
    output, target = lens.transform(g[np.newaxis, :], y[np.newaxis, :])
    return LensedPair(
        output=tuple(float(v) for v in output[0]),
        target=tuple(float(v) for v in target[0]),
    )


def make_grouping(group_map: Mapping[int, int], k: int) -> Grouping:
    """
    Build a grouping lens from a class index to group index map. Groups are
    renumbered 0..|G|-1 in order of first appearance along the class indices.

    :raises PartialMap: If some class in [0, k) is not mapped or an unknown class is.
    """
    group_map = {int(c): g for c, g in group_map.items()}
    missing = [c for c in range(k) if c not in group_map]
    if missing:
        raise PartialMap(f"classes {missing} have no group")

    extra = sorted(c for c in group_map if not 0 <= c < k)
    if extra:
        raise PartialMap(f"classes {extra} are not class indices for k={k}")

    compact = {}
    groups = []
    for c in range(k):
        label = group_map[c]
        if label not in compact:
            compact[label] = len(groups)
            groups.append([])
        groups[compact[label]].append(c)

    return Grouping(tuple(tuple(group) for group in groups))


def singleton_grouping(k: int) -> Grouping:
    return Grouping(tuple((c,) for c in range(k)))
