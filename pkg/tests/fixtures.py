"""
Shared datasets and helpers for the djcalib tests.
"""

import json
import numpy as np

from pathlib import Path

from djcalib.core import Dataset
from djcalib.distances import L2, TVD, InterInterval, validate_weight_matrix
from djcalib.estimator import Adaptive, Uniform
from djcalib.lenses import ClassConditional, Full, Grouping, TopK
from djcalib.selectors import (
    All,
    Conjunction,
    LabelEquals,
    LabelInGroup,
    MaxProb,
    OutputCompare,
)


def binary(scores, labels, **kwargs) -> Dataset:
    """
    A binary dataset from class 1 probabilities.
    """
    scores = np.asarray(scores, dtype=float)
    return Dataset(probs=np.column_stack([1.0 - scores, scores]), labels=labels, **kwargs)


def hand_fixture() -> Dataset:
    """
    Top-1 outputs {0.9, 0.9, 0.7, 0.7} with correctness {1, 0, 1, 1}; its top-1 ECE
    under two bins over [0.5, 1] (and under 15 bins over [0, 1]) is 0.35.
    """
    return binary([0.9, 0.9, 0.7, 0.7], [1, 0, 1, 1])


def likert_fixture() -> Dataset:
    """
    A binary set whose medium band [0.33, 0.66) holds scores of 0.6 with half of
    the labels positive.
    """
    return binary(
        [0.1, 0.2, 0.6, 0.6, 0.6, 0.6, 0.9, 0.95],
        [0, 0, 1, 0, 1, 0, 1, 1],
    )


def random_dataset(rng: np.random.Generator, n: int, k: int, logits: bool = False) -> Dataset:
    z = rng.normal(scale=2.0, size=(n, k))
    probs = np.exp(z - z.max(axis=1, keepdims=True))
    probs /= probs.sum(axis=1, keepdims=True)
    labels = rng.integers(0, k, size=n)
    if logits:
        return Dataset(logits=z, labels=labels)
    return Dataset(probs=probs, labels=labels)


def random_partition(rng: np.random.Generator, k: int) -> Grouping:
    assignment = rng.integers(0, k, size=k)
    groups = [tuple(int(c) for c in np.flatnonzero(assignment == g)) for g in range(k)]
    return Grouping(tuple(group for group in groups if group))


def random_lens(rng: np.random.Generator, k: int):
    choice = rng.integers(0, 4)
    if choice == 0:
        return Full()
    if choice == 1:
        return TopK(int(rng.integers(1, k + 1)))
    if choice == 2:
        return ClassConditional(int(rng.integers(0, k)))
    return random_partition(rng, k)


def random_distance(rng: np.random.Generator, dim: int):
    choices = ["tvd", "l2", "weighted"] + (["interval"] if dim == 1 else [])
    choice = choices[int(rng.integers(0, len(choices)))]
    if choice == "tvd":
        return TVD()
    if choice == "l2":
        return L2()
    if choice == "interval":
        lo = float(rng.uniform(0.0, 0.5))
        return InterInterval(lo, float(rng.uniform(lo + 0.01, 1.0)))
    a = rng.normal(size=(dim, dim))
    return validate_weight_matrix(a @ a.T)


def random_binning(rng: np.random.Generator):
    if rng.random() < 0.5:
        return Uniform(int(rng.integers(1, 6)))
    return Adaptive(float(rng.uniform(0.01, 1.0)))


def random_selector(rng: np.random.Generator, k: int):
    choice = rng.integers(0, 4)
    if choice == 0:
        return All()
    if choice == 1:
        return LabelEquals(int(rng.integers(0, k)))
    if choice == 2:
        size = int(rng.integers(1, k + 1))
        return LabelInGroup(frozenset(int(c) for c in rng.choice(k, size=size, replace=False)))
    return Conjunction((OutputCompare(MaxProb(), ">=", float(rng.uniform(0.0, 0.6))), All()))


def write_jsonl(path: Path, rows) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")
    return path


def read_json(path) -> dict:
    with Path(path).open("r", encoding="utf-8") as f:
        return json.load(f)
