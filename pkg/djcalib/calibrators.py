"""
Post-processing calibrators fit on a validation split by minimizing the negative log
likelihood (NLL) of the calibrated outputs: temperature scaling (TS), bias-corrected
temperature scaling (BCTS), and histogram binning (HB).
"""

import abc
import math
import logging
import numpy as np

from dataclasses import dataclass
from typing import Any, Callable, Dict, Tuple

from scipy import special

from djcalib.conf import settings
from djcalib.core import Dataset
from djcalib.exceptions import (
    DegenerateValidation,
    EmptySelection,
    InvalidSpec,
    MissingLogits,
)


logger = logging.getLogger("djcalib.calibrators")

# Golden-section search interval on the natural log of the temperature.
LOG_TEMPERATURE_BOUNDS = (-4.0, 4.0)
GOLDEN_TOLERANCE = 1e-6
PHI_RATIO = 2 / (1 + math.sqrt(5))

BCTS_MAX_ITERATIONS = 5000
BCTS_GRADIENT_TOLERANCE = 1e-6


def encode_float(value: float) -> str:
    """
    Encode a float as a decimal string with 17 significant digits, which
    round-trips every 64-bit float exactly.
    """
    return format(float(value), ".17g")


@dataclass(frozen=True)
class FitReport(object):
    """
    Outcome of fitting a calibrator on a validation set.
    """

    parameters: Dict[str, Any]
    initial_nll: float
    final_nll: float
    iterations: int
    converged: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "parameters": self.parameters,
            "initial_nll": self.initial_nll,
            "final_nll": self.final_nll,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def scores(dataset: Dataset, from_probs: bool = True) -> np.ndarray:
    """
    The logits of the dataset or, when it has none and from_probs is set, the log of
    its (clamped) probabilities, which softmax maps back to the same outputs.

    :raises MissingLogits: If the dataset has no logits and from_probs is false.
    """
    if dataset.has_logits:
        return np.array(dataset.logits, dtype=float)
    if not from_probs:
        raise MissingLogits("this calibrator needs logits but the dataset only has probabilities")
    return np.log(np.maximum(dataset.probs, settings.DJCALIB_NLL_CLAMP))


def nll(probs: np.ndarray, labels: np.ndarray, clamp: float = None) -> float:
    """
    Mean negative log likelihood (natural log) of the labels under the outputs,
    with probabilities clamped from below.
    """
    clamp = settings.DJCALIB_NLL_CLAMP if clamp is None else clamp
    picked = np.asarray(probs)[np.arange(len(labels)), labels]
    return float(-np.mean(np.log(np.maximum(picked, clamp))))


def logit_nll(logits: np.ndarray, labels: np.ndarray) -> float:
    """
    Mean negative log likelihood of softmax(logits), computed with logsumexp.
    """
    picked = logits[np.arange(len(labels)), labels]
    return float(np.mean(special.logsumexp(logits, axis=1) - picked))


def _check_validation(val: Dataset):
    if val.n < 2:
        raise DegenerateValidation("at least two validation records are required")
    if np.unique(val.labels).shape[0] < 2:
        raise DegenerateValidation("the validation labels contain a single class")


def golden_section(
    f: Callable[[float], float],
    lower: float,
    upper: float,
    tol: float = GOLDEN_TOLERANCE,
    max_iterations: int = 200,
) -> Dict[str, Any]:
    """
    Minimize a unimodal function on [lower, upper] by golden-section search until the
    bracket is narrower than tol. The end points are checked too so that a minimum
    on the boundary is reported as such.
    """
    x1 = upper - PHI_RATIO * (upper - lower)
    x2 = lower + PHI_RATIO * (upper - lower)
    f1, f2 = f(x1), f(x2)
    lo0, hi0 = lower, upper

    iterations = 0
    while iterations < max_iterations and abs(upper - lower) > tol:
        if f2 > f1:
            upper, x2, f2 = x2, x1, f1
            x1 = upper - PHI_RATIO * (upper - lower)
            f1 = f(x1)
        else:
            lower, x1, f1 = x1, x2, f2
            x2 = lower + PHI_RATIO * (upper - lower)
            f2 = f(x2)
        iterations += 1

    argmin = 0.5 * (lower + upper)
    minimum = f(argmin)
    for edge in (lo0, hi0):
        value = f(edge)
        if value < minimum:
            argmin, minimum = edge, value

    return {
        "argmin": argmin,
        "minimum": minimum,
        "iterations": iterations,
        "converged": iterations < max_iterations and not math.isnan(minimum),
    }


class Calibrator(abc.ABC):
    """
    Base class for fitted calibrators. Calibrators are immutable; apply returns a new
    dataset with the same labels and calibrated probabilities.
    """

    variant: str = None

    @abc.abstractmethod
    def apply(self, dataset: Dataset, from_probs: bool = True) -> Dataset:
        """
        Map the raw outputs of a dataset to calibrated outputs.
        """
        return None

    @abc.abstractmethod
    def parameters(self) -> Dict[str, Any]:
        """
        The fitted parameters, with floats encoded as 17 significant digit strings.
        """
        return None

    @classmethod
    @abc.abstractmethod
    def from_parameters(cls, parameters: Dict[str, Any]) -> "Calibrator":
        return None

    def to_document(self) -> Dict[str, Any]:
        return {"variant": self.variant, "parameters": self.parameters()}

    @staticmethod
    def from_document(document: Dict[str, Any]) -> "Calibrator":
        """
        Decode a {variant, parameters} document using the DJCALIB_CALIBRATORS setting.

        :raises InvalidSpec: If the variant is unknown or the document is malformed.
        """
        try:
            variant = document["variant"]
            parameters = document["parameters"]
        except (KeyError, TypeError):
            raise InvalidSpec("calibrator documents need a variant and parameters")

        registry = settings.DJCALIB_CALIBRATORS
        if variant not in registry:
            raise InvalidSpec(f"unknown calibrator variant '{variant}'")

        try:
            return registry[variant].from_parameters(parameters)
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidSpec(f"malformed {variant} calibrator parameters: {e}")


@dataclass(frozen=True)
class TemperatureScaling(Calibrator):
    """
    softmax(z / T) for a temperature T > 0.
    """

    T: float
    variant = "ts"

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise InvalidSpec(f"temperature {self.T} must be finite and positive")

    def apply(self, dataset, from_probs=True):
        return dataset.with_probs(special.softmax(scores(dataset, from_probs) / self.T, axis=1))

    def parameters(self):
        return {"T": encode_float(self.T)}

    @classmethod
    def from_parameters(cls, parameters):
        return cls(T=float(parameters["T"]))


@dataclass(frozen=True)
class BiasCorrectedTemperatureScaling(Calibrator):
    """
    softmax(z / T + b) for a temperature T > 0 and a per-class bias b.
    """

    T: float
    b: Tuple[float, ...]
    variant = "bcts"

    def __post_init__(self):
        if not (math.isfinite(self.T) and self.T > 0):
            raise InvalidSpec(f"temperature {self.T} must be finite and positive")
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))

    def apply(self, dataset, from_probs=True):
        z = scores(dataset, from_probs)
        if z.shape[1] != len(self.b):
            raise InvalidSpec(f"bias has {len(self.b)} entries but the dataset has k={z.shape[1]}")
        return dataset.with_probs(special.softmax(z / self.T + np.asarray(self.b), axis=1))

    def parameters(self):
        return {"T": encode_float(self.T), "b": [encode_float(v) for v in self.b]}

    @classmethod
    def from_parameters(cls, parameters):
        return cls(T=float(parameters["T"]), b=tuple(float(v) for v in parameters["b"]))


@dataclass(frozen=True)
class HistogramBinning(Calibrator):
    """
    Replaces each class probability by the empirical frequency of that class among
    the validation records in the same uniform bin. Binary problems bin the class 1
    probability only and output [1 - v, v]; otherwise every class is binned one
    versus rest and the result renormalized (a row of zeros becomes uniform).
    """

    edges: Tuple[Tuple[float, ...], ...]
    values: Tuple[Tuple[float, ...], ...]
    classes: Tuple[int, ...]
    variant = "hb"

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(tuple(float(e) for e in row) for row in self.edges))
        object.__setattr__(self, "values", tuple(tuple(float(v) for v in row) for row in self.values))
        object.__setattr__(self, "classes", tuple(int(c) for c in self.classes))

        if not (len(self.edges) == len(self.values) == len(self.classes)) or not self.classes:
            raise InvalidSpec("histogram binning needs edges and values for every binned class")

        for edges, values in zip(self.edges, self.values):
            if len(edges) != len(values) + 1 or edges[0] != 0.0 or edges[-1] != 1.0:
                raise InvalidSpec("bin edges must cover [0, 1] with one more edge than values")
            if any(a >= b for a, b in zip(edges, edges[1:])):
                raise InvalidSpec("bin edges must be strictly increasing")
            if any(not 0.0 <= v <= 1.0 for v in values):
                raise InvalidSpec("bin values must lie in [0, 1]")

    @property
    def n_bins(self) -> int:
        return len(self.values[0])

    @property
    def binary(self) -> bool:
        return self.classes == (1,)

    @property
    def stable(self) -> Tuple[Tuple[bool, ...], ...]:
        """
        Whether each bin value falls back into its own bin, in which case applying
        the calibrator a second time leaves that bin's outputs unchanged.
        """
        return tuple(
            tuple(
                int(_bin_index(np.array([v]), np.asarray(edges))[0]) == j
                for j, v in enumerate(values)
            )
            for edges, values in zip(self.edges, self.values)
        )

    def apply(self, dataset, from_probs=True):
        probs = np.asarray(dataset.probs)
        if self.binary:
            if dataset.k != 2:
                raise InvalidSpec(f"a binary histogram binning cannot be applied to k={dataset.k}")
            v = self._lookup(0, probs[:, 1])
            return dataset.with_probs(np.column_stack([1.0 - v, v]))

        if dataset.k != len(self.classes):
            raise InvalidSpec(f"histogram binning fitted for k={len(self.classes)}, not k={dataset.k}")

        binned = np.column_stack([self._lookup(i, probs[:, c]) for i, c in enumerate(self.classes)])
        sums = binned.sum(axis=1, keepdims=True)
        uniform = np.full_like(binned, 1.0 / binned.shape[1])
        calibrated = np.where(sums > 0, binned / np.where(sums > 0, sums, 1.0), uniform)
        return dataset.with_probs(calibrated)

    def _lookup(self, i: int, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.values[i])[_bin_index(x, np.asarray(self.edges[i]))]

    def parameters(self):
        return {
            "classes": list(self.classes),
            "edges": [[encode_float(e) for e in row] for row in self.edges],
            "values": [[encode_float(v) for v in row] for row in self.values],
        }

    @classmethod
    def from_parameters(cls, parameters):
        return cls(
            edges=tuple(tuple(float(e) for e in row) for row in parameters["edges"]),
            values=tuple(tuple(float(v) for v in row) for row in parameters["values"]),
            classes=tuple(int(c) for c in parameters["classes"]),
        )


def _bin_index(x: np.ndarray, edges: np.ndarray) -> np.ndarray:
    # a point on an inner edge goes to the higher bin; the top edge closes the last bin
    return np.clip(np.searchsorted(edges, x, side="right") - 1, 0, edges.shape[0] - 2)


def fit_temperature(val: Dataset, from_probs: bool = True) -> Tuple[TemperatureScaling, FitReport]:
    """
    Fit a temperature by golden-section search on log T over [-4, 4] minimizing the
    validation NLL of softmax(z / T). A minimum on the search boundary, or an
    optimum worse than T = 1, is reported as non-convergence.

    :raises DegenerateValidation: With fewer than two records or a single label.
    :raises MissingLogits: If the dataset has no logits and from_probs is false.
    """
    _check_validation(val)
    z = scores(val, from_probs)
    labels = val.labels

    def objective(log_t):
        return logit_nll(z / math.exp(log_t), labels)

    initial = objective(0.0)
    result = golden_section(objective, *LOG_TEMPERATURE_BOUNDS)
    log_t, final, converged = result["argmin"], result["minimum"], result["converged"]

    if log_t in LOG_TEMPERATURE_BOUNDS:
        logger.warning("temperature search stopped on the boundary log T = %s", log_t)
        converged = False

    if final > initial:
        logger.warning("temperature search did not improve on T = 1, keeping it")
        log_t, final, converged = 0.0, initial, False

    calibrator = TemperatureScaling(T=math.exp(log_t))
    logger.debug("fitted temperature %.6g, nll %.6g -> %.6g", calibrator.T, initial, final)
    return calibrator, FitReport(
        parameters=calibrator.parameters(),
        initial_nll=initial,
        final_nll=final,
        iterations=result["iterations"],
        converged=converged,
    )


def bcts_objective(params: np.ndarray, logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean NLL of softmax(z / T + b) and its analytic gradient with respect to the
    parameter vector [T, b_0, ..., b_{k-1}].
    """
    T, b = params[0], params[1:]
    s = logits / T + b
    n = labels.shape[0]
    rows = np.arange(n)

    loss = float(np.mean(special.logsumexp(s, axis=1) - s[rows, labels]))

    residual = special.softmax(s, axis=1)
    residual[rows, labels] -= 1.0

    grad = np.empty_like(params, dtype=float)
    grad[0] = -np.sum(residual * logits) / (n * T * T)
    grad[1:] = residual.mean(axis=0)
    return loss, grad


def fit_bcts(
    val: Dataset,
    from_probs: bool = True,
    fit_bias: bool = True,
    max_iterations: int = BCTS_MAX_ITERATIONS,
    tolerance: float = BCTS_GRADIENT_TOLERANCE,
) -> Tuple[BiasCorrectedTemperatureScaling, FitReport]:
    """
    Fit (T, b) by gradient descent on the validation NLL of softmax(z / T + b) from
    T = 1, b = 0. A step is only taken if it decreases the loss, otherwise the step
    size is halved; accepted steps double it. Stops when the gradient norm drops
    below tolerance or after max_iterations. The fitted b is shifted to mean zero.

    :param fit_bias: If false, b stays at zero and only T is fitted.
    :raises DegenerateValidation: With fewer than two records or a single label.
    """
    _check_validation(val)
    z = scores(val, from_probs)
    labels = val.labels

    params = np.zeros(z.shape[1] + 1)
    params[0] = 1.0
    mask = np.ones_like(params)
    if not fit_bias:
        mask[1:] = 0.0

    loss, grad = bcts_objective(params, z, labels)
    grad *= mask
    initial = loss
    step = 1.0
    converged = False

    iterations = 0
    while iterations < max_iterations:
        if np.linalg.norm(grad) < tolerance:
            converged = True
            break

        iterations += 1
        candidate = params - step * grad
        if candidate[0] > 0:
            candidate_loss, candidate_grad = bcts_objective(candidate, z, labels)
            if candidate_loss < loss:
                params, loss, grad = candidate, candidate_loss, candidate_grad * mask
                step *= 2.0
                continue

        step /= 2.0
        if step < 1e-300:
            logger.warning("bcts step size underflowed with gradient norm %.3g", np.linalg.norm(grad))
            break

    if not converged:
        logger.warning("bcts did not converge after %d iterations", iterations)

    b = params[1:] - params[1:].mean()
    calibrator = BiasCorrectedTemperatureScaling(T=float(params[0]), b=tuple(b))
    logger.debug("fitted bcts T=%.6g, nll %.6g -> %.6g", calibrator.T, initial, loss)
    return calibrator, FitReport(
        parameters=calibrator.parameters(),
        initial_nll=initial,
        final_nll=loss,
        iterations=iterations,
        converged=converged,
    )


def _fit_bins(val: Dataset, n_bins: int) -> HistogramBinning:
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    edges[-1] = 1.0
    midpoints = (edges[:-1] + edges[1:]) / 2

    classes = (1,) if val.k == 2 else tuple(range(val.k))
    values = []
    for c in classes:
        index = _bin_index(val.probs[:, c], edges)
        counts = np.bincount(index, minlength=n_bins)
        hits = np.bincount(index, weights=(val.labels == c).astype(float), minlength=n_bins)
        values.append(np.where(counts > 0, hits / np.maximum(counts, 1), midpoints))

    return HistogramBinning(
        edges=tuple(tuple(edges) for _ in classes),
        values=tuple(tuple(v) for v in values),
        classes=classes,
    )


def fit_histogram_binning(val: Dataset, n_bins: int = None) -> Tuple[HistogramBinning, FitReport]:
    """
    Fit histogram binning with n_bins uniform bins over [0, 1] per class. Empty bins
    keep their midpoint. Without n_bins, the count with the lowest validation NLL
    among DJCALIB_HB_BIN_CHOICES is used. NLLs are reported with probabilities
    clamped at DJCALIB_HB_NLL_CLAMP.

    :raises EmptySelection: If the validation set is empty.
    """
    if val.n == 0:
        raise EmptySelection("histogram binning needs validation records")
    if n_bins is not None and n_bins < 1:
        raise InvalidSpec("histogram binning needs at least one bin")

    clamp = settings.DJCALIB_HB_NLL_CLAMP
    candidates = [n_bins] if n_bins is not None else list(settings.DJCALIB_HB_BIN_CHOICES)

    best, best_nll = None, None
    for count in candidates:
        calibrator = _fit_bins(val, count)
        value = nll(calibrator.apply(val).probs, val.labels, clamp)
        logger.debug("histogram binning with %d bins: nll %.6g", count, value)
        if best_nll is None or value < best_nll:
            best, best_nll = calibrator, value

    initial = nll(val.probs, val.labels, clamp)
    # a fit that raises the validation nll is reported as not converged
    converged = best_nll <= initial + 1e-9
    if not converged:
        logger.warning("histogram binning increased the validation nll from %.6g to %.6g", initial, best_nll)

    return best, FitReport(
        parameters=best.parameters(),
        initial_nll=initial,
        final_nll=best_nll,
        iterations=len(candidates),
        converged=converged,
    )


def apply_calibrator(cal: Calibrator, dataset: Dataset, from_probs: bool = True) -> Dataset:
    """
    Apply a fitted calibrator; the result has the same labels and valid simplex
    outputs.

    :raises MissingLogits: If a temperature calibrator needs logits the dataset lacks
        and from_probs is false.
    """
    return cal.apply(dataset, from_probs=from_probs)


FITTERS: Dict[str, Callable[..., Tuple[Calibrator, FitReport]]] = {
    "ts": fit_temperature,
    "bcts": fit_bcts,
    "hb": fit_histogram_binning,
}
