# Copyright 2019 bo-invariance Developers
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Constrained lattice sums over ``0 < |j| <= N`` and the envelope fits used to
compare measured decays against rates in ``N`` and ``eps``.
"""

from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union
import logging

import numpy as np
from scipy import optimize

from . import spectral, utils, exceptions

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

MAX_SUM_ARITY = 3
MIN_FIT_POINTS = 4
DEFAULT_FIT_TOLERANCE = 0.2

T_PARAMETER = Union[float, Tuple[int, float]]


def _indices(N: int) -> np.ndarray:
    return np.concatenate([np.arange(-N, 0), np.arange(1, N + 1)])


def constrained_sum(
    weight: Callable[..., np.ndarray],
    predicate: Optional[Callable[..., np.ndarray]],
    N: int,
    arity: int = 2,
) -> float:
    """
    ``sum weight(j_1, ..., j_k)`` over ``0 < |j_i| <= N`` where ``predicate`` holds.

    Parameters
    ----------
    weight
        A vectorized function of ``arity`` integer arrays.
    predicate
        A vectorized boolean function of the same arrays; ``None`` keeps every tuple.
    N
        The frequency bound.
    arity
        The number of free indices, at most three.
    """
    if not 1 <= arity <= MAX_SUM_ARITY:
        raise exceptions.InvalidParameters(
            f"constrained sums take 1 to {MAX_SUM_ARITY} free indices, not {arity}"
        )
    if N < 1:
        raise exceptions.InvalidParameters(f"N must be at least 1, not {N}")

    grids = np.meshgrid(*([_indices(N)] * arity), indexing="ij")
    columns = [g.ravel() for g in grids]
    keep = np.ones(len(columns[0]), dtype=bool) if predicate is None else predicate(*columns)
    if not np.any(keep):
        return 0.0
    return float(np.sum(weight(*(c[keep] for c in columns))))


def _psi(N: int, eps: float):
    cutoff = spectral.SmoothCutoff(eps)
    return lambda j: cutoff(np.asarray(j, dtype=float) / N)


def density_cubic_sum(N: int, eps: float) -> float:
    """``sum_{j + k + l = 0} |1 - psi(j) psi(k) psi(l)|^2 / (j^2 k^2)``, all indices in ``0 < |.| <= N``."""
    psi = _psi(N, eps)
    return constrained_sum(
        lambda j, k: np.abs(1 - psi(j) * psi(k) * psi(-j - k)) ** 2 / (j.astype(float) ** 2 * k ** 2),
        lambda j, k: (j + k != 0) & (np.abs(j + k) <= N),
        N,
        arity=2,
    )


def edge_quadratic_sum(N: int, eps: float) -> float:
    """``sum_{N(1 - eps) < |a| < N} 1 / a^2``."""
    L = N * (1 - eps)
    return constrained_sum(
        lambda a: 1 / a.astype(float) ** 2,
        lambda a: (np.abs(a) > L) & (np.abs(a) < N),
        N,
        arity=1,
    )


def log_tail_sum(N: int, eps: float) -> float:
    """``sum_{|a + b| > N(1 - eps)} 1 / (|a| |b|^2)``."""
    L = N * (1 - eps)
    return constrained_sum(
        lambda a, b: 1 / (np.abs(a).astype(float) * b.astype(float) ** 2),
        lambda a, b: np.abs(a + b) > L,
        N,
        arity=2,
    )


NAMED_SUMS: Dict[str, Callable[[int, float], float]] = {
    "density-cubic": density_cubic_sum,
    "edge-quadratic": edge_quadratic_sum,
    "log-tail": log_tail_sum,
}


def named_sum(name: str, N: int, eps: float) -> float:
    try:
        s = NAMED_SUMS[name]
    except KeyError:
        raise exceptions.UnknownForm(
            f"unknown sum {name!r}; known sums are {', '.join(NAMED_SUMS)}"
        )
    spectral.check_projection_parameters(N, eps)
    return s(N, eps)


class RateModel:
    """A decay rate as a function of one of ``N`` or ``eps``."""

    __slots__ = ("name", "variable", "rate")

    def __init__(self, name: str, variable: str, rate: Callable[[np.ndarray], np.ndarray]):
        self.name = name
        self.variable = variable
        self.rate = rate

    def __repr__(self):
        return f"{self.__class__.__name__}({self.name})"

    def __call__(self, parameters: Sequence[T_PARAMETER]) -> np.ndarray:
        x = np.array([_pick(p, self.variable) for p in parameters], dtype=float)
        return self.rate(x)


def _pick(parameter: T_PARAMETER, variable: str) -> float:
    if isinstance(parameter, (tuple, list)):
        N, eps = parameter
        return N if variable == "N" else eps
    return parameter


RATE_MODELS: Dict[str, RateModel] = {
    m.name: m
    for m in (
        RateModel("sqrt-eps", "eps", np.sqrt),
        RateModel("eps", "eps", lambda eps: eps),
        RateModel("lnN-over-sqrtN", "N", lambda N: np.log(N) / np.sqrt(N)),
        RateModel("ln3N-over-sqrtN", "N", lambda N: np.log(N) ** 3 / np.sqrt(N)),
        RateModel("sqrt-lnN-over-N", "N", lambda N: np.sqrt(np.log(N) / N)),
        RateModel("inverse-sqrtN", "N", lambda N: 1 / np.sqrt(N)),
        RateModel("inverse-N", "N", lambda N: 1 / N),
    )
}


class DecayFit(utils.SlotPickleMixin):
    """
    A fit of ``value ~ sum_k C_k model_k(parameter)`` with non-negative ``C_k``.

    ``envelope`` is the smallest factor ``k`` with ``value <= k * fit`` at every point,
    and ``envelope * constant * model`` bounds the data of a single-model fit;
    ``success`` requires enough points and relative residuals below ``tolerance``.
    """

    __slots__ = ("models", "constants", "envelope", "residuals", "tolerance", "success", "message")

    def __init__(
        self,
        models: List[str],
        constants: List[float],
        envelope: float,
        residuals: List[float],
        tolerance: float,
        success: bool,
        message: str = "",
    ):
        self.models = list(models)
        self.constants = [float(c) for c in constants]
        self.envelope = float(envelope)
        self.residuals = [float(r) for r in residuals]
        self.tolerance = float(tolerance)
        self.success = bool(success)
        self.message = message

    def __repr__(self):
        terms = " + ".join(f"{c:.4g} {m}" for c, m in zip(self.constants, self.models))
        return f"{self.__class__.__name__}({terms}, envelope = {self.envelope:.4g}, success = {self.success})"

    @property
    def constant(self) -> float:
        return self.constants[0]

    @property
    def max_residual(self) -> float:
        return max((abs(r) for r in self.residuals), default=float("nan"))

    def to_json(self) -> dict:
        return {
            "models": self.models,
            "constants": self.constants,
            "envelope": self.envelope,
            "residuals": self.residuals,
            "tolerance": self.tolerance,
            "success": self.success,
            "message": self.message,
        }

    @classmethod
    def from_json(cls, json: dict) -> "DecayFit":
        return cls(**json)


def _failed(models: List[str], tolerance: float, message: str) -> DecayFit:
    logger.debug(f"decay fit against {models} failed: {message}")
    return DecayFit(
        models, [float("nan")] * len(models), float("nan"), [], tolerance, False, message
    )


def decay_fit(
    values: Sequence[Tuple[T_PARAMETER, float]],
    model: Union[str, Sequence[str]],
    tolerance: float = DEFAULT_FIT_TOLERANCE,
) -> DecayFit:
    """
    Fit measured values against one rate model by least squares,
    or against several at once by non-negative least squares.

    Parameters
    ----------
    values
        ``(parameter, value)`` pairs.
        A parameter is ``N``, ``eps``, or an ``(N, eps)`` tuple.
    model
        The name of a rate model, or a list of names.
    tolerance
        The largest relative residual for the fit to count as a success.

    Returns
    -------
    fit : :class:`DecayFit`
        Degenerate data produce a fit with ``success = False``, never an exception.
    """
    models = [model] if isinstance(model, str) else list(model)
    for m in models:
        if m not in RATE_MODELS:
            raise exceptions.UnknownForm(
                f"unknown rate model {m!r}; known models are {', '.join(RATE_MODELS)}"
            )

    if len(values) < MIN_FIT_POINTS:
        return _failed(models, tolerance, f"need at least {MIN_FIT_POINTS} points, got {len(values)}")

    parameters = [p for p, _ in values]
    y = np.array([v for _, v in values], dtype=float)
    design = np.stack([RATE_MODELS[m](parameters) for m in models], axis=1)

    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(design))):
        return _failed(models, tolerance, "non-finite data")
    if np.any(y <= 0) or np.any(design <= 0):
        return _failed(models, tolerance, "values and rates must be positive")

    # relative least squares, so that every point counts equally
    A = design / y[:, None]
    b = np.ones_like(y)
    if len(models) == 1:
        constants = np.linalg.lstsq(A, b, rcond=None)[0]
    else:
        constants, _ = optimize.nnls(A, b)

    fitted = design @ constants
    if not np.all(fitted > 0):
        return _failed(models, tolerance, "fit vanishes at some point")

    residuals = (y - fitted) / y
    envelope = float(np.max(y / fitted))
    success = bool(np.max(np.abs(residuals)) < tolerance)

    fit = DecayFit(
        models,
        list(constants),
        envelope,
        list(residuals),
        tolerance,
        success,
        "" if success else f"largest relative residual {np.max(np.abs(residuals)):.3g} exceeds {tolerance}",
    )

    logger.debug(f"decay fit: {fit}")

    return fit


class SlopeFit(utils.SlotPickleMixin):
    """A straight-line fit of ``log y`` against ``log x``."""

    __slots__ = ("slope", "intercept", "residuals", "monotone", "success", "message")

    def __init__(self, slope, intercept, residuals, monotone, success, message=""):
        self.slope = float(slope)
        self.intercept = float(intercept)
        self.residuals = [float(r) for r in residuals]
        self.monotone = bool(monotone)
        self.success = bool(success)
        self.message = message

    def __repr__(self):
        return f"{self.__class__.__name__}(slope = {self.slope:.4g}, monotone = {self.monotone}, success = {self.success})"

    @property
    def rate(self) -> float:
        """The decay exponent ``-slope``."""
        return -self.slope

    def to_json(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "residuals": self.residuals,
            "monotone": self.monotone,
            "success": self.success,
            "message": self.message,
        }

    @classmethod
    def from_json(cls, json: dict) -> "SlopeFit":
        return cls(**json)


def slope_fit(x: Sequence[float], y: Sequence[float], require_decreasing: bool = True) -> SlopeFit:
    """
    Fit ``log y = slope * log x + intercept``.

    With ``require_decreasing``, the fit only succeeds if ``y`` strictly decreases
    along increasing ``x`` and the slope is negative.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        return SlopeFit(float("nan"), float("nan"), [], False, False, "need two or more positive points")

    order = np.argsort(x)
    x, y = x[order], y[order]
    monotone = bool(np.all(np.diff(y) < 0))

    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    residuals = np.log(y) - (slope * np.log(x) + intercept)

    success = True
    message = ""
    if require_decreasing and not monotone:
        success, message = False, "values do not decrease monotonically"
    elif require_decreasing and not slope < 0:
        success, message = False, f"slope {slope:.3g} is not negative"

    return SlopeFit(slope, intercept, residuals, monotone, success, message)


def sum_table(name: str, points: Sequence[Tuple[int, float]]) -> List[Dict[str, float]]:
    """Evaluate a named sum at each ``(N, eps)``."""
    return [{"N": N, "eps": eps, "value": named_sum(name, N, eps)} for N, eps in points]

