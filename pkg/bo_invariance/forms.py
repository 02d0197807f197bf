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
The named multilinear forms in the Gaussians ``g_j``, ``0 < |j| <= N``,
indexed by the lattice sets ``A_N(n) = {(j_1, ..., j_n) : sum j_k = 0}``,
together with fast physical-space evaluators for them and the index sets
on which they cancel identically.
"""

from typing import Callable, Dict, Iterator, Optional, Tuple
import logging

import itertools

import numpy as np
from scipy import fft as sp_fft

from . import spectral, exceptions
from .gaussian import EnsembleSpec
from .wick import MultilinearForm, SumEstimate, Method, l2_norm_exact, l2_norm_mc

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

# the largest N for which forms of each degree are enumerated term by term
FORM_BUDGETS = {3: 128, 4: 64, 5: 24, 6: 16}

T_COEFFICIENT = Callable[..., np.ndarray]


def _psi(N: int, eps: float) -> Callable[[np.ndarray], np.ndarray]:
    cutoff = spectral.SmoothCutoff(eps)
    return lambda j: cutoff(np.asarray(j, dtype=float) / N)


def lambda_coeff(a, b, c, d, N: int, eps: float):
    """``psi(a) psi(b) psi(c) psi(d) [psi^2(a + c) - 1]``, arguments scaled by ``1/N``."""
    psi = _psi(N, eps)
    return psi(a) * psi(b) * psi(c) * psi(d) * (psi(a + c) ** 2 - 1)


def gamma_coeff(a, b, c, d, e, N: int, eps: float):
    """``psi(a) ... psi(e) [1 - psi^2(d + e)]``."""
    psi = _psi(N, eps)
    return psi(a) * psi(b) * psi(c) * psi(d) * psi(e) * (1 - psi(d + e) ** 2)


def delta_coeff(a, b, c, d, N: int, eps: float):
    """``psi(a) psi(b) psi(c) psi(d) [1 - psi^2(c + d)]``."""
    psi = _psi(N, eps)
    return psi(a) * psi(b) * psi(c) * psi(d) * (1 - psi(c + d) ** 2)


def sextic_coeff(a, b, c, d, e, f, N: int, eps: float):
    """``psi(a) ... psi(f) [1 - psi^2(e + f)]``."""
    psi = _psi(N, eps)
    return psi(a) * psi(b) * psi(c) * psi(d) * psi(e) * psi(f) * (1 - psi(e + f) ** 2)


def _abs(j) -> np.ndarray:
    return np.abs(np.asarray(j, dtype=float))


def _cubic_F(a, b, c, N, eps):
    psi = _psi(N, eps)
    return (psi(a) * psi(b) * psi(c) - 1) / (_abs(a) * _abs(b))


def _quartic_E1(a, b, c, d, N, eps):
    return lambda_coeff(a, b, c, d, N, eps) * np.sign(d) / (_abs(a) * _abs(b))


def _quintic_E1(a, b, c, d, e, N, eps):
    return (
        gamma_coeff(a, b, c, d, e, N, eps)
        * np.sign(e)
        / (_abs(a) * _abs(b) * _abs(c) * _abs(d))
    )


def _quartic_G_denominator(a, b, c, d):
    return _abs(a) ** 0.5 * _abs(b) ** 0.5 * _abs(c) ** 1.5 * _abs(d) ** 0.5


def _quartic_G_a(a, b, c, d, N, eps):
    return (
        delta_coeff(a, b, c, d, N, eps)
        * _abs(c + d)
        * np.sign(d)
        / (_abs(a) ** 1.5 * _abs(b) ** 0.5 * _abs(c) ** 1.5 * _abs(d) ** 0.5)
    )


def _quartic_G_b(a, b, c, d, N, eps):
    return (
        delta_coeff(a, b, c, d, N, eps)
        * np.sign(a)
        * np.sign(b)
        * np.sign(d)
        / _quartic_G_denominator(a, b, c, d)
    )


def _quartic_G_c(a, b, c, d, N, eps):
    return delta_coeff(a, b, c, d, N, eps) * np.sign(d) / _quartic_G_denominator(a, b, c, d)


def _quintic_G(a, b, c, d, e, N, eps):
    return (
        gamma_coeff(a, b, c, d, e, N, eps)
        * np.sign(e)
        / (_abs(a) ** 1.5 * _abs(b) ** 1.5 * _abs(c) ** 0.5 * _abs(d) ** 1.5 * _abs(e) ** 0.5)
    )


def _sextic_G(a, b, c, d, e, f, N, eps):
    return (
        sextic_coeff(a, b, c, d, e, f, N, eps)
        * np.sign(f)
        / ((_abs(a) * _abs(b) * _abs(c) * _abs(d) * _abs(e)) ** 1.5 * _abs(f) ** 0.5)
    )


class FieldBank:
    """
    Random fields ``F[w](x) = sum_{0 < |j| <= N} w(j) g_j e^{ijx}``
    for a batch of Gaussian rows, sampled on a complex grid that resolves
    products of ``degree`` such fields exactly.
    """

    def __init__(self, g: np.ndarray, N: int, eps: float, degree: int):
        g = np.atleast_2d(np.asarray(g, dtype=complex))
        if g.shape[1] < N:
            raise exceptions.InvalidParameters(f"need Gaussians up to {N}, got {g.shape[1]}")
        self.g = g[:, :N]
        self.N = N
        self.n_points = sp_fft.next_fast_len((degree + 1) * N + 1)
        self.j = np.arange(1, N + 1, dtype=float)
        self.psi = _psi(N, eps)
        self.k = np.rint(sp_fft.fftfreq(self.n_points) * self.n_points)

    def field(self, weight: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """``weight`` is evaluated at signed frequencies."""
        buf = np.zeros((len(self.g), self.n_points), dtype=complex)
        buf[:, 1 : self.N + 1] = weight(self.j) * self.g
        buf[:, self.n_points - self.N :] = (weight(-self.j) * np.conj(self.g))[:, ::-1]
        return sp_fft.ifft(buf, axis=-1) * self.n_points

    def multiply(self, samples: np.ndarray, symbol: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        c = sp_fft.fft(samples, axis=-1)
        return sp_fft.ifft(c * symbol(self.k), axis=-1)

    def mean(self, samples: np.ndarray) -> np.ndarray:
        return samples.mean(axis=-1)

    # the fields appearing in the named forms
    def X(self):
        return self.field(lambda j: self.psi(j) / np.abs(j))

    def Z(self):
        return self.field(lambda j: self.psi(j))

    def W(self):
        return self.field(lambda j: self.psi(j) * np.sign(j))

    def V(self):
        return self.field(lambda j: self.psi(j) * np.abs(j) ** -1.5)

    def T(self):
        return self.field(lambda j: self.psi(j) * np.abs(j) ** -0.5)

    def U(self):
        return self.field(lambda j: self.psi(j) * np.sign(j) * np.abs(j) ** -0.5)

    def outer(self, k: np.ndarray) -> np.ndarray:
        """``1 - psi^2(k / N)`` on signed frequencies."""
        return 1 - self.psi(k) ** 2


def _evaluate_cubic_F(g, N, eps):
    bank = FieldBank(g, N, eps, degree=3)
    X, Z = bank.X(), bank.Z()
    X0 = bank.field(lambda j: 1 / np.abs(j))
    Z0 = bank.field(lambda j: np.ones_like(j))
    return bank.mean(X * X * Z) - bank.mean(X0 * X0 * Z0)


def _evaluate_quartic_E1(g, N, eps):
    bank = FieldBank(g, N, eps, degree=4)
    X = bank.X()
    inner = bank.multiply(X * bank.Z(), lambda k: -bank.outer(k))
    return bank.mean(inner * X * bank.W())


def _evaluate_quintic_E1(g, N, eps):
    bank = FieldBank(g, N, eps, degree=5)
    X = bank.X()
    return bank.mean(X ** 3 * bank.multiply(X * bank.W(), bank.outer))


def _evaluate_quartic_G(which: str):
    def evaluate(g, N, eps):
        bank = FieldBank(g, N, eps, degree=4)
        V, T, U = bank.V(), bank.T(), bank.U()
        if which == "a":
            inner = bank.multiply(V * U, lambda k: bank.outer(k) * np.abs(k))
            return bank.mean(V * T * inner)
        inner = bank.multiply(V * U, bank.outer)
        if which == "b":
            return bank.mean(U * U * inner)
        return bank.mean(T * T * inner)

    return evaluate


def _evaluate_quintic_G(g, N, eps):
    bank = FieldBank(g, N, eps, degree=5)
    V = bank.V()
    return bank.mean(V * V * bank.T() * bank.multiply(V * bank.U(), bank.outer))


def _evaluate_sextic_G(g, N, eps):
    bank = FieldBank(g, N, eps, degree=6)
    V = bank.V()
    return bank.mean(V ** 4 * bank.multiply(V * bank.U(), bank.outer))


class FormDefinition:
    __slots__ = ("name", "degree", "coefficient", "evaluate", "description")

    def __init__(self, name: str, degree: int, coefficient: T_COEFFICIENT, evaluate, description: str):
        self.name = name
        self.degree = degree
        self.coefficient = coefficient
        self.evaluate = evaluate
        self.description = description

    def __repr__(self):
        return f"{self.__class__.__name__}({self.name}, degree = {self.degree})"

    def evaluator(self, N: int, eps: float):
        evaluate = self.evaluate
        return lambda g: evaluate(g, N, eps)


FORMS: Dict[str, FormDefinition] = {
    d.name: d
    for d in (
        FormDefinition(
            "cubic-F", 3, _cubic_F, _evaluate_cubic_F,
            "(psi(a) psi(b) psi(c) - 1) / (|a| |b|)",
        ),
        FormDefinition(
            "quartic-E1", 4, _quartic_E1, _evaluate_quartic_E1,
            "Lambda(a, b, c, d) sign(d) / (|a| |b|)",
        ),
        FormDefinition(
            "quintic-E1", 5, _quintic_E1, _evaluate_quintic_E1,
            "Gamma(a, b, c, d, e) sign(e) / (|a| |b| |c| |d|)",
        ),
        FormDefinition(
            "quartic-G-a", 4, _quartic_G_a, _evaluate_quartic_G("a"),
            "Delta(a, b, c, d) |c + d| sign(d) / (|a|^3/2 |b|^1/2 |c|^3/2 |d|^1/2)",
        ),
        FormDefinition(
            "quartic-G-b", 4, _quartic_G_b, _evaluate_quartic_G("b"),
            "Delta(a, b, c, d) sign(a) sign(b) sign(d) / (|a|^1/2 |b|^1/2 |c|^3/2 |d|^1/2)",
        ),
        FormDefinition(
            "quartic-G-c", 4, _quartic_G_c, _evaluate_quartic_G("c"),
            "Delta(a, b, c, d) sign(d) / (|a|^1/2 |b|^1/2 |c|^3/2 |d|^1/2)",
        ),
        FormDefinition(
            "quintic-G", 5, _quintic_G, _evaluate_quintic_G,
            "Gamma(a, b, c, d, e) sign(e) / (|a|^3/2 |b|^3/2 |c|^1/2 |d|^3/2 |e|^1/2)",
        ),
        FormDefinition(
            "sextic-G", 6, _sextic_G, _evaluate_sextic_G,
            "psi(a) ... psi(f) [1 - psi^2(e + f)] sign(f) / (|a ... e|^3/2 |f|^1/2)",
        ),
    )
}


def get_definition(name: str) -> FormDefinition:
    try:
        return FORMS[name]
    except KeyError:
        raise exceptions.UnknownForm(
            f"unknown form {name!r}; known forms are {', '.join(FORMS)}"
        )


def within_budget(degree: int, N: int) -> bool:
    return N <= FORM_BUDGETS.get(degree, 0)


def check_budget(degree: int, N: int) -> None:
    if not within_budget(degree, N):
        raise exceptions.BudgetExceeded(
            f"enumerating degree {degree} tuples at N = {N} exceeds the budget N <= {FORM_BUDGETS.get(degree)}"
        )


def _indices(N: int) -> np.ndarray:
    return np.concatenate([np.arange(-N, 0), np.arange(1, N + 1)])


def iter_tuple_chunks(n: int, N: int) -> Iterator[np.ndarray]:
    """
    Yield the tuples of ``A_N(n)`` in lexicographic order of their first ``n - 1`` entries,
    in chunks sharing a prefix.
    """
    if n < 2:
        raise exceptions.InvalidParameters(f"tuples have at least two entries, not {n}")
    I = _indices(N)
    n_free = n - 1
    n_inner = min(n_free, 3)
    grids = np.meshgrid(*([I] * n_inner), indexing="ij")
    inner = np.stack([g.ravel() for g in grids], axis=1)

    for prefix in itertools.product(I, repeat=n_free - n_inner):
        head = np.broadcast_to(np.array(prefix, dtype=np.int64), (len(inner), len(prefix)))
        free = np.concatenate([head, inner], axis=1)
        last = -free.sum(axis=1)
        keep = (last != 0) & (np.abs(last) <= N)
        yield np.concatenate([free[keep], last[keep, None]], axis=1).astype(np.int16)


def enumerate_tuples(n: int, N: int) -> np.ndarray:
    """Every tuple of ``A_N(n)``, one per row."""
    return np.concatenate(list(iter_tuple_chunks(n, N)))


def count_tuples(n: int, N: int) -> int:
    """``|A_N(n)|``, by convolving the indicator of ``0 < |j| <= N`` with itself."""
    indicator = np.ones(2 * N + 1, dtype=np.int64)
    indicator[N] = 0
    sums = np.array([1], dtype=np.int64)
    for _ in range(n - 1):
        sums = np.convolve(sums, indicator)
    # sums[k] counts (n - 1)-tuples with sum k - (n - 1) N
    offset = (n - 1) * N
    s = np.arange(len(sums)) - offset
    return int(sums[(s != 0) & (np.abs(s) <= N)].sum())


# note for testing: the cache is cleared before every test in tests/conftest.py
FORM_CACHE: Dict[Tuple[str, int, float], MultilinearForm] = {}


def clear_form_cache() -> None:
    FORM_CACHE.clear()


def build_form(name: str, N: int, eps: float) -> MultilinearForm:
    """
    The named form at ``(N, eps)``, enumerated term by term over ``A_N(n)``.
    Terms with zero coefficient are dropped.
    Results are cached.

    Raises
    ------
    :class:`exceptions.UnknownForm`
        If there is no form by that name.
    :class:`exceptions.BudgetExceeded`
        If ``N`` is too large to enumerate the form.
    """
    definition = get_definition(name)
    spectral.check_projection_parameters(N, eps)
    check_budget(definition.degree, N)

    key = (name, int(N), float(eps))
    try:
        return FORM_CACHE[key]
    except KeyError:
        pass

    tuples, coefficients = [], []
    for chunk in iter_tuple_chunks(definition.degree, N):
        c = definition.coefficient(*chunk.T, N, eps)
        keep = c != 0
        tuples.append(chunk[keep])
        coefficients.append(c[keep])

    n = definition.degree
    form = MultilinearForm(
        {n: (np.concatenate(tuples).reshape(-1, n), np.concatenate(coefficients))},
        name=name,
        N=N,
        evaluator=definition.evaluator(N, eps),
    )

    logger.debug(f"Built {form}")

    FORM_CACHE[key] = form
    return form


def evaluator_form(name: str, N: int, eps: float) -> MultilinearForm:
    """The named form with its evaluator but without enumerated terms, for sampling at any ``N``."""
    definition = get_definition(name)
    spectral.check_projection_parameters(N, eps)
    return MultilinearForm({}, name=name, N=N, evaluator=definition.evaluator(N, eps))


def energy_derivative_form(N: int, eps: float, enumerate_terms: bool = True) -> MultilinearForm:
    """
    ``i (-3/2 quartic-E1 + 1/2 quintic-E1)``, which equals the time derivative
    of the modified ``H^1`` energy at a ``mu_1`` draw with the same Gaussians.
    """
    get = build_form if enumerate_terms else evaluator_form
    return (1j * (-1.5 * get("quartic-E1", N, eps) + 0.5 * get("quintic-E1", N, eps))).renamed(
        "dE/dt"
    )


def quartic_G_block_form(N: int, eps: float, enumerate_terms: bool = True) -> MultilinearForm:
    """
    ``i (quartic-G-a - 3/2 quartic-G-b + 1/2 quartic-G-c)``, which equals the
    quartic block of the time derivative of the modified ``H^{3/2}`` energy at a
    ``mu_{3/2}`` draw with the same Gaussians.
    """
    get = build_form if enumerate_terms else evaluator_form
    return (
        1j
        * (
            get("quartic-G-a", N, eps)
            - 1.5 * get("quartic-G-b", N, eps)
            + 0.5 * get("quartic-G-c", N, eps)
        )
    ).renamed("dG/dt quartic")


def sextic_G_block_form(N: int, eps: float, enumerate_terms: bool = True) -> MultilinearForm:
    """``i/4 sextic-G``, the sextic block of the same derivative."""
    get = build_form if enumerate_terms else evaluator_form
    return (0.25j * get("sextic-G", N, eps)).renamed("dG/dt sextic")


def _flat(j, L) -> np.ndarray:
    return np.abs(j) <= L


CANCELLATION_SETS: Dict[str, Tuple[str, Callable[..., np.ndarray]]] = {
    "quartic-E1-bulk": (
        "quartic-E1",
        lambda a, b, c, d, L: _flat(a, L) & _flat(b, L) & _flat(c, L) & _flat(d, L),
    ),
    "quartic-E1-split": (
        "quartic-E1",
        lambda a, b, c, d, L: _flat(a, L) & _flat(b, L) & ~_flat(c, L) & ~_flat(d, L),
    ),
    "quartic-G-bulk": (
        "quartic-G-a",
        lambda a, b, c, d, L: _flat(a, L) & _flat(b, L) & _flat(c, L) & _flat(d, L),
    ),
    "quartic-G-split": (
        "quartic-G-a",
        lambda a, b, c, d, L: _flat(a, L) & _flat(c, L) & ~(_flat(b, L) & _flat(d, L)),
    ),
}


def restricted_form(set_name: str, N: int, eps: float) -> MultilinearForm:
    """The form of a cancellation set, keeping only the terms whose tuple lies in the set."""
    try:
        form_name, predicate = CANCELLATION_SETS[set_name]
    except KeyError:
        raise exceptions.UnknownForm(
            f"unknown cancellation set {set_name!r}; known sets are {', '.join(CANCELLATION_SETS)}"
        )

    form = build_form(form_name, N, eps)
    L = N * (1 - eps)
    blocks = {}
    for degree, (tuples, coefficients) in form.blocks.items():
        keep = predicate(*tuples.T, L)
        blocks[degree] = (tuples[keep], coefficients[keep])

    return MultilinearForm(blocks, name=f"{form_name} on {set_name}", N=N)


def cancellation_check(set_name: str, N: int, eps: float) -> float:
    """
    Merge the terms of the restricted form into distinct monomials
    and return the largest merged coefficient in absolute value
    (``0.0`` if the set holds no terms). The sets cancel, so this is round-off.
    """
    mono = restricted_form(set_name, N, eps).collapsed()
    residual = float(np.max(np.abs(mono.coefficients), initial=0.0))

    logger.debug(f"cancellation residual of {set_name} at N = {N}, eps = {eps}: {residual:.3g}")

    return residual


def estimate_form_norm(
    name: str,
    N: int,
    eps: float,
    spec: Optional[EnsembleSpec] = None,
    exact: Optional[bool] = None,
) -> SumEstimate:
    """
    The ``L^2`` norm of a named form: exact when ``N`` is within the enumeration
    budget, otherwise sampled over ``spec``.

    Parameters
    ----------
    exact
        Force (``True``) or forbid (``False``) the exact route.
        If ``None``, the budget decides.
    """
    definition = get_definition(name)
    if exact is None:
        exact = within_budget(definition.degree, N)

    if exact:
        estimate = l2_norm_exact(build_form(name, N, eps))
    else:
        if spec is None:
            raise exceptions.InvalidParameters(
                f"{name} at N = {N} needs an ensemble for the Monte Carlo route"
            )
        estimate = l2_norm_mc(evaluator_form(name, N, eps), spec)
        logger.info(f"{name} at N = {N} is beyond the enumeration budget; sampled {spec.count} draws")

    estimate.eps = eps
    return estimate
