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
Moments of products of independent standard complex Gaussians ``g_m``
(with ``g_{-m} = conj(g_m)``), multilinear forms in them,
and their exact and sampled ``L^2`` norms.
"""

from typing import Callable, Dict, Iterable, Iterator, Mapping, Optional, Sequence, Tuple, Union
import logging

import csv
import math
from pathlib import Path

import numpy as np
from scipy import special

from . import utils, exceptions
from .gaussian import EnsembleSpec

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

T_TUPLE = Tuple[int, ...]
T_EVALUATOR = Callable[[np.ndarray], np.ndarray]

DEFAULT_BATCHES = 20
MC_CHUNK = 4096
_PAIR_BLOCK = 2_000_000


def wick_moment(p: int, q: int) -> float:
    """``E[g^p conj(g)^q]`` for a standard complex Gaussian: ``p!`` if ``p == q``, else ``0``."""
    if p < 0 or q < 0:
        raise exceptions.InvalidParameters(f"exponents must be non-negative, not ({p}, {q})")
    return float(math.factorial(p)) if p == q else 0.0


class NetExponentVector(utils.SlotPickleMixin):
    """
    The exponents ``(p_m, q_m)`` of ``g_m`` and ``conj(g_m)`` in the monomial
    ``g_{j_1} ... g_{j_n}``, after folding negative indices onto conjugates.
    """

    __slots__ = ("exponents",)

    def __init__(self, exponents: Mapping[int, Tuple[int, int]]):
        self.exponents = {
            int(m): (int(p), int(q)) for m, (p, q) in sorted(exponents.items()) if p or q
        }

    @classmethod
    def from_tuple(cls, entries: Iterable[int]) -> "NetExponentVector":
        exponents: Dict[int, Tuple[int, int]] = {}
        for j in entries:
            if j == 0:
                raise exceptions.InvalidParameters("frequency tuples cannot contain 0")
            p, q = exponents.get(abs(j), (0, 0))
            exponents[abs(j)] = (p + 1, q) if j > 0 else (p, q + 1)
        return cls(exponents)

    @property
    def degree(self) -> int:
        return sum(p + q for p, q in self.exponents.values())

    @property
    def net(self) -> Dict[int, int]:
        """``p_m - q_m``, for the modes where it is nonzero."""
        return {m: p - q for m, (p, q) in self.exponents.items() if p != q}

    @property
    def paired(self) -> Dict[int, int]:
        """``min(p_m, q_m)``, the number of ``|g_m|^2`` factors."""
        return {m: min(p, q) for m, (p, q) in self.exponents.items() if min(p, q) > 0}

    def __eq__(self, other):
        return isinstance(other, self.__class__) and self.exponents == other.exponents

    def __hash__(self):
        return hash(tuple(self.exponents.items()))

    def __repr__(self):
        return f"{self.__class__.__name__}({self.exponents})"


def expect_pair(t: Iterable[int], t_prime: Iterable[int]) -> float:
    """
    ``E[T conj(T')]`` for the monomials ``T = prod g_{t_k}`` and ``T' = prod g_{t'_k}``.

    It vanishes unless both have the same net exponent ``p_m - q_m`` at every mode,
    and is then ``prod_m (|p_m - q_m| + r_m + r'_m)!``
    with ``r_m = min(p_m, q_m)``.
    """
    a = NetExponentVector.from_tuple(t)
    b = NetExponentVector.from_tuple(t_prime)
    net = a.net
    if net != b.net:
        return 0.0

    ra, rb = a.paired, b.paired
    value = 1.0
    for m in set(net) | set(ra) | set(rb):
        value *= math.factorial(abs(net.get(m, 0)) + ra.get(m, 0) + rb.get(m, 0))
    return value


def _as_block(tuples, coefficients, degree: int) -> Tuple[np.ndarray, np.ndarray]:
    c = np.asarray(coefficients, dtype=complex).ravel()
    if degree == 0:
        t = np.zeros((len(c), 0), dtype=np.int16)
    else:
        t = np.asarray(tuples).astype(np.int16).reshape(-1, degree)
    if len(t) != len(c):
        raise exceptions.InvalidParameters(
            f"{len(t)} tuples do not match {len(c)} coefficients"
        )
    if not np.all(np.isfinite(c)):
        raise exceptions.InvalidParameters("form coefficients must be finite")
    if np.any(t == 0):
        raise exceptions.InvalidParameters("frequency tuples cannot contain 0")
    return t, c


class Monomials(utils.SlotPickleMixin):
    """Distinct monomials as exponent matrices over modes ``1 .. N``, with merged coefficients."""

    __slots__ = ("p", "q", "coefficients")

    def __init__(self, p: np.ndarray, q: np.ndarray, coefficients: np.ndarray):
        self.p = p
        self.q = q
        self.coefficients = coefficients

    def __len__(self):
        return len(self.coefficients)

    @property
    def net(self) -> np.ndarray:
        return self.p - self.q

    @property
    def paired(self) -> np.ndarray:
        return np.minimum(self.p, self.q)


def _exponents(tuples: np.ndarray, N: int) -> Tuple[np.ndarray, np.ndarray]:
    k = len(tuples)
    p = np.zeros((k, N), dtype=np.int64)
    q = np.zeros((k, N), dtype=np.int64)
    rows = np.arange(k)
    for col in range(tuples.shape[1]):
        j = tuples[:, col]
        pos = j > 0
        np.add.at(p, (rows[pos], j[pos] - 1), 1)
        np.add.at(q, (rows[~pos], -j[~pos] - 1), 1)
    return p, q


def _merge(keys: np.ndarray, coefficients: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    unique, inverse = np.unique(keys, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    merged = np.bincount(inverse, weights=coefficients.real, minlength=len(unique)) + 1j * np.bincount(
        inverse, weights=coefficients.imag, minlength=len(unique)
    )
    return unique, merged


class MultilinearForm(utils.SlotPickleMixin):
    """
    The random variable ``X = sum_t c_t g_{t_1} ... g_{t_n}``, stored as one block
    of frequency tuples and coefficients per degree ``n``.
    Degree ``0`` holds constants.

    A form may carry an ``evaluator``: a fast function of a ``(samples, N)``
    array of Gaussians ``g_1 .. g_N`` that returns the value of ``X`` per sample.
    Forms built from the same Gaussians can be added and scaled; the sum of
    two forms with evaluators has one as well.
    """

    __slots__ = ("name", "N", "blocks", "evaluator")

    def __init__(
        self,
        blocks: Mapping[int, Tuple[np.ndarray, np.ndarray]],
        name: str = "form",
        N: Optional[int] = None,
        evaluator: Optional[T_EVALUATOR] = None,
    ):
        self.blocks = {}
        for degree, (tuples, coefficients) in sorted(blocks.items()):
            t, c = _as_block(tuples, coefficients, degree)
            if len(c) > 0:
                self.blocks[int(degree)] = (t, c)

        top = max(
            (int(np.max(np.abs(t))) for d, (t, _) in self.blocks.items() if d > 0 and len(t) > 0),
            default=0,
        )
        if N is None:
            N = top
        if N < top:
            raise exceptions.InvalidParameters(f"form uses frequency {top} > N = {N}")

        self.name = name
        self.N = int(N)
        self.evaluator = evaluator

    @classmethod
    def from_terms(
        cls,
        terms: Iterable[Tuple[Sequence[int], complex]],
        name: str = "form",
        N: Optional[int] = None,
    ) -> "MultilinearForm":
        by_degree: Dict[int, Tuple[list, list]] = {}
        for t, c in terms:
            tuples, coefficients = by_degree.setdefault(len(t), ([], []))
            tuples.append(tuple(t))
            coefficients.append(c)
        return cls(by_degree, name=name, N=N)

    @classmethod
    def constant(cls, value: complex, name: str = "constant", N: int = 0) -> "MultilinearForm":
        return cls(
            {0: (np.zeros((1, 0), dtype=np.int16), [value])},
            name=name,
            N=N,
            evaluator=lambda g: np.full(len(g), complex(value)),
        )

    @classmethod
    def empty(cls, name: str = "form", N: int = 0) -> "MultilinearForm":
        return cls({}, name=name, N=N, evaluator=lambda g: np.zeros(len(g), dtype=complex))

    def __repr__(self):
        degrees = ", ".join(f"{d}: {len(c)}" for d, (_, c) in self.blocks.items())
        return f"{self.__class__.__name__}({self.name}, N = {self.N}, terms by degree = {{{degrees}}})"

    @property
    def degrees(self) -> Tuple[int, ...]:
        return tuple(self.blocks)

    @property
    def n_terms(self) -> int:
        return sum(len(c) for _, c in self.blocks.values())

    def __len__(self):
        return self.n_terms

    def is_empty(self) -> bool:
        return self.n_terms == 0

    def terms(self) -> Iterator[Tuple[T_TUPLE, complex]]:
        for tuples, coefficients in self.blocks.values():
            for t, c in zip(tuples, coefficients):
                yield tuple(int(j) for j in t), complex(c)

    def with_evaluator(self, evaluator: Optional[T_EVALUATOR]) -> "MultilinearForm":
        return self.__class__(self.blocks, name=self.name, N=self.N, evaluator=evaluator)

    def renamed(self, name: str) -> "MultilinearForm":
        return self.__class__(self.blocks, name=name, N=self.N, evaluator=self.evaluator)

    def __add__(self, other):
        if not isinstance(other, MultilinearForm):
            return NotImplemented
        blocks = dict(self.blocks)
        for degree, (t, c) in other.blocks.items():
            if degree in blocks:
                t0, c0 = blocks[degree]
                blocks[degree] = (np.concatenate([t0, t]), np.concatenate([c0, c]))
            else:
                blocks[degree] = (t, c)

        evaluator = None
        if self.evaluator is not None and other.evaluator is not None:
            first, second = self.evaluator, other.evaluator
            evaluator = lambda g: first(g) + second(g)

        return self.__class__(
            blocks,
            name=f"{self.name} + {other.name}",
            N=max(self.N, other.N),
            evaluator=evaluator,
        )

    def __mul__(self, scalar: complex):
        if not np.isscalar(scalar):
            return NotImplemented
        scalar = complex(scalar)
        evaluator = None
        if self.evaluator is not None:
            inner = self.evaluator
            evaluator = lambda g: scalar * inner(g)
        return self.__class__(
            {d: (t, scalar * c) for d, (t, c) in self.blocks.items()},
            name=f"{scalar:g} * {self.name}",
            N=self.N,
            evaluator=evaluator,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        if not isinstance(other, MultilinearForm):
            return NotImplemented
        return self + (-other)

    def evaluate_terms(self, g: np.ndarray) -> np.ndarray:
        """Evaluate ``X`` term by term on rows of Gaussians ``g_1 .. g_M``, ``M >= N``."""
        g = np.atleast_2d(np.asarray(g, dtype=complex))
        if g.shape[1] < self.N:
            raise exceptions.InvalidParameters(
                f"need Gaussians up to {self.N}, got {g.shape[1]}"
            )
        out = np.zeros(len(g), dtype=complex)
        for degree, (tuples, coefficients) in self.blocks.items():
            if degree == 0:
                out += coefficients.sum()
                continue
            step = max(1, _PAIR_BLOCK // max(len(g), 1))
            for start in range(0, len(tuples), step):
                t = tuples[start : start + step]
                values = np.ones((len(g), len(t)), dtype=complex)
                for col in range(degree):
                    j = t[:, col]
                    factor = g[:, np.abs(j) - 1]
                    values *= np.where(j > 0, factor, np.conj(factor))
                out += values @ coefficients[start : start + step]
        return out

    def evaluate(self, g: np.ndarray) -> np.ndarray:
        """Evaluate ``X`` per row of Gaussians, through the evaluator when there is one."""
        if self.evaluator is not None:
            return np.asarray(self.evaluator(np.atleast_2d(g)), dtype=complex)
        return self.evaluate_terms(g)

    def collapsed(self) -> Monomials:
        """
        Merge terms whose monomials coincide, e.g. ``g_1 g_2`` and ``g_2 g_1``.
        Monomials of different degree never coincide.
        """
        N = max(self.N, 1)
        ps, qs, cs = [], [], []
        for degree, (tuples, coefficients) in self.blocks.items():
            if degree == 0:
                ps.append(np.zeros((1, N), dtype=np.int64))
                qs.append(np.zeros((1, N), dtype=np.int64))
                cs.append(np.array([coefficients.sum()]))
                continue
            keys, merged = _merge(np.sort(tuples, axis=1), coefficients)
            p, q = _exponents(keys, N)
            ps.append(p)
            qs.append(q)
            cs.append(merged)

        if not cs:
            empty = np.zeros((0, N), dtype=np.int64)
            return Monomials(empty, empty.copy(), np.zeros(0, dtype=complex))

        return Monomials(np.concatenate(ps), np.concatenate(qs), np.concatenate(cs))

    def to_rows(self) -> Iterator[Tuple[str, float, float]]:
        """``(tuple, real part, imaginary part)`` per term, tuples written as space-separated integers."""
        for t, c in self.terms():
            yield " ".join(str(j) for j in t), c.real, c.imag

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f, quoting=csv.QUOTE_MINIMAL)
            writer.writerow(["tuple", "coefficient_real", "coefficient_imag"])
            writer.writerows(self.to_rows())
        logger.info(f"Wrote {self.n_terms} terms of {self.name} to {path}")
        return path


class Method(utils.StrEnum):
    EXACT = "exact"
    MONTE_CARLO = "monte-carlo"


class SumEstimate(utils.SlotPickleMixin):
    """
    A norm or sum, computed exactly or estimated by Monte Carlo.
    Monte Carlo estimates carry a batch-means standard error.
    """

    __slots__ = ("value", "method", "standard_error", "samples", "N", "eps", "label")

    def __init__(
        self,
        value: float,
        method: Method = Method.EXACT,
        standard_error: float = 0.0,
        samples: Optional[int] = None,
        N: Optional[int] = None,
        eps: Optional[float] = None,
        label: Optional[str] = None,
    ):
        self.value = float(value)
        self.method = Method(method)
        self.standard_error = float(standard_error)
        self.samples = samples
        self.N = N
        self.eps = eps
        self.label = label

    @classmethod
    def from_squares(
        cls, squares: np.ndarray, n_batches: int = DEFAULT_BATCHES, **tags
    ) -> "SumEstimate":
        """
        The root mean square ``sqrt(E X^2)`` from samples of ``|X|^2``,
        with the standard error of the mean propagated through the square root.
        """
        mean, se = batch_means(squares, n_batches)
        value = np.sqrt(max(mean, 0.0))
        se_value = se / (2 * value) if value > 0 else 0.0
        return cls(value, Method.MONTE_CARLO, se_value, samples=len(squares), **tags)

    def __repr__(self):
        se = f" +/- {self.standard_error:.3g}" if self.method is Method.MONTE_CARLO else ""
        return f"{self.__class__.__name__}({self.label or ''} {self.value:.6g}{se}, {self.method}, N = {self.N}, eps = {self.eps})"

    def agrees_with(self, other: "SumEstimate", n_se: float = 3) -> bool:
        """Whether two estimates differ by at most ``n_se`` combined standard errors."""
        band = n_se * np.hypot(self.standard_error, other.standard_error)
        scale = max(abs(self.value), abs(other.value), 1.0)
        return abs(self.value - other.value) <= max(band, 1e-12 * scale)

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "method": str(self.method.value),
            "standard_error": self.standard_error,
            "samples": self.samples,
            "N": self.N,
            "eps": self.eps,
            "label": self.label,
        }

    @classmethod
    def from_json(cls, json: dict) -> "SumEstimate":
        return cls(**json)


def batch_means(values: np.ndarray, n_batches: int = DEFAULT_BATCHES) -> Tuple[float, float]:
    """The sample mean and its batch-means standard error, batches taken in sample order."""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        raise exceptions.InvalidParameters("need at least two samples for a standard error")
    n_batches = min(n_batches, len(values))
    means = np.array([b.mean() for b in np.array_split(values, n_batches)])
    return float(values.mean()), float(means.std(ddof=1) / np.sqrt(n_batches))


def _log_factorials(top: int) -> np.ndarray:
    return special.gammaln(np.arange(top + 1) + 1)


def _gram_energy(
    coefficients: np.ndarray,
    abs_net: np.ndarray,
    paired: np.ndarray,
    log_factorial: np.ndarray,
    same_net: Optional[np.ndarray] = None,
) -> float:
    """
    ``sum_{i,k} c_i conj(c_k) prod_m (|net_m| + r_im + r_km)!`` over all pairs,
    or only over pairs flagged by ``same_net``.
    """
    total = 0.0
    k, M = paired.shape
    step = max(1, _PAIR_BLOCK // max(k * max(M, 1), 1))
    for start in range(0, k, step):
        stop = min(start + step, k)
        if abs_net.ndim == 1:
            base = abs_net[None, None, :]
        else:
            base = abs_net[start:stop, None, :]
        index = base + paired[start:stop, None, :] + paired[None, :, :]
        gram = np.exp(log_factorial[index].sum(axis=-1))
        if same_net is not None:
            gram = gram * same_net(start, stop)
        total += float(
            np.sum(coefficients[start:stop, None] * np.conj(coefficients[None, :]) * gram).real
        )
    return total


def l2_norm_exact(form: MultilinearForm) -> SumEstimate:
    """
    ``(E|X|^2)^{1/2}`` by Wick's rule.

    Terms are merged into distinct monomials, then grouped by their net exponent
    vector; monomials in different groups are orthogonal, so only in-group
    pairs are summed.
    """
    mono = form.collapsed()
    if len(mono) == 0:
        return SumEstimate(0.0, Method.EXACT, N=form.N, label=form.name)

    net = mono.net
    paired = mono.paired
    c = mono.coefficients
    log_factorial = _log_factorials(int(np.max(np.abs(net), initial=0) + 2 * np.max(paired, initial=0)))

    _, inverse, counts = np.unique(net, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    order = np.argsort(inverse, kind="stable")
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])

    single = counts[inverse] == 1
    energy = float(
        np.sum(
            np.abs(c[single]) ** 2
            * np.exp(log_factorial[np.abs(net[single]) + 2 * paired[single]].sum(axis=-1))
        )
    )

    for start, count in zip(starts, counts):
        if count == 1:
            continue
        members = order[start : start + count]
        abs_net = np.abs(net[members[0]])
        active = (abs_net > 0) | np.any(paired[members] > 0, axis=0)
        energy += _gram_energy(
            c[members], abs_net[active], paired[members][:, active], log_factorial
        )

    logger.debug(
        f"exact norm of {form.name}: {form.n_terms} terms, {len(mono)} monomials, {len(counts)} groups"
    )

    return SumEstimate(np.sqrt(max(energy, 0.0)), Method.EXACT, N=form.N, label=form.name)


def l2_norm_pairwise(form: MultilinearForm) -> SumEstimate:
    """
    ``(E|X|^2)^{1/2}`` by summing ``c_t conj(c_t') E[T conj(T')]`` over every
    pair of terms as given, without merging or grouping.
    """
    tuples, coefficients = [], []
    N = max(form.N, 1)
    for degree, (t, c) in form.blocks.items():
        if degree == 0:
            p = np.zeros((len(c), N), dtype=np.int64)
            q = p.copy()
        else:
            p, q = _exponents(t, N)
        tuples.append((p, q))
        coefficients.append(c)

    if not coefficients:
        return SumEstimate(0.0, Method.EXACT, N=form.N, label=form.name)

    p = np.concatenate([a for a, _ in tuples])
    q = np.concatenate([b for _, b in tuples])
    c = np.concatenate(coefficients)
    net = p - q
    paired = np.minimum(p, q)
    log_factorial = _log_factorials(int(np.max(np.abs(net), initial=0) + 2 * np.max(paired, initial=0)))

    def same_net(start, stop):
        return np.all(net[start:stop, None, :] == net[None, :, :], axis=-1)

    energy = _gram_energy(c, np.abs(net), paired, log_factorial, same_net=same_net)
    return SumEstimate(np.sqrt(max(energy, 0.0)), Method.EXACT, N=form.N, label=form.name)


def l2_norm_mc(
    form: MultilinearForm,
    spec: EnsembleSpec,
    n_batches: int = DEFAULT_BATCHES,
    chunk: int = MC_CHUNK,
) -> SumEstimate:
    """
    Estimate ``(E|X|^2)^{1/2}`` from the ensemble's Gaussians.
    Sample ``i`` uses the Gaussians ``g_1 .. g_N`` drawn from the ensemble's ``i``-th stream,
    the same Gaussians :func:`gaussian.sample_mu` uses for sample ``i``.
    """
    N = max(form.N, 1)
    squares = np.empty(spec.count)
    for start in range(0, spec.count, chunk):
        stop = min(start + chunk, spec.count)
        g = spec.gaussian_matrix(N, start, stop)
        squares[start:stop] = np.abs(form.evaluate(g)) ** 2

    estimate = SumEstimate.from_squares(squares, n_batches, N=form.N, label=form.name)

    logger.debug(f"Monte Carlo norm of {form.name} over {spec}: {estimate}")

    return estimate
