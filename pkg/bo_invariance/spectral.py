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

from typing import Callable, Dict, Iterator, Optional, Union
import logging

import numpy as np
from scipy import fft as sp_fft

from . import utils, exceptions

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

T_SYMBOL = Callable[[np.ndarray], np.ndarray]
T_SCALAR = Union[int, float]

TWO_PI = 2 * np.pi
MAX_INTEGRAND_FACTORS = 6


def _bump_factor(t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t)
    positive = t > 0
    out[positive] = np.exp(-1 / t[positive])
    return out


def bump_bridge(t):
    """
    The smooth step ``f(t) / (f(t) + f(1 - t))`` with ``f(t) = exp(-1/t)`` for ``t > 0``.
    It is exactly ``0`` for ``t <= 0``, exactly ``1`` for ``t >= 1``,
    and infinitely differentiable everywhere.
    """
    t = np.asarray(t, dtype=float)
    a = _bump_factor(np.atleast_1d(t))
    b = _bump_factor(np.atleast_1d(1 - t))
    out = a / (a + b)
    if t.ndim == 0:
        return float(out[0])
    return out.reshape(t.shape)


class SmoothCutoff(utils.SlotPickleMixin):
    """
    The even bump ``psi_eps``: ``1`` on ``|x| <= 1 - eps``, ``0`` on ``|x| >= 1``,
    joined by :func:`bump_bridge` on the transition band.
    """

    __slots__ = ("epsilon",)

    def __init__(self, epsilon: float):
        if not 0 < epsilon < 1:
            raise exceptions.InvalidParameters(
                f"epsilon must be in (0, 1), not {epsilon}"
            )
        self.epsilon = float(epsilon)

    def __call__(self, x):
        return bump_bridge((1 - np.abs(x)) / self.epsilon)

    def __repr__(self):
        return f"{self.__class__.__name__}(epsilon = {self.epsilon})"

    def __eq__(self, other):
        return isinstance(other, self.__class__) and self.epsilon == other.epsilon

    def __hash__(self):
        return hash((self.__class__, self.epsilon))


def check_projection_parameters(N: int, eps: Optional[float] = None) -> None:
    if int(N) != N or N < 1:
        raise exceptions.InvalidParameters(f"N must be a positive integer, not {N}")
    if eps is not None and not 0 < eps < 1:
        raise exceptions.InvalidParameters(f"eps must be in (0, 1), not {eps}")


class TorusGrid(utils.SlotPickleMixin):
    """
    A uniform grid on ``[0, 2 pi)`` sized so that products of ``degree + 1``
    trigonometric polynomials of degree ``n_modes`` are integrated exactly.
    """

    __slots__ = ("n_modes", "n_points", "degree")

    def __init__(self, n_modes: int, n_points: Optional[int] = None, degree: int = 5):
        """
        Parameters
        ----------
        n_modes
            The largest frequency carried by the fields sampled on this grid.
        n_points
            The number of physical samples.
            If ``None`` (the default), the smallest fast size that satisfies the exactness rule.
        degree
            The largest number of factors in an integrand.
            The grid holds ``n_points >= (degree + 1) * n_modes + 1``.
        """
        if n_modes < 1:
            raise exceptions.InvalidGrid(f"n_modes must be at least 1, not {n_modes}")
        if degree < 1:
            raise exceptions.InvalidGrid(f"degree must be at least 1, not {degree}")

        minimum = (degree + 1) * n_modes + 1
        if n_points is None:
            n_points = sp_fft.next_fast_len(minimum, real=True)
        elif n_points < minimum:
            raise exceptions.InvalidGrid(
                f"{n_points} points cannot integrate degree {degree} products of {n_modes} modes (need {minimum})"
            )
        elif sp_fft.next_fast_len(n_points, real=True) != n_points:
            raise exceptions.InvalidGrid(
                f"{n_points} points is not a fast transform size"
            )

        self.n_modes = int(n_modes)
        self.n_points = int(n_points)
        self.degree = int(degree)

    def __repr__(self):
        return f"{self.__class__.__name__}(n_modes = {self.n_modes}, n_points = {self.n_points}, degree = {self.degree})"

    def __eq__(self, other):
        return isinstance(other, self.__class__) and (
            self.n_modes,
            self.n_points,
            self.degree,
        ) == (other.n_modes, other.n_points, other.degree)

    def __hash__(self):
        return hash((self.__class__, self.n_modes, self.n_points, self.degree))

    @property
    def nodes(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n_points) / self.n_points

    @property
    def max_band(self) -> int:
        """The largest band that can be sampled without aliasing."""
        return (self.n_points - 1) // 2

    def supports(self, band: int, factors: int) -> bool:
        """Whether a product of ``factors`` fields of the given band is integrated exactly."""
        return self.n_points >= (factors + 1) * band + 1

    def to_physical(self, coefficients: np.ndarray) -> np.ndarray:
        """Sample a half spectrum ``c_0 .. c_n`` of a real field."""
        n = len(coefficients) - 1
        if n > self.max_band:
            raise exceptions.InvalidGrid(
                f"a field with {n} modes does not fit on {self.n_points} points"
            )
        buf = np.zeros(self.n_points // 2 + 1, dtype=complex)
        buf[: n + 1] = coefficients
        return sp_fft.irfft(buf, n=self.n_points) * self.n_points

    def from_physical(self, samples: np.ndarray, n_modes: int) -> np.ndarray:
        """Return the half spectrum ``c_0 .. c_{n_modes}`` of real samples, zero mode dropped."""
        samples = np.asarray(samples, dtype=float)
        if samples.shape[-1] != self.n_points:
            raise exceptions.InvalidGrid(
                f"expected {self.n_points} samples, got {samples.shape[-1]}"
            )
        c = sp_fft.rfft(samples) / self.n_points
        out = np.zeros(n_modes + 1, dtype=complex)
        m = min(n_modes, self.max_band)
        out[: m + 1] = c[: m + 1]
        out[0] = 0
        return out

    def apply(self, samples: np.ndarray, symbol: T_SYMBOL) -> np.ndarray:
        """
        Apply a real-preserving Fourier multiplier to physical samples.
        ``symbol`` is evaluated on the non-negative frequencies only.
        """
        c = sp_fft.rfft(samples)
        j = np.arange(c.shape[-1])
        c = c * symbol(j)
        if self.n_points % 2 == 0:
            c[..., -1] = 0
        return sp_fft.irfft(c, n=self.n_points)

    def hilbert(self, samples: np.ndarray) -> np.ndarray:
        return self.apply(samples, hilbert_symbol)

    def derivative(self, samples: np.ndarray) -> np.ndarray:
        return self.apply(samples, derivative_symbol)

    def abs_derivative(self, samples: np.ndarray) -> np.ndarray:
        """``|D| = H d/dx``."""
        return self.apply(samples, lambda j: np.abs(j).astype(float))

    def mean(self, samples: np.ndarray) -> float:
        """The normalized average ``(1/2 pi) int_0^{2 pi}``, exact below the aliasing threshold."""
        return float(np.mean(samples, axis=-1))

    def integrate(self, samples: np.ndarray) -> float:
        return TWO_PI * self.mean(samples)


def hilbert_symbol(j: np.ndarray) -> np.ndarray:
    return -1j * np.sign(j)


def derivative_symbol(j: np.ndarray) -> np.ndarray:
    return 1j * j


class SpectralField(utils.SlotPickleMixin):
    """
    A mean-zero real function on the torus,
    stored as the half spectrum ``u_0 = 0, u_1, ..., u_n``
    with the convention ``u_j = (1 / 2 pi) int u exp(-ijx) dx``.
    Negative frequencies are implied by ``u_{-j} = conj(u_j)``.

    Fields are immutable values.
    """

    __slots__ = ("coefficients",)

    def __init__(self, coefficients):
        """
        Parameters
        ----------
        coefficients
            The half spectrum, starting at frequency zero.
            The zero mode must vanish (to round-off).
        """
        c = np.array(coefficients, dtype=complex).ravel()
        if len(c) < 2:
            c = np.concatenate([c, np.zeros(2 - len(c), dtype=complex)])
        if not np.all(np.isfinite(c)):
            raise exceptions.InvalidField("field coefficients must be finite")

        scale = max(1.0, float(np.max(np.abs(c))))
        if abs(c[0]) > 1e-12 * scale:
            raise exceptions.InvalidField(
                f"field must have zero mean, but its zero mode is {c[0]}"
            )
        c[0] = 0
        c.setflags(write=False)

        self.coefficients = c

    @classmethod
    def zeros(cls, n_modes: int) -> "SpectralField":
        return cls(np.zeros(n_modes + 1, dtype=complex))

    @classmethod
    def from_modes(
        cls, modes: Dict[int, complex], n_modes: Optional[int] = None
    ) -> "SpectralField":
        """
        Build a field from a mapping of frequency to coefficient.
        A negative frequency ``-j`` sets ``u_j`` to the conjugate of the given value.
        """
        top = max((abs(j) for j in modes), default=1)
        if n_modes is None:
            n_modes = top
        if n_modes < top:
            raise exceptions.InvalidField(
                f"a field with {n_modes} modes cannot hold frequency {top}"
            )
        c = np.zeros(n_modes + 1, dtype=complex)
        for j, value in modes.items():
            if j == 0:
                raise exceptions.InvalidField("cannot set the zero mode")
            c[abs(j)] = value if j > 0 else np.conj(value)
        return cls(c)

    @classmethod
    def from_two_sided(cls, coefficients) -> "SpectralField":
        """Build a field from coefficients indexed by ``j = -n .. n``, checking Hermitian symmetry."""
        c = np.asarray(coefficients, dtype=complex)
        n = (len(c) - 1) // 2
        if len(c) != 2 * n + 1:
            raise exceptions.InvalidField("two-sided spectra have odd length")
        positive = c[n:]
        negative = c[n::-1]
        scale = max(1.0, float(np.max(np.abs(c))))
        if np.max(np.abs(positive - np.conj(negative))) > 1e-12 * scale:
            raise exceptions.InvalidField("coefficients are not Hermitian symmetric")
        return cls(positive)

    @property
    def n_modes(self) -> int:
        return len(self.coefficients) - 1

    def two_sided(self) -> np.ndarray:
        """Coefficients indexed by ``j = -n .. n``."""
        c = self.coefficients
        return np.concatenate([np.conj(c[:0:-1]), c])

    def support(self) -> int:
        """The largest frequency with a nonzero coefficient (``0`` for the zero field)."""
        nonzero = np.flatnonzero(self.coefficients)
        return int(nonzero[-1]) if len(nonzero) > 0 else 0

    def resized(self, n_modes: int) -> "SpectralField":
        """Zero-pad or truncate to ``n_modes``."""
        c = np.zeros(n_modes + 1, dtype=complex)
        m = min(n_modes, self.n_modes)
        c[: m + 1] = self.coefficients[: m + 1]
        return self.__class__(c)

    def __getitem__(self, j: int) -> complex:
        if abs(j) > self.n_modes:
            return 0j
        value = self.coefficients[abs(j)]
        return value if j >= 0 else np.conj(value)

    def __iter__(self) -> Iterator[complex]:
        yield from self.coefficients

    def __len__(self):
        return len(self.coefficients)

    def _aligned(self, other: "SpectralField"):
        n = max(self.n_modes, other.n_modes)
        return self.resized(n).coefficients, other.resized(n).coefficients

    def __add__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        a, b = self._aligned(other)
        return self.__class__(a + b)

    def __sub__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        a, b = self._aligned(other)
        return self.__class__(a - b)

    def __mul__(self, scalar: T_SCALAR):
        if not np.isrealobj(scalar):
            return NotImplemented
        return self.__class__(self.coefficients * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.__class__(-self.coefficients)

    def __eq__(self, other):
        if not isinstance(other, SpectralField):
            return NotImplemented
        a, b = self._aligned(other)
        return bool(np.array_equal(a, b))

    __hash__ = None

    def __repr__(self):
        return f"{self.__class__.__name__}(n_modes = {self.n_modes}, support = {self.support()})"


class ComplexField(utils.SlotPickleMixin):
    """
    A complex function on the torus, stored as a two-sided spectrum ``c_{-n} .. c_n``.
    Used for the gauge transform, whose output is not real.
    """

    __slots__ = ("coefficients",)

    def __init__(self, coefficients):
        c = np.array(coefficients, dtype=complex).ravel()
        if len(c) % 2 != 1:
            raise exceptions.InvalidField("two-sided spectra have odd length")
        if not np.all(np.isfinite(c)):
            raise exceptions.InvalidField("field coefficients must be finite")
        c.setflags(write=False)
        self.coefficients = c

    @classmethod
    def from_real(cls, field: SpectralField) -> "ComplexField":
        return cls(field.two_sided())

    @classmethod
    def zeros(cls, n_modes: int) -> "ComplexField":
        return cls(np.zeros(2 * n_modes + 1, dtype=complex))

    @property
    def n_modes(self) -> int:
        return (len(self.coefficients) - 1) // 2

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.n_modes, self.n_modes + 1)

    def __getitem__(self, j: int) -> complex:
        if abs(j) > self.n_modes:
            return 0j
        return self.coefficients[j + self.n_modes]

    def resized(self, n_modes: int) -> "ComplexField":
        out = np.zeros(2 * n_modes + 1, dtype=complex)
        m = min(n_modes, self.n_modes)
        out[n_modes - m : n_modes + m + 1] = self.coefficients[
            self.n_modes - m : self.n_modes + m + 1
        ]
        return self.__class__(out)

    def _aligned(self, other: "ComplexField"):
        n = max(self.n_modes, other.n_modes)
        return self.resized(n).coefficients, other.resized(n).coefficients

    def __add__(self, other):
        if not isinstance(other, ComplexField):
            return NotImplemented
        a, b = self._aligned(other)
        return self.__class__(a + b)

    def __sub__(self, other):
        if not isinstance(other, ComplexField):
            return NotImplemented
        a, b = self._aligned(other)
        return self.__class__(a - b)

    def __mul__(self, scalar: complex):
        return self.__class__(self.coefficients * complex(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return self.__class__(-self.coefficients)

    __hash__ = None

    def __eq__(self, other):
        if not isinstance(other, ComplexField):
            return NotImplemented
        a, b = self._aligned(other)
        return bool(np.array_equal(a, b))

    def __repr__(self):
        return f"{self.__class__.__name__}(n_modes = {self.n_modes})"

    def multiply(self, multiplier: "FourierMultiplier") -> "ComplexField":
        return self.__class__(
            self.coefficients * multiplier.evaluate(self.frequencies)
        )

    def derivative(self) -> "ComplexField":
        return self.__class__(self.coefficients * 1j * self.frequencies)

    def positive_part(self) -> "ComplexField":
        """The projection onto frequencies ``j > 0``."""
        return self.__class__(np.where(self.frequencies > 0, self.coefficients, 0))

    def nonpositive_part(self) -> "ComplexField":
        return self.__class__(np.where(self.frequencies <= 0, self.coefficients, 0))

    def l2_norm(self) -> float:
        """``((1 / 2 pi) int |f|^2)^(1/2)``, i.e. the coefficient l2 norm."""
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))

    def sobolev_norm(self, s: float, homogeneous: bool = False) -> float:
        j = self.frequencies
        weights = _sobolev_weights(np.abs(j), s, homogeneous)
        return float(np.sqrt(np.sum(weights * np.abs(self.coefficients) ** 2)))

    def to_physical(self, n_points: int) -> np.ndarray:
        if 2 * self.n_modes + 1 > n_points:
            raise exceptions.InvalidGrid(
                f"a field with {self.n_modes} modes does not fit on {n_points} points"
            )
        buf = np.zeros(n_points, dtype=complex)
        buf[self.frequencies % n_points] = self.coefficients
        return sp_fft.ifft(buf) * n_points

    @classmethod
    def from_physical(cls, samples: np.ndarray, n_modes: int) -> "ComplexField":
        n_points = samples.shape[-1]
        c = sp_fft.fft(samples) / n_points
        j = np.arange(-n_modes, n_modes + 1)
        out = np.where(np.abs(j) <= (n_points - 1) // 2, c[j % n_points], 0)
        return cls(out)

    def to_real(self) -> SpectralField:
        """Convert back to a :class:`SpectralField`, checking the field is real and mean-zero."""
        return SpectralField.from_two_sided(self.coefficients)


class FourierMultiplier(utils.SlotPickleMixin):
    """
    A diagonal Fourier operator.
    The symbol is given on non-negative frequencies;
    on negative frequencies it is extended by ``m(-j) = conj(m(j))``,
    so that real fields stay real.
    """

    __slots__ = ("symbol", "name")

    def __init__(self, symbol: T_SYMBOL, name: str = "multiplier"):
        self.symbol = symbol
        self.name = name

    def __repr__(self):
        return f"{self.__class__.__name__}({self.name})"

    def evaluate(self, j: np.ndarray) -> np.ndarray:
        """The symbol at signed frequencies."""
        j = np.asarray(j)
        values = np.asarray(self.symbol(np.abs(j)), dtype=complex)
        return np.where(j >= 0, values, np.conj(values))

    def __call__(self, field: SpectralField) -> SpectralField:
        j = np.arange(field.n_modes + 1)
        c = field.coefficients * self.symbol(j)
        c[0] = 0
        return SpectralField(c)

    def __matmul__(self, other: "FourierMultiplier") -> "FourierMultiplier":
        first, second = self.symbol, other.symbol
        return FourierMultiplier(
            lambda j: first(j) * second(j), name=f"{self.name} @ {other.name}"
        )


def hilbert_multiplier() -> FourierMultiplier:
    return FourierMultiplier(hilbert_symbol, name="H")


def derivative_multiplier() -> FourierMultiplier:
    return FourierMultiplier(derivative_symbol, name="d/dx")


def abs_derivative_multiplier(s: float = 1) -> FourierMultiplier:
    return FourierMultiplier(
        lambda j: np.where(j == 0, 0.0, np.abs(j).astype(float) ** s), name=f"|D|^{s}"
    )


def smooth_symbol(N: int, eps: float) -> T_SYMBOL:
    psi = SmoothCutoff(eps)
    return lambda j: psi(np.asarray(j, dtype=float) / N)


def smooth_projector(N: int, eps: float) -> FourierMultiplier:
    check_projection_parameters(N, eps)
    return FourierMultiplier(smooth_symbol(N, eps), name=f"S(N = {N}, eps = {eps})")


def dirichlet_projector(N: int) -> FourierMultiplier:
    check_projection_parameters(N)
    return FourierMultiplier(
        lambda j: (np.abs(j) <= N).astype(float), name=f"pi(N = {N})"
    )


def to_physical(f: SpectralField, grid: Optional[TorusGrid] = None) -> np.ndarray:
    """
    Sample ``f`` on a grid.
    If no grid is given, the smallest fast grid holding ``f`` is used.
    """
    if grid is None:
        grid = TorusGrid(max(f.n_modes, 1), degree=1)
    return grid.to_physical(f.coefficients)


def from_physical(
    samples: np.ndarray, grid: Optional[TorusGrid] = None, n_modes: Optional[int] = None
) -> SpectralField:
    """The inverse of :func:`to_physical`; the mean of the samples is discarded."""
    samples = np.asarray(samples, dtype=float)
    if grid is None:
        grid = TorusGrid(max((len(samples) - 1) // 2, 1), n_points=len(samples), degree=1)
    if n_modes is None:
        n_modes = grid.n_modes
    return SpectralField(grid.from_physical(samples, n_modes))


def hilbert(f: SpectralField) -> SpectralField:
    """``(Hf)_j = -i sign(j) f_j``."""
    return hilbert_multiplier()(f)


def derivative(f: SpectralField) -> SpectralField:
    return derivative_multiplier()(f)


def antiderivative(f: SpectralField) -> SpectralField:
    """The unique mean-zero antiderivative, ``z_j = u_j / (ij)``."""
    j = np.arange(1, f.n_modes + 1)
    c = np.zeros(f.n_modes + 1, dtype=complex)
    c[1:] = f.coefficients[1:] / (1j * j)
    return SpectralField(c)


def smooth_project(f: SpectralField, N: int, eps: float) -> SpectralField:
    """Multiply coefficient ``j`` by ``psi_eps(j / N)``."""
    return smooth_projector(N, eps)(f)


def dirichlet_project(f: SpectralField, N: int) -> SpectralField:
    """Keep modes ``|j| <= N``."""
    return dirichlet_projector(N)(f)


def _sobolev_weights(j: np.ndarray, s: float, homogeneous: bool) -> np.ndarray:
    j = np.abs(j).astype(float)
    if homogeneous:
        safe = np.where(j == 0, 1.0, j)
        return np.where(j == 0, 0.0, safe ** (2 * s))
    return (1 + j ** 2) ** s


def sobolev_norm_sq(f: SpectralField, s: float) -> float:
    """``sum_{j != 0} |j|^{2s} |f_j|^2`` over both signs of ``j``."""
    j = np.arange(1, f.n_modes + 1, dtype=float)
    return float(2 * np.sum(j ** (2 * s) * np.abs(f.coefficients[1:]) ** 2))


def sobolev_norm(f: SpectralField, s: float, homogeneous: bool = True) -> float:
    """
    The ``H^s`` norm of ``f``.
    The inhomogeneous version weights mode ``j`` by ``(1 + j^2)^s``.
    """
    if homogeneous:
        return float(np.sqrt(sobolev_norm_sq(f, s)))
    j = np.arange(1, f.n_modes + 1)
    weights = _sobolev_weights(j, s, homogeneous=False)
    return float(np.sqrt(2 * np.sum(weights * np.abs(f.coefficients[1:]) ** 2)))


def sobolev_inner(f: SpectralField, g: SpectralField, s: float) -> float:
    """The real ``H^s`` inner product ``sum_{j != 0} |j|^{2s} f_j conj(g_j)``."""
    n = min(f.n_modes, g.n_modes)
    j = np.arange(1, n + 1, dtype=float)
    terms = j ** (2 * s) * f.coefficients[1 : n + 1] * np.conj(g.coefficients[1 : n + 1])
    return float(2 * np.sum(terms.real))


def integrate(*fields: SpectralField, grid: Optional[TorusGrid] = None) -> float:
    """
    The exact value of ``int_0^{2 pi} f_1 ... f_k dx`` for up to six fields,
    by pointwise products on a uniform grid.

    Parameters
    ----------
    fields
        The factors of the integrand.
    grid
        The grid to integrate on.
        It must hold ``n_points >= (k + 1) * band + 1`` for ``k`` factors.
        If ``None``, the smallest such grid is used.
    """
    k = len(fields)
    if not 1 <= k <= MAX_INTEGRAND_FACTORS:
        raise exceptions.InvalidParameters(
            f"can integrate products of 1 to {MAX_INTEGRAND_FACTORS} fields, not {k}"
        )
    band = max(max(f.n_modes for f in fields), 1)
    if grid is None:
        grid = TorusGrid(band, degree=k)
    elif not grid.supports(band, k):
        raise exceptions.InvalidGrid(
            f"{grid} is too small for a product of {k} fields with {band} modes"
        )

    product = np.ones(grid.n_points)
    for f in fields:
        product = product * grid.to_physical(f.coefficients)

    return grid.integrate(product)


def average(*fields: SpectralField, grid: Optional[TorusGrid] = None) -> float:
    """``(1 / 2 pi)`` times :func:`integrate`."""
    return integrate(*fields, grid=grid) / TWO_PI
