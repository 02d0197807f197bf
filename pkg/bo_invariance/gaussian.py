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

from typing import Iterator, List, Optional, Sequence, Tuple, Union
import logging

from pathlib import Path

import numpy as np
from scipy import special

from . import spectral, energies, utils, exceptions
from .spectral import SpectralField

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

T_SEED = Union[int, np.random.SeedSequence, np.random.Generator]


def draw_gaussians(n: int, rng: np.random.Generator) -> np.ndarray:
    """
    ``n`` standard complex Gaussians ``(x + iy) / sqrt(2)``, so that ``E|g|^2 = 1``.
    The first ``m`` of them do not depend on ``n``.
    """
    xy = rng.standard_normal((n, 2))
    return (xy[:, 0] + 1j * xy[:, 1]) / np.sqrt(2)


def _rng(seed: T_SEED) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


class GaussianSample(utils.SlotPickleMixin):
    """
    One draw of the random series ``sum_n g_n / |n|^{k/2} e^{inx}``,
    truncated to ``|n| <= truncation``.
    """

    __slots__ = ("k_half", "field", "seed", "truncation")

    def __init__(self, k_half: float, field: SpectralField, seed: int, truncation: int):
        self.k_half = float(k_half)
        self.field = field
        self.seed = seed
        self.truncation = int(truncation)

    def __repr__(self):
        return f"{self.__class__.__name__}(k_half = {self.k_half}, truncation = {self.truncation}, seed = {self.seed})"

    @property
    def gaussians(self) -> np.ndarray:
        """The underlying ``g_1 .. g_N``."""
        n = np.arange(1, self.truncation + 1, dtype=float)
        return self.field.coefficients[1:] * n ** self.k_half


def sample_mu(
    k_half: float, N_grid: int, seed: T_SEED, support: Optional[int] = None
) -> GaussianSample:
    """
    Draw from the Gaussian measure ``mu_{k/2}``.

    Parameters
    ----------
    k_half
        The regularity index ``k/2``, at least ``1/2``.
    N_grid
        The truncation: modes ``|n| <= N_grid`` are drawn.
    seed
        An integer seed, a :class:`numpy.random.SeedSequence`, or a generator.
    support
        If given, modes above ``support`` are zeroed after drawing,
        so the same seed yields the same low modes.

    Returns
    -------
    sample : :class:`GaussianSample`
    """
    if k_half < 0.5:
        raise exceptions.InvalidParameters(f"k_half must be at least 1/2, not {k_half}")
    if N_grid < 1:
        raise exceptions.InvalidParameters(f"N_grid must be at least 1, not {N_grid}")

    g = draw_gaussians(N_grid, _rng(seed))
    n = np.arange(1, N_grid + 1, dtype=float)
    c = np.zeros(N_grid + 1, dtype=complex)
    c[1:] = g / n ** k_half
    if support is not None:
        c[support + 1 :] = 0

    return GaussianSample(
        k_half, SpectralField(c), seed if isinstance(seed, int) else None, N_grid
    )


def filtered_sample(k_half: float, N_grid: int, seed: T_SEED, M: int) -> GaussianSample:
    """A draw of ``mu_{k/2}`` with every mode above ``M`` removed."""
    if M < 0:
        raise exceptions.InvalidParameters(f"M must be non-negative, not {M}")
    return sample_mu(k_half, N_grid, seed, support=M)


class EnsembleSpec(utils.SlotPickleMixin):
    """
    A seeded ensemble: sample ``i`` is drawn from a generator seeded by
    mixing ``base_seed`` and ``i`` through :class:`numpy.random.SeedSequence`,
    so samples are reproducible individually and in any order.
    """

    __slots__ = ("count", "base_seed")

    def __init__(self, count: int, base_seed: int = 0):
        if count < 1:
            raise exceptions.InvalidParameters(f"count must be at least 1, not {count}")
        if base_seed < 0:
            raise exceptions.InvalidParameters(f"base_seed must be non-negative, not {base_seed}")
        self.count = int(count)
        self.base_seed = int(base_seed)

    def __repr__(self):
        return f"{self.__class__.__name__}(count = {self.count}, base_seed = {self.base_seed})"

    def __eq__(self, other):
        return isinstance(other, self.__class__) and (self.count, self.base_seed) == (
            other.count,
            other.base_seed,
        )

    def __hash__(self):
        return hash((self.__class__, self.count, self.base_seed))

    def seed_for(self, index: int) -> int:
        """The 64-bit seed of sample ``index``."""
        state = np.random.SeedSequence([self.base_seed, index]).generate_state(
            1, dtype=np.uint64
        )
        return int(state[0])

    def rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng(self.seed_for(index))

    def sample(self, index: int, k_half: float, N_grid: int, support: Optional[int] = None) -> GaussianSample:
        return sample_mu(k_half, N_grid, self.seed_for(index), support=support)

    def samples(
        self, k_half: float, N_grid: int, support: Optional[int] = None
    ) -> Iterator[GaussianSample]:
        for index in range(self.count):
            yield self.sample(index, k_half, N_grid, support=support)

    def gaussian_matrix(self, N: int, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        """The Gaussians ``g_1 .. g_N`` of samples ``start .. stop - 1``, one row per sample."""
        if stop is None:
            stop = self.count
        return np.stack([draw_gaussians(N, self.rng(i)) for i in range(start, stop)])

    def split(self, n_chunks: int) -> List[Tuple[int, int]]:
        """Contiguous ``(start, stop)`` index ranges covering the ensemble, in order."""
        edges = np.linspace(0, self.count, min(n_chunks, self.count) + 1).astype(int)
        return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def ensemble(
    spec: EnsembleSpec, k_half: float, N_grid: int, support: Optional[int] = None
) -> Iterator[GaussianSample]:
    """The samples of an ensemble, in index order."""
    yield from spec.samples(k_half, N_grid, support=support)


def tail_ratio(k_half: float, N_grid: int, s: float) -> float:
    """
    The expected ``H^s`` mass of the modes beyond ``N_grid`` that a truncated draw
    of ``mu_{k/2}`` discards, relative to the expected retained mass.
    Infinite when the series diverges.
    """
    p = 2 * k_half - 2 * s
    if p <= 1:
        return float("inf")
    tail = special.zeta(p, N_grid + 1)
    retained = special.zeta(p, 1) - tail
    return float(tail / retained)


def save_ensemble(
    path: Union[str, Path], spec: EnsembleSpec, samples: Sequence[GaussianSample]
) -> Path:
    """
    Write an ensemble as a versioned archive.
    The header carries ``k_half``, ``N_grid``, ``base_seed`` and ``count``;
    the payload is one row of half-spectrum coefficients per sample.
    """
    if len(samples) == 0:
        raise exceptions.InvalidParameters("cannot save an empty ensemble")
    k_half = samples[0].k_half
    N_grid = samples[0].truncation
    if any(s.k_half != k_half or s.truncation != N_grid for s in samples):
        raise exceptions.InvalidParameters("all samples of an ensemble share k_half and N_grid")

    return utils.write_archive(
        path,
        "ensemble",
        {"k_half": k_half, "N_grid": N_grid, "base_seed": spec.base_seed, "count": len(samples)},
        coefficients=np.stack([s.field.coefficients for s in samples]),
        seeds=np.array([str(-1 if s.seed is None else s.seed) for s in samples]),
    )


def load_ensemble(path: Union[str, Path]) -> Tuple[EnsembleSpec, List[GaussianSample]]:
    try:
        header, arrays = utils.read_archive(path, "ensemble")
    except exceptions.InvalidArchive as e:
        raise exceptions.InvalidEnsembleFile(str(e)) from e
    coefficients = arrays["coefficients"]
    if coefficients.shape != (header["count"], header["N_grid"] + 1):
        raise exceptions.InvalidEnsembleFile(
            f"coefficient table of shape {coefficients.shape} does not match header {header}"
        )
    seeds = [None if s == "-1" else int(s) for s in arrays["seeds"]]
    samples = [
        GaussianSample(header["k_half"], SpectralField(row), seed, header["N_grid"])
        for row, seed in zip(coefficients, seeds)
    ]
    return EnsembleSpec(header["count"], header["base_seed"]), samples


def alpha_N(N: int) -> float:
    """The renormalization ``2 sum_{n=1}^N 1/n``, the mean of ``|pi_N phi|^2_{H^{1/2}}`` under ``mu_1``."""
    if N < 0:
        raise exceptions.InvalidParameters(f"N must be non-negative, not {N}")
    return float(2 * np.sum(1 / np.arange(1, N + 1, dtype=float)))


def chi_R(x, R: float):
    """The cutoff ``chi_R``: ``1`` on ``|x| < R``, ``0`` on ``|x| >= 2R``, smooth in between."""
    if R <= 0:
        raise exceptions.InvalidParameters(f"R must be positive, not {R}")
    return spectral.bump_bridge(2 - np.abs(x) / R)


class DensityParams(utils.SlotPickleMixin):
    __slots__ = ("N", "eps", "R", "k_half")

    def __init__(self, N: int, eps: float, R: float, k_half: float = 1.0):
        spectral.check_projection_parameters(N, eps)
        if R <= 0:
            raise exceptions.InvalidParameters(f"R must be positive, not {R}")
        self.N = int(N)
        self.eps = float(eps)
        self.R = float(R)
        self.k_half = float(k_half)

    def __repr__(self):
        return f"{self.__class__.__name__}(N = {self.N}, eps = {self.eps}, R = {self.R}, k_half = {self.k_half})"


def _projections(u: SpectralField, params: DensityParams, sharp: bool):
    pi_u = spectral.dirichlet_project(u, params.N).resized(params.N)
    if sharp:
        return pi_u, pi_u
    return pi_u, spectral.smooth_project(u, params.N, params.eps).resized(params.N)


def _cube_average(v: SpectralField) -> float:
    return spectral.average(v, v, v)


def renormalized_half_energy(
    u: SpectralField, params: DensityParams, sharp: bool = False
) -> float:
    """``|pi_N u|^2_{H^{1/2}} - alpha_N + 1/3 <(S u)^3>``, with ``S = pi_N`` when ``sharp``."""
    pi_u, v = _projections(u, params, sharp)
    return (
        spectral.sobolev_norm_sq(pi_u, 0.5) - alpha_N(params.N) + _cube_average(v) / 3
    )


def _gated(factors: Sequence[float], exponent) -> float:
    weight = float(np.prod(factors))
    if weight == 0:
        return 0.0
    return weight * float(np.exp(exponent()))


def _density_F(u: SpectralField, params: DensityParams, sharp: bool) -> float:
    pi_u, v = _projections(u, params, sharp)
    factors = [
        chi_R(np.sqrt(spectral.sobolev_norm_sq(pi_u, 0)), params.R),
        chi_R(renormalized_half_energy(u, params, sharp=sharp), params.R),
    ]
    return _gated(factors, lambda: -energies.energy_E1(v).remainder)


def _density_H(u: SpectralField, params: DensityParams, sharp: bool) -> float:
    pi_u, v = _projections(u, params, sharp)
    if sharp:
        energy_one = energies.energy_E1(pi_u).total
    else:
        energy_one = energies.modified_E(pi_u, params.N, params.eps)
    factors = [
        chi_R(np.sqrt(spectral.sobolev_norm_sq(pi_u, 0)), params.R),
        chi_R(spectral.sobolev_norm_sq(pi_u, 0.5) + _cube_average(v) / 3, params.R),
        chi_R(energy_one - alpha_N(params.N), params.R),
    ]
    return _gated(factors, lambda: -energies.energy_E_3half(v).remainder)


def density_F(u: SpectralField, params: DensityParams) -> float:
    """
    ``chi_R(|pi_N u|_{L^2}) chi_R(|pi_N u|^2_{H^{1/2}} - alpha_N + 1/3 <(S u)^3>)
    exp(|S u|^2_{H^1} - E_1(S u))``.
    """
    return _density_F(u, params, sharp=False)


def density_H(u: SpectralField, params: DensityParams) -> float:
    """
    ``chi_R(|pi_N u|_{L^2}) chi_R(|pi_N u|^2_{H^{1/2}} + 1/3 <(S u)^3>)
    chi_R(E_N(pi_N u) - alpha_N) exp(|S u|^2_{H^{3/2}} - E_{3/2}(S u))``,
    with ``E_N`` the modified energy :func:`energies.modified_E`.
    """
    return _density_H(u, params, sharp=False)


def density_sharp_F(u: SpectralField, params: DensityParams) -> float:
    """:func:`density_F` with every smoothed projector replaced by ``pi_N``."""
    return _density_F(u, params, sharp=True)


def density_sharp_H(u: SpectralField, params: DensityParams) -> float:
    """:func:`density_H` with every smoothed projector replaced by ``pi_N``."""
    return _density_H(u, params, sharp=True)
