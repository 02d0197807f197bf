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
Conservation laws of the Benjamin-Ono equation, the modified energies built
from them, and closed forms for the time derivatives of the modified energies
along the truncated flow.

Sobolev norms are coefficient sums. Every integral written below as
``<f>`` is the normalized average ``(1 / 2 pi) int_0^{2 pi} f dx``;
with that choice ``E = |u|^2 + R(u)`` is exactly conserved.
"""

from typing import Dict, Optional
import logging

import numpy as np

from . import spectral, utils, exceptions
from .spectral import SpectralField, TorusGrid

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)


class EnergyBreakdown(utils.SlotPickleMixin):
    """
    An energy split into its quadratic (Sobolev norm) part and its labeled,
    homogeneous remainder terms.
    """

    __slots__ = ("quadratic", "parts")

    def __init__(self, quadratic: float, parts: Optional[Dict[str, float]] = None):
        self.quadratic = float(quadratic)
        self.parts = {k: float(v) for k, v in (parts or {}).items()}

    @property
    def remainder(self) -> float:
        return float(sum(self.parts.values()))

    @property
    def total(self) -> float:
        return self.quadratic + self.remainder

    def __getitem__(self, key: str) -> float:
        if key == "quadratic":
            return self.quadratic
        return self.parts[key]

    def __repr__(self):
        parts = ", ".join(f"{k} = {v:.6g}" for k, v in self.parts.items())
        return f"{self.__class__.__name__}(quadratic = {self.quadratic:.6g}, {parts}, total = {self.total:.6g})"

    def to_json(self) -> dict:
        return {"quadratic": self.quadratic, "parts": dict(self.parts), "total": self.total}

    @classmethod
    def from_json(cls, json: dict) -> "EnergyBreakdown":
        return cls(json["quadratic"], json["parts"])


class DerivativeBlocks(utils.SlotPickleMixin):
    """
    The time derivative of a modified energy, split by homogeneity.
    ``terms`` holds every constituent integral so that cancellations can be
    judged against the size of what cancels.
    """

    __slots__ = ("blocks", "terms")

    def __init__(self, blocks: Dict[str, float], terms: Dict[str, float]):
        self.blocks = {k: float(v) for k, v in blocks.items()}
        self.terms = {k: float(v) for k, v in terms.items()}

    @property
    def total(self) -> float:
        return float(sum(self.blocks.values()))

    @property
    def scale(self) -> float:
        """The sum of the magnitudes of all constituent terms."""
        return float(sum(abs(v) for v in self.terms.values()))

    def __getitem__(self, key: str) -> float:
        return self.blocks[key]

    def __repr__(self):
        blocks = ", ".join(f"{k} = {v:.6g}" for k, v in self.blocks.items())
        return f"{self.__class__.__name__}({blocks}, total = {self.total:.6g})"

    def to_json(self) -> dict:
        return {"blocks": dict(self.blocks), "terms": dict(self.terms), "total": self.total}


def _grid_for(u: SpectralField, degree: int, grid: Optional[TorusGrid]) -> TorusGrid:
    band = max(u.n_modes, 1)
    if grid is None:
        return TorusGrid(band, degree=degree)
    if not grid.supports(band, degree):
        raise exceptions.InvalidGrid(
            f"{grid} is too small for degree {degree} integrands of a field with {band} modes"
        )
    return grid


def energy_E0(u: SpectralField) -> float:
    """``|u|^2_{L^2}``, the conserved mass."""
    return spectral.sobolev_norm_sq(u, 0)


def energy_E_half(u: SpectralField, grid: Optional[TorusGrid] = None) -> float:
    """``|u|^2_{H^{1/2}} + 1/3 <u^3>``."""
    grid = _grid_for(u, 3, grid)
    x = grid.to_physical(u.coefficients)
    return spectral.sobolev_norm_sq(u, 0.5) + grid.mean(x ** 3) / 3


def energy_E1(u: SpectralField, grid: Optional[TorusGrid] = None) -> EnergyBreakdown:
    """
    ``E_1(u) = |u|^2_{H^1} + 3/4 <u^2 H u_x> + 1/8 <u^4>``.

    Parameters
    ----------
    u
        The field.
    grid
        A grid supporting quartic integrands of ``u``.
        If ``None``, the smallest one is used.

    Returns
    -------
    breakdown : :class:`EnergyBreakdown`
        With parts ``cubic`` and ``quartic``.
    """
    grid = _grid_for(u, 4, grid)
    x = grid.to_physical(u.coefficients)
    hx = grid.abs_derivative(x)

    return EnergyBreakdown(
        spectral.sobolev_norm_sq(u, 1),
        {"cubic": 0.75 * grid.mean(x * x * hx), "quartic": grid.mean(x ** 4) / 8},
    )


def energy_E_3half(
    u: SpectralField, grid: Optional[TorusGrid] = None
) -> EnergyBreakdown:
    """
    ``E_{3/2}(u) = |u|^2_{H^{3/2}}
    + <3/2 u u_x^2 + 1/2 u (H u_x)^2>
    + <1/3 u^3 H u_x + 1/4 u^2 H(u u_x)>
    + 1/20 <u^5>``.

    Returns
    -------
    breakdown : :class:`EnergyBreakdown`
        With parts ``cubic_a``, ``cubic_b``, ``quartic_a``, ``quartic_b``, and ``quintic``.
    """
    grid = _grid_for(u, 5, grid)
    x = grid.to_physical(u.coefficients)
    dx = grid.derivative(x)
    hdx = grid.abs_derivative(x)
    h_uux = grid.hilbert(x * dx)

    return EnergyBreakdown(
        spectral.sobolev_norm_sq(u, 1.5),
        {
            "cubic_a": 1.5 * grid.mean(x * dx * dx),
            "cubic_b": 0.5 * grid.mean(x * hdx * hdx),
            "quartic_a": grid.mean(x ** 3 * hdx) / 3,
            "quartic_b": 0.25 * grid.mean(x * x * h_uux),
            "quintic": grid.mean(x ** 5) / 20,
        },
    )


def _smoothed(u: SpectralField, N: int, eps: float) -> SpectralField:
    # psi(1) = 0, so S u lives on |j| < N
    return spectral.smooth_project(u, N, eps).resized(N)


def modified_E(u: SpectralField, N: int, eps: float) -> float:
    """``|u|^2_{H^1} - |S u|^2_{H^1} + E_1(S u)`` with ``S`` the smoothed projector."""
    v = _smoothed(u, N, eps)
    return (
        spectral.sobolev_norm_sq(u, 1)
        - spectral.sobolev_norm_sq(v, 1)
        + energy_E1(v).total
    )


def modified_G(u: SpectralField, N: int, eps: float) -> float:
    """``|u|^2_{H^{3/2}} - |S u|^2_{H^{3/2}} + E_{3/2}(S u)``."""
    v = _smoothed(u, N, eps)
    return (
        spectral.sobolev_norm_sq(u, 1.5)
        - spectral.sobolev_norm_sq(v, 1.5)
        + energy_E_3half(v).total
    )


class _FluxWorkspace:
    """
    Physical-space samples shared by the derivative formulas:
    ``v = S phi``, ``w = v v_x`` and ``h = (Id - S^2) w``.
    """

    def __init__(self, phi: SpectralField, N: int, eps: float, degree: int):
        spectral.check_projection_parameters(N, eps)
        self.N = N
        self.eps = eps
        self.grid = grid = TorusGrid(N, degree=degree)
        self.psi = spectral.smooth_symbol(N, eps)

        self.v_field = _smoothed(phi, N, eps)
        self.v = grid.to_physical(self.v_field.coefficients)
        self.v_x = grid.derivative(self.v)
        self.hv_x = grid.abs_derivative(self.v)
        self.w = self.v * self.v_x
        self.h = grid.apply(self.w, lambda j: 1 - self.psi(j) ** 2)

    def mean(self, samples: np.ndarray) -> float:
        return self.grid.mean(samples)


def dE_dt_formula(phi: SpectralField, N: int, eps: float) -> float:
    """
    The time derivative at ``t = 0`` of ``modified_E(pi_N u(t), N, eps)``
    along the truncated flow started from ``phi``:
    ``3/2 <v H v_x h> + 1/2 <v^3 h>``
    with ``v = S phi`` and ``h = (Id - S^2)(v v_x)``.
    """
    ws = _FluxWorkspace(phi, N, eps, degree=5)
    return 1.5 * ws.mean(ws.v * ws.hv_x * ws.h) + 0.5 * ws.mean(ws.v ** 3 * ws.h)


def quartic_identity(phi: SpectralField, N: int, eps: float) -> DerivativeBlocks:
    """
    ``2 <w (Id - S^2) w_x>`` with ``w = S phi S phi_x``, which vanishes identically
    because ``(Id - S^2) d/dx`` is skew-adjoint.
    The single block is named ``identity``.
    """
    ws = _FluxWorkspace(phi, N, eps, degree=4)
    value = 2 * ws.mean(ws.w * ws.grid.derivative(ws.h))
    return DerivativeBlocks({"identity": value}, {"identity": value})


def dG_dt_formula(phi: SpectralField, N: int, eps: float) -> DerivativeBlocks:
    """
    The time derivative at ``t = 0`` of ``modified_G(pi_N u(t), N, eps)``
    along the truncated flow started from ``phi``, split into blocks.

    With ``v = S phi``, ``w = v v_x`` and ``h = (Id - S^2) w``:

    * cubic: ``2<v, h> - 2<pi_N phi, S w> + 2<v, S^2 w>`` in ``H^{3/2}``,
      which vanishes identically.
    * quartic: ``3/2 <h v_x^2> + 1/2 <h (H v_x)^2> + <v H v_x H h_x> + 3 <v v_x h_x>``.
    * quintic: ``<v^2 H v_x h> + 1/3 <v^3 H h_x> + 1/2 <v H(v v_x) h>
      + 1/4 <v^2 H(v_x h)> + 1/4 <v^2 H(v h_x)>``.
    * sextic: ``1/4 <v^4 h>``.

    Returns
    -------
    blocks : :class:`DerivativeBlocks`
        Blocks ``cubic``, ``quartic``, ``quintic`` and ``sextic``, plus every constituent term.
    """
    ws = _FluxWorkspace(phi, N, eps, degree=6)
    g = ws.grid
    v, v_x, hv_x, w, h = ws.v, ws.v_x, ws.hv_x, ws.w, ws.h
    h_x = g.derivative(h)
    hh_x = g.abs_derivative(h)

    band = 2 * N
    w_field = SpectralField(g.from_physical(w, band))
    h_field = SpectralField(g.from_physical(h, band))
    sw_field = spectral.smooth_project(w_field, N, ws.eps)
    ssw_field = spectral.smooth_project(sw_field, N, ws.eps)
    pi_phi = spectral.dirichlet_project(phi, N)

    terms = {
        "cubic_flux": 2 * spectral.sobolev_inner(ws.v_field, h_field, 1.5),
        "cubic_norm": -2 * spectral.sobolev_inner(pi_phi, sw_field, 1.5),
        "cubic_smoothed": 2 * spectral.sobolev_inner(ws.v_field, ssw_field, 1.5),
        "quartic_a": 1.5 * ws.mean(h * v_x * v_x),
        "quartic_b": 0.5 * ws.mean(h * hv_x * hv_x),
        "quartic_c": ws.mean(v * hv_x * hh_x),
        "quartic_identity": 3 * ws.mean(w * h_x),
        "quintic_a": ws.mean(v * v * hv_x * h),
        "quintic_b": ws.mean(v ** 3 * hh_x) / 3,
        "quintic_c": 0.5 * ws.mean(v * g.hilbert(w) * h),
        "quintic_d": 0.25 * ws.mean(v * v * g.hilbert(v_x * h)),
        "quintic_e": 0.25 * ws.mean(v * v * g.hilbert(v * h_x)),
        "sextic": 0.25 * ws.mean(v ** 4 * h),
    }

    blocks = {
        name: sum(value for key, value in terms.items() if key.startswith(name))
        for name in ("cubic", "quartic", "quintic", "sextic")
    }

    logger.debug(f"dG/dt blocks at N = {N}, eps = {eps}: {blocks}")

    return DerivativeBlocks(blocks, terms)
