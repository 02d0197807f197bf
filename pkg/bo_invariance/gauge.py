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
The gauge transform ``M = exp((i/2) S P S)``, where ``P`` multiplies by
``S z`` and ``z`` is the mean-zero antiderivative of the field.
The transformed unknown ``w = pi_{>0}(M u)`` solves a Schrodinger-type equation
whose nonlinearity loses less than a derivative.
"""

from typing import Dict, Optional
import logging

import math

import numpy as np
from scipy import fft as sp_fft

from . import spectral, exceptions
from .spectral import ComplexField, SpectralField
from .dynamics import Trajectory

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

MAX_SERIES_TERMS = 64


class GaugeOperators:
    """
    The multiplication operators ``P g = (S z) g`` and ``Q g = (S u) g``
    together with the sandwich ``S P S``, realized on a complex grid that
    multiplies band-limited fields exactly.
    """

    def __init__(self, u: SpectralField, N: int, eps: float):
        spectral.check_projection_parameters(N, eps)
        self.N = N
        self.eps = eps
        self.u = u
        self.z = spectral.antiderivative(u)
        self.projector = spectral.smooth_projector(N, eps)
        self.n_points = sp_fft.next_fast_len(4 * N + 1)

        self._sz = ComplexField.from_real(
            spectral.smooth_project(self.z, N, eps).resized(N)
        ).to_physical(self.n_points)
        self._su = ComplexField.from_real(
            spectral.smooth_project(u, N, eps).resized(N)
        ).to_physical(self.n_points)

    def __repr__(self):
        return f"{self.__class__.__name__}(N = {self.N}, eps = {self.eps})"

    def _multiply(self, samples: np.ndarray, g: ComplexField) -> ComplexField:
        band = min(g.n_modes, 2 * self.N)
        x = g.resized(band).to_physical(self.n_points)
        return ComplexField.from_physical(samples * x, 2 * self.N).resized(
            max(g.n_modes, 2 * self.N)
        )

    def smooth(self, g: ComplexField) -> ComplexField:
        return g.multiply(self.projector)

    def P(self, g: ComplexField) -> ComplexField:
        """``(S z) g``, for ``g`` with modes below ``N``."""
        return self._multiply(self._sz, g)

    def Q(self, g: ComplexField) -> ComplexField:
        """``(S u) g``, for ``g`` with modes below ``N``."""
        return self._multiply(self._su, g)

    def SPS(self, g: ComplexField) -> ComplexField:
        n = g.n_modes
        return self.smooth(self.P(self.smooth(g).resized(self.N))).resized(max(n, self.N))

    def SQS(self, g: ComplexField) -> ComplexField:
        n = g.n_modes
        return self.smooth(self.Q(self.smooth(g).resized(self.N))).resized(max(n, self.N))


def gauge_operators(u: SpectralField, N: int, eps: float) -> GaugeOperators:
    return GaugeOperators(u, N, eps)


def commutator_residual(u: SpectralField, g: ComplexField, N: int, eps: float) -> float:
    """
    The L2 norm of ``d/dx (S P S g) - S P S (d/dx g) - S Q S g``,
    which vanishes because ``d/dx (S z) = S u``.
    """
    ops = GaugeOperators(u, N, eps)
    residual = ops.SPS(g).derivative() - ops.SPS(g.derivative()) - ops.SQS(g)
    return residual.l2_norm()


def _series(
    ops: GaugeOperators, g: ComplexField, factor: complex, tol: float
) -> ComplexField:
    if not tol > 0:
        raise exceptions.InvalidParameters(f"tol must be positive, not {tol}")

    total = g.resized(max(g.n_modes, ops.N))
    term = total
    for order in range(1, MAX_SERIES_TERMS + 1):
        term = ops.SPS(term) * (factor / order)
        if term.l2_norm() < tol:
            logger.debug(f"gauge series converged after {order} terms")
            return total + term
        total = total + term

    raise exceptions.SeriesDidNotConverge(
        f"gauge series did not reach tolerance {tol} within {MAX_SERIES_TERMS} terms"
    )


def apply_gauge_M(
    u: SpectralField, g: ComplexField, N: int, eps: float, tol: float = 1e-12
) -> ComplexField:
    """
    ``M g = sum_l (i/2)^l (S P S)^l g / l!``, summed until a term's L2 norm drops below ``tol``.

    Raises
    ------
    :class:`exceptions.SeriesDidNotConverge`
        If that does not happen within 64 terms.
    """
    return _series(GaugeOperators(u, N, eps), g, 0.5j, tol)


def apply_gauge_M_inverse(
    u: SpectralField, g: ComplexField, N: int, eps: float, tol: float = 1e-12
) -> ComplexField:
    """The inverse of :func:`apply_gauge_M`, the same series with ``-i/2``."""
    return _series(GaugeOperators(u, N, eps), g, -0.5j, tol)


def gauge_w(u: SpectralField, N: int, eps: float, tol: float = 1e-12) -> ComplexField:
    """``w = pi_{>0}(M u)``."""
    return apply_gauge_M(u, ComplexField.from_real(u), N, eps, tol=tol).positive_part()


def gauge_residual(
    trajectory: Trajectory, tol: float = 1e-12
) -> Dict[str, float]:
    """
    Centered finite-difference residuals of the linear parts of the two equations
    along a saved trajectory: ``(d/dt - i d^2/dx^2) w`` for the gauged unknown
    and ``(d/dt + H d^2/dx^2) u`` for the field itself.
    The largest L2 norm over interior times is reported for each.
    """
    if len(trajectory) < 3:
        raise exceptions.InvalidParameters("need at least three saved states")
    steps = np.diff(trajectory.times)
    if not np.allclose(steps, steps[0]):
        raise exceptions.InvalidParameters("saved states must be equally spaced in time")
    dt = float(steps[0])

    N, eps = trajectory.cfg.N, trajectory.cfg.eps
    n = max(s.n_modes for s in trajectory.states)
    us = [ComplexField.from_real(s.resized(n)) for s in trajectory.states]
    ws = [gauge_w(s.resized(n), N, eps, tol=tol).resized(n) for s in trajectory.states]

    j = us[0].frequencies.astype(float)
    u_symbol = 1j * j * np.abs(j)
    w_symbol = 1j * j * j

    u_res, w_res = [], []
    for k in range(1, len(us) - 1):
        du = (us[k + 1] - us[k - 1]).coefficients / (2 * dt)
        dw = (ws[k + 1] - ws[k - 1]).coefficients / (2 * dt)
        u_res.append(np.sqrt(np.sum(np.abs(du + u_symbol * us[k].coefficients) ** 2)))
        w_res.append(np.sqrt(np.sum(np.abs(dw + w_symbol * ws[k].coefficients) ** 2)))

    return {"u_residual": float(max(u_res)), "w_residual": float(max(w_res))}
