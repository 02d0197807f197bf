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
The truncated Benjamin-Ono flow
``u_t + H u_xx + S(S u . S u_x) = 0``
with ``S`` the smoothed projector, integrated by fourth-order Runge-Kutta in
the integrating-factor frame: the dispersion ``exp(-i j|j| t)`` is applied
exactly and only the nonlinearity is stepped.
"""

from typing import Dict, List, Optional, Union
import logging

import math
from pathlib import Path

import numpy as np

from . import spectral, utils, exceptions
from .spectral import SpectralField, TorusGrid

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

MAX_STEP_DRIFT = 1e-6
MAX_DT_N_SQUARED = 20
DRIFT_PER_UNIT_TIME = 1e-9
DRIFT_FLOOR = 1e-14
MAX_SUBSTEPS = 4096


class Direction(utils.StrEnum):
    FORWARD = "forward"
    BACKWARD = "backward"

    @property
    def sign(self) -> int:
        return 1 if self is Direction.FORWARD else -1


class FlowConfig(utils.SlotPickleMixin):
    """
    Parameters of a truncated flow run.

    The nonlinearity lives on modes ``|j| < N``; it is evaluated on a grid
    that integrates quadratic products of such modes exactly.
    """

    __slots__ = ("N", "eps", "dt", "t_end", "n_points")

    def __init__(
        self,
        N: int,
        eps: float,
        dt: float = 1e-3,
        t_end: float = 1.0,
        n_points: Optional[int] = None,
    ):
        spectral.check_projection_parameters(N, eps)
        if not dt > 0:
            raise exceptions.InvalidParameters(f"dt must be positive, not {dt}")
        if dt * N ** 2 > MAX_DT_N_SQUARED:
            raise exceptions.InvalidParameters(
                f"dt * N^2 = {dt * N ** 2:.4g} exceeds the step guard {MAX_DT_N_SQUARED}"
            )
        if t_end < 0:
            raise exceptions.InvalidParameters(f"t_end must be non-negative, not {t_end}")

        self.N = int(N)
        self.eps = float(eps)
        self.dt = float(dt)
        self.t_end = float(t_end)
        self.n_points = n_points

    @property
    def grid(self) -> TorusGrid:
        return TorusGrid(self.N, n_points=self.n_points, degree=2)

    def __repr__(self):
        return f"{self.__class__.__name__}(N = {self.N}, eps = {self.eps}, dt = {self.dt}, t_end = {self.t_end})"

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "eps": self.eps,
            "dt": self.dt,
            "t_end": self.t_end,
            "n_points": self.n_points,
        }

    @classmethod
    def from_json(cls, json: dict) -> "FlowConfig":
        return cls(**json)

    def copy(self, **changes) -> "FlowConfig":
        return self.__class__(**{**self.to_json(), **changes})


def _relative_drift(before: np.ndarray, after: np.ndarray) -> float:
    mass = np.sum(np.abs(before) ** 2)
    if mass == 0:
        return 0.0
    drift = abs(np.sum(np.abs(after) ** 2) - mass) / mass
    return float(drift) if np.isfinite(drift) else np.inf


def linear_phase(f: SpectralField, t: float) -> SpectralField:
    """Apply the linear Benjamin-Ono group: ``u_j -> exp(-i j|j| t) u_j``."""
    j = np.arange(f.n_modes + 1, dtype=float)
    return SpectralField(f.coefficients * np.exp(-1j * j * j * t))


class TruncatedFlow:
    """
    The integrating-factor RK4 stepper for one :class:`FlowConfig`.
    Symbols and the grid are built once and reused across steps.
    """

    def __init__(self, cfg: FlowConfig):
        self.cfg = cfg
        self.N = cfg.N
        self.grid = cfg.grid

        j = np.arange(cfg.N, dtype=float)
        self.psi = spectral.smooth_symbol(cfg.N, cfg.eps)(j)
        self.omega = j * j

    def __repr__(self):
        return f"{self.__class__.__name__}({self.cfg})"

    def nonlinearity(self, b: np.ndarray) -> np.ndarray:
        """``-S(S u . S u_x)`` on modes ``0 <= j < N``."""
        v = self.grid.to_physical(self.psi * b)
        v_x = self.grid.derivative(v)
        return -self.psi * self.grid.from_physical(v * v_x, self.N - 1)

    def low_modes(self, coefficients: np.ndarray) -> np.ndarray:
        b = np.zeros(self.N, dtype=complex)
        m = min(self.N, len(coefficients))
        b[:m] = coefficients[:m]
        return b

    def rk4(self, b: np.ndarray, dt: float) -> np.ndarray:
        """One integrating-factor RK4 step of the low modes."""
        e = np.exp(-1j * self.omega * dt)
        e_half = np.exp(-0.5j * self.omega * dt)

        k1 = self.nonlinearity(b)
        k2 = self.nonlinearity(e_half * (b + 0.5 * dt * k1))
        k3 = self.nonlinearity(e_half * b + 0.5 * dt * k2)
        k4 = self.nonlinearity(e * b + dt * e_half * k3)
        return e * b + dt / 6 * (e * k1 + 2 * e_half * (k2 + k3) + k4)

    def advance_low_modes(self, b: np.ndarray, dt: float) -> np.ndarray:
        """
        Advance the low modes by ``dt`` in ``2^k`` equal substeps, with ``k`` the
        smallest integer for which no substep of size ``h`` moves the low-mode mass
        by more than ``max(DRIFT_PER_UNIT_TIME * |h|, DRIFT_FLOOR)``.
        The choice depends only on ``b`` and ``dt``.
        """
        substeps = 1
        while True:
            h = dt / substeps
            tolerance = max(DRIFT_PER_UNIT_TIME * abs(h), DRIFT_FLOOR)
            x = b
            for _ in range(substeps):
                x_next = self.rk4(x, h)
                if _relative_drift(x, x_next) > tolerance:
                    break
                x = x_next
            else:
                if substeps > 1:
                    logger.debug(f"Split a step of {dt:.3g} into {substeps} substeps")
                return x

            if substeps >= MAX_SUBSTEPS:
                raise exceptions.StepRejected(
                    f"step of size {dt} still drifts by more than {tolerance:.3g} per substep after {substeps} substeps; reduce dt"
                )
            substeps *= 2

    def step_coefficients(self, coefficients: np.ndarray, dt: float) -> np.ndarray:
        """
        Advance a half spectrum by ``dt`` (which may be negative).
        Raises :class:`exceptions.StepRejected` if sub-stepping cannot hold the
        drift of the low-mode mass, or if the whole step moves it by more than
        ``MAX_STEP_DRIFT``.
        """
        n = max(len(coefficients), self.N)
        c = np.zeros(n, dtype=complex)
        c[: len(coefficients)] = coefficients

        j = np.arange(n, dtype=float)
        out = c * np.exp(-1j * j * j * dt)

        b = c[: self.N]
        b_next = self.advance_low_modes(b, dt)

        drift = _relative_drift(b, b_next)
        if drift > MAX_STEP_DRIFT:
            raise exceptions.StepRejected(
                f"step of size {dt} changed the low-mode mass by a relative {drift:.3g}; reduce dt"
            )

        out[: self.N] = b_next
        out[0] = 0
        return out

    def step(self, u: SpectralField, dt: Optional[float] = None) -> SpectralField:
        if dt is None:
            dt = self.cfg.dt
        return SpectralField(self.step_coefficients(u.coefficients, dt))

    def smoothed_cube_mean(self, coefficients: np.ndarray) -> float:
        v = self.grid.to_physical(self.psi * self.low_modes(coefficients))
        return self.grid.mean(v ** 3)

    def diagnostics(self, u: SpectralField) -> Dict[str, float]:
        """
        The two exact invariants of the truncated flow:
        ``|pi_N u|_{L^2}`` and ``|u|^2_{H^{1/2}} + 1/3 <(S u)^3>``.
        """
        low = spectral.dirichlet_project(u.resized(max(u.n_modes, self.N)), self.N)
        return {
            "l2_low": float(np.sqrt(spectral.sobolev_norm_sq(low, 0))),
            "half_energy": spectral.sobolev_norm_sq(u, 0.5)
            + self.smoothed_cube_mean(u.coefficients) / 3,
        }


def step_truncated(
    u: SpectralField, cfg: FlowConfig, direction: Direction = Direction.FORWARD
) -> SpectralField:
    """
    One step of size ``cfg.dt`` of the truncated flow.
    Modes ``|j| >= N`` only pick up their linear phases.
    """
    return TruncatedFlow(cfg).step(u, Direction(direction).sign * cfg.dt)


class Trajectory(utils.SlotPickleMixin):
    """
    Saved states of a flow run, with the invariants recorded at every step.
    Times are signed: a backward run has non-positive times.
    """

    __slots__ = ("times", "states", "diagnostics", "cfg", "direction")

    def __init__(
        self,
        times,
        states: List[SpectralField],
        diagnostics: Dict[str, List[float]],
        cfg: FlowConfig,
        direction: Direction = Direction.FORWARD,
    ):
        self.times = np.asarray(times, dtype=float)
        self.states = list(states)
        self.diagnostics = {k: np.asarray(v, dtype=float) for k, v in diagnostics.items()}
        self.cfg = cfg
        self.direction = Direction(direction)

        if len(self.times) != len(self.states):
            raise exceptions.InvalidParameters(
                f"{len(self.times)} times do not match {len(self.states)} states"
            )

    def __repr__(self):
        return f"{self.__class__.__name__}({self.cfg}, direction = {self.direction}, saved = {len(self)})"

    def __len__(self):
        return len(self.states)

    @property
    def final(self) -> SpectralField:
        return self.states[-1]

    @property
    def initial(self) -> SpectralField:
        return self.states[0]

    @property
    def elapsed(self) -> float:
        return abs(float(self.times[-1] - self.times[0]))

    def save(self, path: Union[str, Path]) -> Path:
        n = max(s.n_modes for s in self.states)
        return utils.write_archive(
            path,
            "trajectory",
            {"cfg": self.cfg.to_json(), "direction": str(self.direction.value)},
            times=self.times,
            states=np.stack([s.resized(n).coefficients for s in self.states]),
            **{f"diagnostic_{k}": v for k, v in self.diagnostics.items()},
        )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Trajectory":
        header, arrays = utils.read_archive(path, "trajectory")
        diagnostics = {
            k[len("diagnostic_") :]: v for k, v in arrays.items() if k.startswith("diagnostic_")
        }
        return cls(
            arrays["times"],
            [SpectralField(row) for row in arrays["states"]],
            diagnostics,
            FlowConfig.from_json(header["cfg"]),
            Direction(header["direction"]),
        )


def _step_count(t_end: float, dt: float) -> int:
    if t_end == 0:
        return 0
    return max(int(math.ceil(t_end / dt - 1e-9)), 1)


def evolve(
    phi: SpectralField,
    cfg: FlowConfig,
    direction: Direction = Direction.FORWARD,
    resume: Optional[Trajectory] = None,
    save_every: int = 1,
) -> Trajectory:
    """
    Run the truncated flow from ``phi`` for a time ``cfg.t_end``.

    The number of steps is ``ceil(t_end / dt)``; the step actually taken is
    ``t_end / n_steps``, so the run lands on ``t_end`` exactly.

    Parameters
    ----------
    phi
        The initial data.
    cfg
        The flow parameters.
    direction
        Backward runs integrate the same equation with negative steps.
    resume
        A (possibly loaded) trajectory to continue.
        Its last state and time are the starting point, and the run stops at
        ``|t| = cfg.t_end``; ``phi`` is ignored.
    save_every
        Keep every ``save_every``-th state. Invariants are recorded at every step.

    Returns
    -------
    trajectory : :class:`Trajectory`
    """
    direction = Direction(direction)
    flow = TruncatedFlow(cfg)
    sign = direction.sign

    n_steps = _step_count(cfg.t_end, cfg.dt)
    dt = cfg.t_end / n_steps if n_steps > 0 else 0.0

    if resume is not None:
        if resume.direction is not direction:
            raise exceptions.InvalidParameters(
                f"cannot resume a {resume.direction} trajectory in the {direction} direction"
            )
        times = list(resume.times)
        states = list(resume.states)
        diagnostics = {k: list(v) for k, v in resume.diagnostics.items()}
        first = int(round(abs(times[-1]) / dt)) if n_steps > 0 else 0
        u = resume.final
        logger.info(f"Resuming {direction} run at t = {times[-1]} ({first}/{n_steps} steps done)")
    else:
        times = [0.0]
        states = [phi]
        diagnostics = {k: [v] for k, v in flow.diagnostics(phi).items()}
        first = 0
        u = phi

    c = u.coefficients
    for k in range(first + 1, n_steps + 1):
        c = flow.step_coefficients(c, sign * dt)
        current = SpectralField(c)
        for name, value in flow.diagnostics(current).items():
            diagnostics[name].append(value)
        if k % save_every == 0 or k == n_steps:
            times.append(sign * k * dt)
            states.append(current)

    logger.debug(f"Evolved {direction} with {cfg} in {n_steps} steps of {dt:.3g}")

    return Trajectory(times, states, diagnostics, cfg, direction)


def flow_to(
    phi: SpectralField, cfg: FlowConfig, direction: Direction = Direction.FORWARD
) -> SpectralField:
    """The state at time ``cfg.t_end`` (in the given direction), keeping no intermediate states."""
    return evolve(phi, cfg, direction=direction, save_every=max(_step_count(cfg.t_end, cfg.dt), 1)).final


def conservation_report(trajectory: Trajectory) -> Dict[str, float]:
    """
    The largest relative drift of each recorded invariant from its initial value.
    Invariants that start at zero are measured in absolute terms.
    """
    report = {}
    for name, values in trajectory.diagnostics.items():
        reference = abs(values[0])
        drift = float(np.max(np.abs(values - values[0])))
        report[name] = drift / reference if reference > 0 else drift
    return report


def reference_dt(resolution: int) -> float:
    return min(1e-3, 10 / resolution ** 2)


def reference_flow(
    phi: SpectralField,
    t: float,
    resolution: int,
    eps: float = 0.25,
    dt: Optional[float] = None,
) -> SpectralField:
    """
    The over-resolved truncated flow at ``N = resolution``,
    standing in for the exact flow at time ``t`` (negative ``t`` runs backward).
    """
    if dt is None:
        dt = reference_dt(resolution)
    cfg = FlowConfig(resolution, eps, dt=dt, t_end=abs(t))
    direction = Direction.FORWARD if t >= 0 else Direction.BACKWARD
    return flow_to(phi, cfg, direction=direction)
