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

from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple
import logging

import functools
import time

import numpy as np

from . import dynamics, energies, exceptions, forms, gaussian, spectral, sums, utils
from .checks import CheckLedger
from .dynamics import Direction
from .gaussian import DensityParams, EnsembleSpec
from .reports import ExperimentReport, FigureSpec
from .spectral import SpectralField
from .wick import (
    DEFAULT_BATCHES,
    MC_CHUNK,
    Method,
    SumEstimate,
    batch_means,
    l2_norm_exact,
    l2_norm_mc,
    l2_norm_pairwise,
)

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

T_MAPPER = Callable[[Callable[[Any], Any], Iterable[Any]], Iterable[Any]]
T_MEASURE = Callable[[int, float], SumEstimate]

DEFAULT_CHUNKS = 16
MIN_ACCEPTANCE = 0.01
MAX_ACCEPTANCE = 0.99
CUBIC_CANCELLATION_BOUND = 1e-10
PATHWISE_DRAWS = 8


def timed(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        report = func(*args, **kwargs)
        report.wall_clock = time.perf_counter() - start
        logger.info(f"Finished {report.name} in {report.wall_clock:.3g}s")
        return report

    return wrapper


def _map_chunks(worker: Callable, spec: EnsembleSpec, mapper: T_MAPPER, n_chunks: int = DEFAULT_CHUNKS) -> list:
    # chunks come back in index order whatever the mapper, so reductions are reproducible
    return list(mapper(worker, spec.split(n_chunks)))


def _ensemble_parameters(spec: EnsembleSpec) -> Dict[str, int]:
    return {"samples": spec.count, "base_seed": spec.base_seed}


def _mc_estimate(values: np.ndarray, n_batches: int = DEFAULT_BATCHES, **tags) -> SumEstimate:
    mean, se = batch_means(values, n_batches)
    return SumEstimate(mean, Method.MONTE_CARLO, se, samples=len(values), **tags)


# energy derivatives


def _dE_dt_values(bounds, spec: EnsembleSpec, N: int, eps: float, N_grid: int, support: Optional[int]) -> np.ndarray:
    start, stop = bounds
    return np.array(
        [
            energies.dE_dt_formula(spec.sample(i, 1.0, N_grid, support).field, N, eps)
            for i in range(start, stop)
        ]
    )


_BLOCKS = ("cubic", "quartic", "quintic", "sextic")


def _dG_dt_values(bounds, spec: EnsembleSpec, N: int, eps: float, N_grid: int, support: Optional[int]) -> np.ndarray:
    start, stop = bounds
    rows = []
    for i in range(start, stop):
        b = energies.dG_dt_formula(spec.sample(i, 1.5, N_grid, support).field, N, eps)
        cubic_scale = max(abs(v) for k, v in b.terms.items() if k.startswith("cubic"))
        rows.append([b.total, *(b[name] for name in _BLOCKS), cubic_scale])
    return np.array(rows, dtype=float).reshape(-1, 2 + len(_BLOCKS))


def derivative_norm_mu1(
    N: int,
    eps: float,
    spec: EnsembleSpec,
    N_grid: Optional[int] = None,
    support: Optional[int] = None,
    mapper: T_MAPPER = map,
    n_batches: int = DEFAULT_BATCHES,
) -> SumEstimate:
    """
    Estimate the ``L^2(d mu_1)`` norm of the time derivative of the modified
    ``H^1`` energy at ``t = 0``, by evaluating :func:`energies.dE_dt_formula`
    on every draw of ``spec``.

    Parameters
    ----------
    N_grid
        Draws keep modes ``|j| <= N_grid``; defaults to ``N``.
        Modes at or above ``N`` do not enter the derivative.
    support
        If given, draws are filtered to ``|j| <= support``.
    mapper
        A ``map``-like callable; pass :meth:`runner.Run.map` to spread the draws over a worker pool.
    """
    spectral.check_projection_parameters(N, eps)
    worker = functools.partial(
        _dE_dt_values, spec=spec, N=N, eps=eps, N_grid=N_grid or N, support=support
    )
    values = np.concatenate(_map_chunks(worker, spec, mapper))
    estimate = SumEstimate.from_squares(values ** 2, n_batches, N=N, eps=eps, label="dE/dt")

    logger.debug(f"dE/dt norm under mu_1 at N = {N}, eps = {eps}: {estimate}")

    return estimate


def derivative_blocks_mu32(
    N: int,
    eps: float,
    spec: EnsembleSpec,
    N_grid: Optional[int] = None,
    support: Optional[int] = None,
    mapper: T_MAPPER = map,
    n_batches: int = DEFAULT_BATCHES,
) -> Tuple[Dict[str, SumEstimate], float]:
    """
    Estimate the ``L^2(d mu_{3/2})`` norm of the time derivative of the modified
    ``H^{3/2}`` energy, in total (``"total"``) and block by block.

    Returns
    -------
    estimates : dict
        One :class:`SumEstimate` per block, and the total.
    cubic_ratio : float
        The largest ratio, over draws, of the cubic block to its largest constituent term.
    """
    spectral.check_projection_parameters(N, eps)
    worker = functools.partial(
        _dG_dt_values, spec=spec, N=N, eps=eps, N_grid=N_grid or N, support=support
    )
    values = np.concatenate(_map_chunks(worker, spec, mapper))

    estimates = {
        name: SumEstimate.from_squares(values[:, k] ** 2, n_batches, N=N, eps=eps, label=f"dG/dt {name}")
        for k, name in enumerate(("total", *_BLOCKS))
    }

    cubic, scale = np.abs(values[:, 1]), values[:, -1]
    ratios = np.divide(cubic, scale, out=np.zeros_like(cubic), where=scale > 0)
    cubic_ratio = float(np.max(ratios, initial=0.0))

    logger.debug(f"dG/dt norms under mu_3/2 at N = {N}, eps = {eps}: {estimates}, cubic ratio {cubic_ratio:.3g}")

    return estimates, cubic_ratio


def derivative_norm_mu32(
    N: int,
    eps: float,
    spec: EnsembleSpec,
    N_grid: Optional[int] = None,
    support: Optional[int] = None,
    mapper: T_MAPPER = map,
    n_batches: int = DEFAULT_BATCHES,
) -> SumEstimate:
    """The total of :func:`derivative_blocks_mu32`."""
    estimates, _ = derivative_blocks_mu32(N, eps, spec, N_grid, support, mapper, n_batches)
    return estimates["total"]


@timed
def derivative_experiment(
    N: int,
    eps: float,
    spec: EnsembleSpec,
    measure: str = "mu1",
    N_grid: Optional[int] = None,
    filtered: bool = False,
    mapper: T_MAPPER = map,
) -> ExperimentReport:
    """
    Report the derivative norm under ``mu_1`` (``measure = "mu1"``)
    or ``mu_{3/2}`` (``measure = "mu32"``).
    With ``filtered``, draws are supported in ``|j| <= (1 - eps) N / 2``, where the derivative vanishes.
    """
    support = int((1 - eps) * N / 2) if filtered else None
    report = ExperimentReport(
        f"derivative-{measure}",
        parameters=dict(N=N, eps=eps, N_grid=N_grid or N, support=support, **_ensemble_parameters(spec)),
    )

    if measure == "mu1":
        estimate = derivative_norm_mu1(N, eps, spec, N_grid, support, mapper)
        report.results["dE/dt"] = estimate
    elif measure == "mu32":
        estimates, cubic_ratio = derivative_blocks_mu32(N, eps, spec, N_grid, support, mapper)
        estimate = estimates["total"]
        report.results.update({f"dG/dt {k}": v for k, v in estimates.items()})
        report.results["cubic_ratio"] = cubic_ratio
        report.checks.at_most("cubic block cancels", cubic_ratio, CUBIC_CANCELLATION_BOUND)
    else:
        raise exceptions.InvalidParameters(f"measure must be mu1 or mu32, not {measure!r}")

    if filtered:
        report.checks.at_most("filtered draws give no derivative", estimate.value, 1e-12)

    return report


@timed
def cross_route_check(
    N: int,
    eps: float,
    spec: EnsembleSpec,
    N_grid: Optional[int] = None,
    mapper: T_MAPPER = map,
    n_se: float = 3,
) -> ExperimentReport:
    """
    Compare the sampled norm of the modified-energy derivative with the
    Gaussian-coefficient route: the exact Wick norm of
    ``i (-3/2 quartic-E1 + 1/2 quintic-E1)`` when it can be enumerated,
    otherwise its evaluator sampled over the same ensemble.
    Also compares the two routes draw by draw on the first few draws.
    """
    report = ExperimentReport(
        "cross-route",
        parameters=dict(N=N, eps=eps, N_grid=N_grid or N, **_ensemble_parameters(spec)),
    )

    sampled = derivative_norm_mu1(N, eps, spec, N_grid, mapper=mapper)
    enumerate_terms = forms.within_budget(5, N)
    form = forms.energy_derivative_form(N, eps, enumerate_terms=enumerate_terms)
    wick_route = l2_norm_exact(form) if enumerate_terms else l2_norm_mc(form, spec)
    wick_route.eps = eps

    report.results["sampled"] = sampled
    report.results["wick"] = wick_route
    report.checks.expect(
        f"routes agree within {n_se} SE",
        sampled.agrees_with(wick_route, n_se),
        detail=f"{sampled.value:.6g} vs {wick_route.value:.6g}",
    )

    draws = min(PATHWISE_DRAWS, spec.count)
    from_form = np.abs(form.evaluate(spec.gaussian_matrix(N, 0, draws)))
    from_flux = np.abs(_dE_dt_values((0, draws), spec, N, eps, N, None))
    scale = max(float(np.max(from_flux, initial=0.0)), 1e-300)
    pathwise = float(np.max(np.abs(from_form - from_flux), initial=0.0)) / scale
    report.results["pathwise_difference"] = pathwise
    report.checks.at_most("routes agree draw by draw", pathwise, 1e-8)

    return report


# transport


class BackwardFlow(utils.SlotPickleMixin):
    """
    Runs a truncated flow backward in time.
    At ``N = resolution`` with the reference step this is the surrogate of the exact flow.
    """

    __slots__ = ("N", "eps", "dt")

    def __init__(self, N: int, eps: float, dt: Optional[float] = None):
        self.N = int(N)
        self.eps = float(eps)
        limit = dynamics.MAX_DT_N_SQUARED / self.N ** 2
        self.dt = min(dt if dt is not None else dynamics.reference_dt(self.N), limit)

    def __repr__(self):
        return f"{self.__class__.__name__}(N = {self.N}, eps = {self.eps}, dt = {self.dt})"

    def __call__(self, u: SpectralField, span: float) -> SpectralField:
        if span <= 0:
            return u
        cfg = dynamics.FlowConfig(self.N, self.eps, dt=self.dt, t_end=span)
        return dynamics.flow_to(u, cfg, Direction.BACKWARD)


def ball_norm(u: SpectralField, sigma: float) -> float:
    """The inhomogeneous ``H^{1/2 - sigma}`` norm that defines the balls ``A``."""
    return spectral.sobolev_norm(u, 0.5 - sigma, homogeneous=False)


def _transport_values(
    bounds,
    spec: EnsembleSpec,
    params: DensityParams,
    N_grid: int,
    sigma: float,
    rho: float,
    times: Sequence[float],
    flow: BackwardFlow,
    sharp: bool,
) -> np.ndarray:
    """Per draw: the density weight, then the ball indicator at each time, ``times[0] = 0`` included."""
    start, stop = bounds
    density = gaussian.density_sharp_F if sharp else gaussian.density_F
    rows = []
    for i in range(start, stop):
        phi = spec.sample(i, 1.0, N_grid).field
        row = [density(phi, params)]
        u, previous = phi, 0.0
        for t in times:
            u = flow(u, t - previous)
            previous = t
            row.append(float(ball_norm(u, sigma) <= rho))
        rows.append(row)
    return np.array(rows, dtype=float).reshape(-1, 1 + len(times))


def _transport_table(
    report: ExperimentReport,
    values: np.ndarray,
    times: Sequence[float],
    rho: float,
    n_batches: int,
) -> None:
    weights = values[:, 0]
    inside_now = weights * values[:, 1]
    acceptance = float(np.mean(values[:, 1]))
    report.results["I_0"] = _mc_estimate(inside_now, n_batches, label="I_0")
    report.results["acceptance"] = acceptance

    for k, t in enumerate(times):
        transported = weights * values[:, 1 + k]
        difference, se = batch_means(inside_now - transported, n_batches)
        row = dict(
            t=t,
            I_0=float(inside_now.mean()),
            I_t=float(transported.mean()),
            difference=difference,
            standard_error=se,
        )
        if t > 0:
            row.update(slope=abs(difference) / t, slope_error=se / t)
        report.add_row("transport", **row)

    if np.isinf(rho):
        report.checks.expect(
            "whole space is transported onto itself",
            all(row["difference"] == 0 for row in report.tables["transport"]),
        )
    elif not MIN_ACCEPTANCE <= acceptance <= MAX_ACCEPTANCE:
        report.checks.flag(
            "ball indicator variance",
            f"{acceptance:.3%} of draws lie in the ball; the indicator carries little information",
            value=acceptance,
        )

    if times[0] == 0:
        report.checks.expect("no transport at t = 0", report.tables["transport"][0]["difference"] == 0)


def _sorted_times(times: Iterable[float]) -> List[float]:
    times = sorted({float(t) for t in times} | {0.0})
    if times[0] < 0:
        raise exceptions.InvalidParameters(f"times must be non-negative, not {times[0]}")
    return times


@timed
def transport_experiment(
    rho: float,
    N: int,
    eps: float,
    R: float,
    times: Iterable[float],
    spec: EnsembleSpec,
    N_grid: Optional[int] = None,
    sigma: float = 0.1,
    dt: float = 1e-3,
    mapper: T_MAPPER = map,
    n_batches: int = DEFAULT_BATCHES,
) -> ExperimentReport:
    """
    Compare ``I_0 = E[F 1(|phi| <= rho)]`` with ``I_t = E[F 1(|Phi(-t) phi| <= rho)]``
    for the density ``F = F_{N,R}^eps``, the truncated flow ``Phi`` and the
    ``H^{1/2 - sigma}`` ball of radius ``rho``, at each time in ``times``.

    The differences are paired per draw, so their standard errors are those of
    ``I_0 - I_t`` directly. An infinite ``rho`` gives exact zeros.
    """
    times = _sorted_times(times)
    params = DensityParams(N, eps, R)
    N_grid = N_grid or 4 * N
    report = ExperimentReport(
        "transport",
        parameters=dict(
            rho=rho, N=N, eps=eps, R=R, sigma=sigma, dt=dt, N_grid=N_grid, times=times,
            **_ensemble_parameters(spec),
        ),
        figures=[FigureSpec("transport", "t", "difference", yerr="standard_error")],
    )

    worker = functools.partial(
        _transport_values,
        spec=spec,
        params=params,
        N_grid=N_grid,
        sigma=sigma,
        rho=rho,
        times=times,
        flow=BackwardFlow(N, eps, dt),
        sharp=False,
    )
    values = np.concatenate(_map_chunks(worker, spec, mapper))
    _transport_table(report, values, times, rho, n_batches)

    positive = [row for row in report.tables["transport"] if row["t"] > 0 and row["difference"] != 0]
    if len(positive) >= 2:
        report.fits["difference_vs_t"] = sums.slope_fit(
            [r["t"] for r in positive], [abs(r["difference"]) for r in positive], require_decreasing=False
        )

    return report


def transport_slope(
    rho: float,
    N: int,
    eps: float,
    R: float,
    t: float,
    spec: EnsembleSpec,
    **kwargs,
) -> SumEstimate:
    """The empirical slope ``|I_0 - I_t| / t`` of :func:`transport_experiment` at one ``t > 0``."""
    if not t > 0:
        raise exceptions.InvalidParameters(f"the slope needs t > 0, not {t}")
    report = transport_experiment(rho, N, eps, R, [t], spec, **kwargs)
    row = report.tables["transport"][-1]
    return SumEstimate(
        row["slope"], Method.MONTE_CARLO, row["slope_error"], samples=spec.count, N=N, eps=eps, label="transport slope"
    )


@timed
def monotonicity_probe(
    rho: float,
    t_bar: float,
    N: int,
    eps: float,
    R: float,
    spec: EnsembleSpec,
    N_grid: Optional[int] = None,
    sigma: float = 0.1,
    resolution: Optional[int] = None,
    mapper: T_MAPPER = map,
    n_batches: int = DEFAULT_BATCHES,
) -> ExperimentReport:
    """
    Compare the weight of a ball under the sharp-cutoff density with the weight
    of its image under the reference flow at time ``t_bar``:
    ``E[F 1(|Phi(-t_bar) phi| <= rho)] - E[F 1(|phi| <= rho)]``, expected to be at least ``-3`` SE.
    """
    times = _sorted_times([t_bar])
    params = DensityParams(N, eps, R)
    N_grid = N_grid or 4 * N
    resolution = resolution or N_grid
    report = ExperimentReport(
        "monotonicity",
        parameters=dict(
            rho=rho, t_bar=t_bar, N=N, eps=eps, R=R, sigma=sigma, N_grid=N_grid,
            resolution=resolution, **_ensemble_parameters(spec),
        ),
    )

    worker = functools.partial(
        _transport_values,
        spec=spec,
        params=params,
        N_grid=N_grid,
        sigma=sigma,
        rho=rho,
        times=times,
        flow=BackwardFlow(resolution, eps),
        sharp=True,
    )
    values = np.concatenate(_map_chunks(worker, spec, mapper))
    _transport_table(report, values, times, rho, n_batches)

    last = report.tables["transport"][-1]
    gain, se = -last["difference"], last["standard_error"]
    report.results["gain"] = SumEstimate(gain, Method.MONTE_CARLO, se, samples=spec.count, N=N, eps=eps, label="gain")
    report.checks.at_least("image weight is not smaller", gain, -3 * se, detail="bound is -3 SE")

    return report


# density convergence


def _density_differences(
    bounds, spec: EnsembleSpec, k_half: float, N_grid: int, support: Optional[int], params: DensityParams
) -> np.ndarray:
    start, stop = bounds
    if k_half == 1.0:
        smooth, sharp = gaussian.density_F, gaussian.density_sharp_F
    else:
        smooth, sharp = gaussian.density_H, gaussian.density_sharp_H
    out = []
    for i in range(start, stop):
        phi = spec.sample(i, k_half, N_grid, support).field
        out.append(abs(smooth(phi, params) - sharp(phi, params)))
    return np.array(out)


def density_difference(
    N: int,
    eps: float,
    R: float,
    spec: EnsembleSpec,
    k_half: float = 1.0,
    N_grid: Optional[int] = None,
    support: Optional[int] = None,
    mapper: T_MAPPER = map,
) -> np.ndarray:
    """
    Per draw of ``mu_{k/2}``: ``|F^eps - F|`` (``k_half = 1``)
    or ``|H^eps - H|`` (``k_half = 3/2``), smooth against sharp cutoffs.
    """
    if k_half not in (1.0, 1.5):
        raise exceptions.InvalidParameters(f"densities exist for k_half 1 and 3/2, not {k_half}")
    params = DensityParams(N, eps, R, k_half)
    worker = functools.partial(
        _density_differences, spec=spec, k_half=k_half, N_grid=N_grid or N, support=support, params=params
    )
    return np.concatenate(_map_chunks(worker, spec, mapper))


@timed
def density_convergence(
    N_list: Sequence[int],
    eps: float,
    R: float,
    spec: EnsembleSpec,
    N_grid: Optional[int] = None,
    support: Optional[int] = None,
    mapper: T_MAPPER = map,
    n_batches: int = DEFAULT_BATCHES,
) -> ExperimentReport:
    """
    Summarize the pathwise difference between the smooth-cutoff and sharp-cutoff
    densities per ``N`` (mean with SE, and 95th percentile),
    for ``F`` under ``mu_1`` and ``H`` under ``mu_{3/2}``,
    next to the exact cubic sum that controls the ``F`` difference.
    """
    N_list = sorted(N_list)
    N_grid = N_grid or max(N_list)
    report = ExperimentReport(
        "density-convergence",
        parameters=dict(N_list=N_list, eps=eps, R=R, N_grid=N_grid, support=support, **_ensemble_parameters(spec)),
        figures=[FigureSpec("density", "N", "mean", yerr="standard_error", group="density", logx=True)],
    )

    for density, k_half in (("F", 1.0), ("H", 1.5)):
        means = []
        for N in N_list:
            diff = density_difference(N, eps, R, spec, k_half, N_grid, support, mapper)
            mean, se = batch_means(diff, n_batches)
            means.append((mean, se))
            report.add_row(
                "density",
                density=density,
                N=N,
                mean=mean,
                standard_error=se,
                p95=float(np.percentile(diff, 95)),
            )
        report.checks.expect(
            f"{density} difference decreases within error",
            all(b[0] <= a[0] + np.hypot(a[1], b[1]) for a, b in zip(means, means[1:])),
        )

    cubic = [sums.density_cubic_sum(N, eps) for N in N_list]
    for N, value in zip(N_list, cubic):
        report.add_row("density-cubic", N=N, eps=eps, value=value)
    report.checks.expect("cubic sum decreases", all(b < a for a, b in zip(cubic, cubic[1:])))
    report.fits["density-cubic"] = sums.slope_fit(N_list, cubic)

    return report


# sweeps


@timed
def sweep_protocol(
    N_list: Sequence[int],
    eps_list: Sequence[float],
    measure: T_MEASURE,
    name: str = "sweep",
    n_se: float = 1,
    model: Optional[str] = "sqrt-eps",
) -> ExperimentReport:
    """
    Probe a double limit (``N`` to infinity, then ``eps`` to zero).
    For each ``eps`` in decreasing order, ``N`` increases until the estimate
    changes by less than ``n_se`` combined standard errors;
    the last estimate is that ``eps``'s limit value.

    Parameters
    ----------
    measure
        ``measure(N, eps)`` returns a :class:`SumEstimate`.
    model
        If given, a rate model fitted to the limit values against ``eps``.
    """
    N_list = sorted(N_list)
    eps_list = sorted(eps_list, reverse=True)
    report = ExperimentReport(
        name,
        parameters=dict(N_list=N_list, eps_list=eps_list, n_se=n_se),
        figures=[FigureSpec("limits", "eps", "value", yerr="standard_error", logx=True, logy=True)],
    )

    limits: List[Tuple[float, SumEstimate, int]] = []
    for eps in eps_list:
        previous = None
        for N in N_list:
            estimate = measure(N, eps)
            stable = previous is not None and estimate.agrees_with(previous, n_se)
            report.add_row(
                "sweep", eps=eps, N=N, value=estimate.value, standard_error=estimate.standard_error, stable=stable
            )
            previous = estimate
            if stable:
                break
        limits.append((eps, previous, N))
        report.add_row(
            "limits", eps=eps, N=N, value=previous.value, standard_error=previous.standard_error, stable=stable
        )
        if not stable:
            logger.warning(f"{name}: no stable value at eps = {eps} up to N = {N}")

    report.checks.expect(
        "limit values do not increase as eps decreases",
        all(
            b.value <= a.value + np.hypot(a.standard_error, b.standard_error)
            for (_, a, _), (_, b, _) in zip(limits, limits[1:])
        ),
    )
    if model is not None:
        report.fits[model] = sums.decay_fit([(eps, est.value) for eps, est, _ in limits], model)

    return report


@timed
def decay_envelope(
    form_name: str,
    points: Sequence[Tuple[int, float]],
    model: str,
    spec: Optional[EnsembleSpec] = None,
    tolerance: float = sums.DEFAULT_FIT_TOLERANCE,
) -> ExperimentReport:
    """
    Norms of a named form at each ``(N, eps)``, exact within the enumeration
    budget, and a rate model fitted to them.
    """
    report = ExperimentReport(
        f"envelope-{form_name}",
        parameters=dict(form=form_name, points=[list(p) for p in points], model=model, tolerance=tolerance),
    )
    values = []
    for N, eps in points:
        estimate = forms.estimate_form_norm(form_name, N, eps, spec)
        values.append(((N, eps), estimate.value))
        report.add_row(
            "norms", N=N, eps=eps, value=estimate.value, standard_error=estimate.standard_error,
            method=str(estimate.method.value),
        )

    fit = sums.decay_fit(values, model, tolerance)
    report.fits[model] = fit
    report.checks.expect(f"{model} envelope fits", fit.success, detail=fit.message)

    return report


# flow convergence


def _convergence_errors(
    bounds,
    spec: EnsembleSpec,
    N_grid: int,
    N_list: Sequence[int],
    N_ref: int,
    eps: float,
    t: float,
    dt: float,
    sigma: float,
    sigma_prime: float,
) -> np.ndarray:
    start, stop = bounds
    rows = []
    for i in range(start, stop):
        phi = spec.sample(i, 1.0, N_grid).field
        rows.append(_errors_for(phi, N_list, N_ref, eps, t, dt, sigma, sigma_prime))
    return np.array(rows).reshape(-1, 1 + len(N_list))


def _errors_for(phi, N_list, N_ref, eps, t, dt, sigma, sigma_prime) -> List[float]:
    reference = dynamics.reference_flow(phi, t, N_ref, eps=eps)
    row = [spectral.sobolev_norm(phi, 0.5 - sigma_prime, homogeneous=False)]
    for N in N_list:
        cfg = dynamics.FlowConfig(N, eps, dt=min(dt, dynamics.reference_dt(N)), t_end=t)
        u = dynamics.flow_to(phi, cfg)
        row.append(spectral.sobolev_norm(u - reference, 0.5 - sigma, homogeneous=False))
    return row


@timed
def convergence_experiment(
    N_list: Sequence[int],
    eps: float,
    t: float,
    sigma: float,
    sigma_prime: float,
    spec: Optional[EnsembleSpec] = None,
    phi_set: Optional[Sequence[SpectralField]] = None,
    N_ref: Optional[int] = None,
    dt: float = 1e-3,
    mapper: T_MAPPER = map,
) -> ExperimentReport:
    """
    Errors ``|Phi_N(t) phi - Phi_ref(t) phi|`` in ``H^{1/2 - sigma}`` per ``N``,
    averaged over the initial data, and a log-log fit of the average against ``N``.

    The initial data are ``phi_set`` if given, otherwise ``mu_1`` draws from ``spec``
    on ``N_ref`` modes. The reference is the truncated flow at ``N_ref``,
    by default four times the largest ``N``.
    The flow at each ``N`` steps by at most ``reference_dt(N)``.
    Non-monotone errors give a failed fit, not an exception.
    """
    N_list = sorted(N_list)
    N_ref = N_ref or 4 * max(N_list)
    if N_ref < 4 * max(N_list):
        raise exceptions.InvalidParameters(
            f"N_ref = {N_ref} must be at least four times the largest N ({max(N_list)})"
        )
    if not sigma > sigma_prime:
        raise exceptions.InvalidParameters(f"sigma ({sigma}) must exceed sigma_prime ({sigma_prime})")
    if (spec is None) == (phi_set is None):
        raise exceptions.InvalidParameters("give exactly one of spec and phi_set")

    if phi_set is not None:
        errors = np.array([_errors_for(phi, N_list, N_ref, eps, t, dt, sigma, sigma_prime) for phi in phi_set])
        ensemble_parameters = {"initial_data": len(phi_set)}
    else:
        worker = functools.partial(
            _convergence_errors,
            spec=spec,
            N_grid=N_ref,
            N_list=N_list,
            N_ref=N_ref,
            eps=eps,
            t=t,
            dt=dt,
            sigma=sigma,
            sigma_prime=sigma_prime,
        )
        errors = np.concatenate(_map_chunks(worker, spec, mapper))
        ensemble_parameters = _ensemble_parameters(spec)

    report = ExperimentReport(
        "convergence",
        parameters=dict(
            N_list=N_list, N_ref=N_ref, eps=eps, t=t, dt=dt, sigma=sigma, sigma_prime=sigma_prime,
            **ensemble_parameters,
        ),
        figures=[FigureSpec("errors", "N", "error", logx=True, logy=True)],
    )

    report.results["initial_radius"] = float(np.max(errors[:, 0]))
    mean_errors = errors[:, 1:].mean(axis=0)
    for k, N in enumerate(N_list):
        report.add_row(
            "errors", N=N, error=float(mean_errors[k]), worst=float(np.max(errors[:, 1 + k]))
        )

    fit = sums.slope_fit(N_list, mean_errors)
    report.fits["error_vs_N"] = fit
    report.results["theta"] = fit.rate
    report.checks.expect("errors decrease with N", fit.monotone)
    report.checks.at_least("fitted rate is positive", fit.rate, 0.0)

    return report


# lattice and cancellation reports


@timed
def lattice_norm(
    form_name: str,
    N: int,
    eps: float,
    spec: Optional[EnsembleSpec] = None,
    exact: Optional[bool] = None,
    compare: bool = False,
) -> ExperimentReport:
    """
    The ``L^2`` norm of a named form.
    With ``compare``, the exact norm is also checked against the pairwise sum
    and, when ``spec`` is given, against Monte Carlo.
    """
    report = ExperimentReport(
        "lattice",
        parameters=dict(form=form_name, N=N, eps=eps, exact=exact, **(_ensemble_parameters(spec) if spec else {})),
    )
    estimate = forms.estimate_form_norm(form_name, N, eps, spec, exact)
    report.results["norm"] = estimate

    if compare and estimate.method is Method.EXACT:
        form = forms.build_form(form_name, N, eps)
        report.results["terms"] = form.n_terms
        pairwise = l2_norm_pairwise(form)
        report.results["pairwise"] = pairwise
        scale = max(estimate.value, 1e-300)
        report.checks.at_most("pairwise sum agrees", abs(pairwise.value - estimate.value) / scale, 1e-9)
        if spec is not None:
            sampled = l2_norm_mc(form, spec)
            report.results["sampled"] = sampled
            report.checks.expect("Monte Carlo agrees within 3 SE", sampled.agrees_with(estimate, 3))

    return report


@timed
def cancellation_report(
    set_names: Sequence[str], N_list: Sequence[int], eps_list: Sequence[float], bound: float = 1e-12
) -> ExperimentReport:
    """The merged-coefficient residual of each cancellation set at each ``(N, eps)``."""
    report = ExperimentReport(
        "cancellation",
        parameters=dict(sets=list(set_names), N_list=list(N_list), eps_list=list(eps_list), bound=bound),
    )
    worst = 0.0
    for name in set_names:
        for N in N_list:
            for eps in eps_list:
                residual = forms.cancellation_check(name, N, eps)
                worst = max(worst, residual)
                report.add_row("residuals", set=name, N=N, eps=eps, residual=residual)
    report.results["worst"] = worst
    report.checks.at_most("coefficients cancel", worst, bound)
    return report


@timed
def centering_check(
    N: int, spec: EnsembleSpec, n_batches: int = DEFAULT_BATCHES, n_se: float = 3
) -> ExperimentReport:
    """
    Under ``mu_1``, the mean of ``|pi_N phi|^2_{H^{1/2}} - alpha_N`` vanishes.
    Uses the same Gaussians as every other experiment.
    """
    report = ExperimentReport("centering", parameters=dict(N=N, **_ensemble_parameters(spec)))
    n = np.arange(1, N + 1, dtype=float)
    values = np.empty(spec.count)
    for start, stop in spec.split(max(1, spec.count // MC_CHUNK)):
        g = spec.gaussian_matrix(N, start, stop)
        # |pi_N phi|^2_{H^{1/2}} = 2 sum |g_n|^2 / n
        values[start:stop] = 2 * np.sum(np.abs(g) ** 2 / n, axis=1) - gaussian.alpha_N(N)
    estimate = _mc_estimate(values, n_batches, N=N, label="centered half energy")
    report.results["mean"] = estimate
    report.checks.at_most("centered within 3 SE", abs(estimate.value), n_se * estimate.standard_error)
    return report


# derivative formulas against finite differences


def fd_derivative(energy: Callable[[SpectralField], float], phi: SpectralField, N: int, eps: float, h: float = 1e-4) -> float:
    """
    The fourth-order centered difference of ``energy`` along the truncated flow at ``t = 0``.
    Every shifted state is a single integrator step of size ``+-h`` or ``+-2h`` from ``phi``.
    """
    flow = dynamics.TruncatedFlow(dynamics.FlowConfig(N, eps, dt=h, t_end=h))

    def shifted(s: float) -> float:
        return energy(flow.step(phi, s))

    return (8 * (shifted(h) - shifted(-h)) - (shifted(2 * h) - shifted(-2 * h))) / (12 * h)


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def _energy_rows(bounds, spec: EnsembleSpec, N: int, eps: float, N_grid: int, h: float) -> List[dict]:
    start, stop = bounds

    def projected_E(u):
        return energies.modified_E(spectral.dirichlet_project(u, N), N, eps)

    def projected_G(u):
        return energies.modified_G(spectral.dirichlet_project(u, N), N, eps)

    rows = []
    for i in range(start, stop):
        phi_1 = spec.sample(i, 1.0, N_grid).field
        phi_32 = spec.sample(i, 1.5, N_grid).field

        dE = energies.dE_dt_formula(phi_1, N, eps)
        dE_fd = fd_derivative(projected_E, phi_1, N, eps, h)
        blocks = energies.dG_dt_formula(phi_32, N, eps)
        dG_fd = fd_derivative(projected_G, phi_32, N, eps, h)
        cubic_scale = max(abs(v) for k, v in blocks.terms.items() if k.startswith("cubic"))

        rows.append(
            dict(
                sample=i,
                E1=energies.energy_E1(spectral.dirichlet_project(phi_1, N)).total,
                modified_E=projected_E(phi_1),
                modified_G=projected_G(phi_32),
                dE_dt=dE,
                dE_dt_fd=dE_fd,
                dE_error=_relative(dE, dE_fd),
                dG_dt=blocks.total,
                dG_dt_fd=dG_fd,
                dG_error=_relative(blocks.total, dG_fd),
                cubic_ratio=abs(blocks["cubic"]) / cubic_scale if cubic_scale > 0 else 0.0,
            )
        )
    return rows


@timed
def energy_experiment(
    N: int,
    eps: float,
    spec: EnsembleSpec,
    N_grid: Optional[int] = None,
    h: float = 1e-4,
    tolerance: float = 1e-5,
    mapper: T_MAPPER = map,
) -> ExperimentReport:
    """
    Modified energies of ``mu_1`` and ``mu_{3/2}`` draws, with the closed
    derivative formulas checked against finite differences along the flow
    and the cubic block of the ``H^{3/2}`` derivative checked for cancellation.
    """
    spectral.check_projection_parameters(N, eps)
    N_grid = N_grid or N
    report = ExperimentReport(
        "energy",
        parameters=dict(N=N, eps=eps, N_grid=N_grid, h=h, tolerance=tolerance, **_ensemble_parameters(spec)),
    )

    worker = functools.partial(_energy_rows, spec=spec, N=N, eps=eps, N_grid=N_grid, h=h)
    for rows in _map_chunks(worker, spec, mapper):
        for row in rows:
            report.add_row("energies", **row)

    table = report.tables["energies"]
    report.checks.at_most("dE/dt matches finite differences", max(r["dE_error"] for r in table), tolerance)
    report.checks.at_most("dG/dt matches finite differences", max(r["dG_error"] for r in table), tolerance)
    report.checks.at_most("cubic block cancels", max(r["cubic_ratio"] for r in table), CUBIC_CANCELLATION_BOUND)

    return report
