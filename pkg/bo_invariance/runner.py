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

from typing import Any, Callable, Dict, Iterable, List, Optional, Union
import logging

import functools
import json
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy
import matplotlib

from . import dynamics, exceptions, experiments, forms, gauge, gaussian, reports, spectral
from .config import RunConfig
from .gaussian import EnsembleSpec
from .reports import ExperimentReport
from .version import __version__

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

MANIFEST_NAME = "manifest.json"


def versions() -> Dict[str, str]:
    return {
        "bo_invariance": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "python": platform.python_version(),
    }


class Run:
    """
    One validated run of an experiment.
    The run owns the worker pool, writes every recorded report into its output
    directory, and writes a manifest on exit.

    .. warning::

        :class:`Run` must be used as a context manager.
    """

    __slots__ = ("config", "output", "workers", "_executor", "_open", "_reports", "_started")

    def __init__(self, config: RunConfig, output: Optional[Union[str, Path]] = None, workers: Optional[int] = None):
        """
        Parameters
        ----------
        config
            The run's configuration. It is validated on entry.
        output
            Where to write reports; defaults to the configuration's output directory.
        workers
            The size of the worker pool; defaults to the configuration's ``workers``.
            With one worker, everything runs in this process.
        """
        self.config = config
        self.output = Path(output) if output is not None else config.output
        self.workers = int(workers if workers is not None else config["workers"])

        self._executor: Optional[ProcessPoolExecutor] = None
        self._open = False
        self._reports: List[str] = []
        self._started = 0.0

    def __repr__(self):
        return f"{self.__class__.__name__}({self.config.experiment}, output = {self.output}, workers = {self.workers})"

    def _check_open(self):
        if not self._open:
            raise exceptions.UninitializedRun(
                "the Run has not been initialized (use it as a context manager)"
            )

    def map(self, fn: Callable[[Any], Any], iterable: Iterable[Any]) -> List[Any]:
        """Apply ``fn`` to every item on the worker pool, returning results in item order."""
        self._check_open()
        if self._executor is None:
            return list(map(fn, iterable))
        return list(self._executor.map(fn, iterable))

    def record(self, report: ExperimentReport) -> List[Path]:
        """Write a report into the run's output directory."""
        self._check_open()
        paths = reports.emit_report(report, self.output)
        self._reports.append(report.name)
        return paths

    def manifest(self, status: str) -> dict:
        spec = ensemble_spec(self.config)
        return {
            "schema_version": reports.REPORT_SCHEMA_VERSION,
            "experiment": self.config.experiment,
            "status": status,
            "config": self.config.to_json(),
            "config_hash": self.config.digest(),
            "seeds": {
                "base_seed": spec.base_seed,
                "samples": spec.count,
                "derivation": "numpy.random.SeedSequence([base_seed, index])",
            },
            "versions": versions(),
            "workers": self.workers,
            "reports": list(self._reports),
            "wall_clock": time.perf_counter() - self._started,
        }

    def __enter__(self) -> "Run":
        self.config.validate()
        self.output.mkdir(parents=True, exist_ok=True)
        if self.workers > 1:
            self._executor = ProcessPoolExecutor(max_workers=self.workers)
        self._started = time.perf_counter()
        self._open = True

        logger.info(f"Started {self}")

        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self._executor is not None:
            self._executor.shutdown(wait=True)
            self._executor = None

        status = "completed" if exc_type is None else "failed"
        path = self.output / MANIFEST_NAME
        path.write_text(json.dumps(reports.to_jsonable(self.manifest(status)), indent=2))
        self._open = False

        logger.info(f"Finished {self} ({status}); wrote manifest to {path}")


def ensemble_spec(config: RunConfig) -> EnsembleSpec:
    return EnsembleSpec(config["samples"], config["seed"])


# adapters from configurations to experiments


def _sample(config: RunConfig, run: Run) -> ExperimentReport:
    spec = ensemble_spec(config)
    k_half, N_grid = config["k_half"], config["N_grid"]
    samples = list(gaussian.ensemble(spec, k_half, N_grid))
    path = gaussian.save_ensemble(run.output / "ensemble.npz", spec, samples)

    report = ExperimentReport(
        "sample",
        parameters=dict(k_half=k_half, N_grid=N_grid, samples=spec.count, base_seed=spec.base_seed),
        results={"path": path, "tail_ratio_L2": gaussian.tail_ratio(k_half, N_grid, 0.0)},
    )
    for s in samples:
        report.add_row(
            "norms",
            seed=str(s.seed),
            L2=spectral.sobolev_norm(s.field, 0.0),
            half=spectral.sobolev_norm(s.field, 0.5),
        )
    return report


def _evolve(config: RunConfig, run: Run) -> ExperimentReport:
    N, eps = config["N"], config["eps"]
    spec = ensemble_spec(config)
    cfg = dynamics.FlowConfig(N, eps, dt=config["dt"], t_end=config["t"])
    N_grid = config["N_grid"] or N

    report = ExperimentReport(
        "evolve",
        parameters=dict(cfg.to_json(), k_half=config["k_half"], N_grid=N_grid, samples=spec.count, base_seed=spec.base_seed),
    )
    drifts = {}
    for i in range(spec.count):
        phi = spec.sample(i, config["k_half"], N_grid).field
        trajectory = dynamics.evolve(phi, cfg)
        if i == 0:
            report.results["checkpoint"] = trajectory.save(run.output / "trajectory.npz")
            if config["gauge"] and len(trajectory) >= 3:
                report.results["gauge_residual"] = gauge.gauge_residual(trajectory)
        drift = dynamics.conservation_report(trajectory)
        report.add_row("drift", sample=i, **drift)
        for name, value in drift.items():
            drifts[name] = max(drifts.get(name, 0.0), value)

    report.results["max_drift"] = drifts
    if config["check_conservation"]:
        for name, value in drifts.items():
            report.checks.at_most(f"{name} is conserved", value, 1e-8)
    return report


def _energy(config: RunConfig, run: Run) -> ExperimentReport:
    return experiments.energy_experiment(
        config["N"], config["eps"], ensemble_spec(config), N_grid=config["N_grid"], mapper=run.map
    )


def _derivative(config: RunConfig, run: Run) -> ExperimentReport:
    return experiments.derivative_experiment(
        config["N"],
        config["eps"],
        ensemble_spec(config),
        measure=config["measure"],
        N_grid=config["N_grid"],
        filtered=config["filtered"],
        mapper=run.map,
    )


def _cross_route(config: RunConfig, run: Run) -> ExperimentReport:
    return experiments.cross_route_check(
        config["N"], config["eps"], ensemble_spec(config), N_grid=config["N_grid"], mapper=run.map
    )


def _lattice(config: RunConfig, run: Run) -> ExperimentReport:
    name, N, eps = config["form"], config["N"], config["eps"]
    exact = config["exact"]
    spec = ensemble_spec(config) if (config["compare"] or not exact) else None
    report = experiments.lattice_norm(name, N, eps, spec=spec, exact=exact, compare=config["compare"])
    if exact:
        report.results["terms_csv"] = forms.build_form(name, N, eps).write_csv(run.output / f"{name}-terms.csv")
    return report


def _cancel_check(config: RunConfig, run: Run) -> ExperimentReport:
    return experiments.cancellation_report(config["sets"], config["N_list"], config["eps_list"])


def _times(config: RunConfig) -> List[float]:
    return config["times"] or [config["t"]]


def _transport(config: RunConfig, run: Run) -> ExperimentReport:
    return experiments.transport_experiment(
        config["rho"],
        config["N"],
        config["eps"],
        config["R"],
        _times(config),
        ensemble_spec(config),
        N_grid=config["N_grid"],
        sigma=config["sigma"],
        dt=config["dt"],
        mapper=run.map,
    )


def _monotonicity(config: RunConfig, run: Run) -> ExperimentReport:
    return experiments.monotonicity_probe(
        config["rho"],
        config["t"],
        config["N"],
        config["eps"],
        config["R"],
        ensemble_spec(config),
        N_grid=config["N_grid"],
        sigma=config["sigma"],
        resolution=config["N_ref"],
        mapper=run.map,
    )


def _sweep(config: RunConfig, run: Run) -> ExperimentReport:
    spec = ensemble_spec(config)
    measure_name = config["measure"]
    if measure_name == "mu1":
        measure = functools.partial(_derivative_measure, experiments.derivative_norm_mu1, spec=spec, mapper=run.map)
    elif measure_name == "mu32":
        measure = functools.partial(_derivative_measure, experiments.derivative_norm_mu32, spec=spec, mapper=run.map)
    elif measure_name == "transport":
        measure = functools.partial(
            _transport_measure, config=config, spec=spec, mapper=run.map
        )
    else:
        raise exceptions.InvalidConfig(f"measure: cannot sweep {measure_name!r}")
    return experiments.sweep_protocol(
        config["N_list"], config["eps_list"], measure, name=f"sweep-{measure_name}", model=config["model"]
    )


def _derivative_measure(estimator, N, eps, spec, mapper):
    return estimator(N, eps, spec, mapper=mapper)


def _transport_measure(N, eps, config, spec, mapper):
    return experiments.transport_slope(
        config["rho"], N, eps, config["R"], config["t"], spec, sigma=config["sigma"], dt=config["dt"], mapper=mapper
    )


def _envelope(config: RunConfig, run: Run) -> ExperimentReport:
    points = [(N, eps) for N in config["N_list"] for eps in config["eps_list"]]
    return experiments.decay_envelope(config["form"], points, config["model"], spec=ensemble_spec(config))


def _converge(config: RunConfig, run: Run) -> ExperimentReport:
    return experiments.convergence_experiment(
        config["N_list"],
        config["eps"],
        config["t"],
        config["sigma"],
        config["sigma_prime"],
        spec=ensemble_spec(config),
        N_ref=config["N_ref"],
        dt=config["dt"],
        mapper=run.map,
    )


def _density(config: RunConfig, run: Run) -> ExperimentReport:
    return experiments.density_convergence(
        config["N_list"], config["eps"], config["R"], ensemble_spec(config), N_grid=config["N_grid"], mapper=run.map
    )


def _centering(config: RunConfig, run: Run) -> ExperimentReport:
    return experiments.centering_check(config["N"], ensemble_spec(config))


DISPATCH: Dict[str, Callable[[RunConfig, Run], ExperimentReport]] = {
    "sample": _sample,
    "evolve": _evolve,
    "energy": _energy,
    "derivative-mc": _derivative,
    "cross-route": _cross_route,
    "lattice": _lattice,
    "cancel-check": _cancel_check,
    "transport": _transport,
    "monotonicity": _monotonicity,
    "sweep": _sweep,
    "envelope": _envelope,
    "converge": _converge,
    "density-diff": _density,
    "centering": _centering,
}


def run_experiment(config: RunConfig, output: Optional[Union[str, Path]] = None) -> ExperimentReport:
    """
    Validate the configuration, run its experiment on a fresh :class:`Run`,
    and write the report and the manifest.

    Raises
    ------
    :class:`exceptions.InvalidConfig`
        Before anything is computed, if the configuration is invalid.
    """
    with Run(config, output=output) as run:
        logger.info(f"Running {config.experiment} with settings {config.to_json()}")
        report = DISPATCH[config.experiment](config, run)
        report.parameters.setdefault("config_hash", config.digest())
        run.record(report)

    return report
