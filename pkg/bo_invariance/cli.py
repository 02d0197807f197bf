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

from typing import Dict, List, Optional, Sequence
import logging

import argparse
import sys
from pathlib import Path

from . import exceptions, forms, reports, runner
from .config import RunConfig, load_config
from .version import __version__

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2

# ensemble sizes used when neither the flags nor the configuration file set one
DEFAULT_SAMPLES = {
    "sample": 10,
    "evolve": 1,
    "energy": 20,
    "derivative-mc": 1000,
    "lattice": 1000,
    "transport": 1000,
    "converge": 5,
    "density-diff": 1000,
}

# options that steer the command line rather than the run
_CLI_ONLY = {"command", "config", "verbose", "cross_route", "sweep", "monotonicity", "envelope", "path"}


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="a flat key = value configuration file; flags override it")
    parser.add_argument("--output", help="output directory (default: $BO_INVARIANCE_OUTPUT or ./bo-invariance-output)")
    parser.add_argument("--workers", type=int, help="size of the worker pool")
    parser.add_argument("--samples", type=int, help="ensemble size")
    parser.add_argument("--seed", type=int, help="base seed of the ensemble")
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug messages")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bo-invariance",
        description="Truncated Benjamin-Ono flows, Gaussian measures, modified energies and Wick lattice sums.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("sample", help="draw and save a seeded Gaussian ensemble")
    _common(p)
    p.add_argument("--k-half", dest="k_half", type=float, help="regularity index k/2")
    p.add_argument("--N-grid", dest="N_grid", type=int, required=True, help="modes kept per draw")

    p = sub.add_parser("evolve", help="run the truncated flow and monitor its invariants")
    _common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--t", type=float, help="final time")
    p.add_argument("--k-half", dest="k_half", type=float)
    p.add_argument("--N-grid", dest="N_grid", type=int)
    p.add_argument("--check-conservation", dest="check_conservation", action="store_true", default=None)
    p.add_argument("--gauge", action="store_true", default=None, help="report the gauge-transform residuals")

    p = sub.add_parser("energy", help="check the derivative formulas against finite differences")
    _common(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--N-grid", dest="N_grid", type=int)

    p = sub.add_parser("derivative-mc", help="sample the norm of a modified-energy derivative")
    _common(p)
    p.add_argument("--N", type=int, nargs="+", required=True)
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--measure", choices=("mu1", "mu32"))
    p.add_argument("--N-grid", dest="N_grid", type=int)
    p.add_argument("--filtered", action="store_true", default=None, help="draw from the flat region only")
    p.add_argument("--cross-route", dest="cross_route", action="store_true", help="compare with the Wick route")
    p.add_argument("--sweep", action="store_true", help="sweep N, then eps, until the values stabilize")

    p = sub.add_parser("lattice", help="the L2 norm of a named multilinear form")
    _common(p)
    p.add_argument("--form", choices=sorted(forms.FORMS), required=True)
    p.add_argument("--N", type=int, nargs="+", required=True)
    p.add_argument("--eps", type=float, nargs="+")
    exact = p.add_mutually_exclusive_group()
    exact.add_argument("--exact", action="store_true", default=None, help="enumerate the form")
    exact.add_argument("--sampled", dest="exact", action="store_false", default=None, help="sample the form")
    p.add_argument("--compare", action="store_true", default=None, help="cross-check the exact norm")
    p.add_argument("--envelope", metavar="MODEL", help="fit a rate model to the norms over every (N, eps)")

    p = sub.add_parser("cancel-check", help="merged-coefficient residuals of the cancellation sets")
    _common(p)
    p.add_argument("--set", dest="sets", choices=sorted(forms.CANCELLATION_SETS), nargs="+")
    p.add_argument("--N", dest="N_list", type=int, nargs="+", required=True)
    p.add_argument("--eps", dest="eps_list", type=float, nargs="+", required=True)

    p = sub.add_parser("transport", help="transport of a Sobolev ball by the backward flow")
    _common(p)
    p.add_argument("--rho", type=float, help="ball radius (default: the whole space)")
    p.add_argument("--N", type=int, nargs="+", required=True)
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--R", type=float)
    p.add_argument("--t", dest="times", type=float, nargs="+", help="times")
    p.add_argument("--sigma", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--N-grid", dest="N_grid", type=int)
    p.add_argument("--N-ref", dest="N_ref", type=int, help="reference resolution of --monotonicity")
    p.add_argument("--monotonicity", action="store_true", help="compare a ball with its image under the reference flow")
    p.add_argument("--sweep", action="store_true", help="sweep the slope over N, then eps")

    p = sub.add_parser("converge", help="convergence of the truncated flows to the reference flow")
    _common(p)
    p.add_argument("--N", dest="N_list", type=int, nargs="+", required=True)
    p.add_argument("--N-ref", dest="N_ref", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--sigma-prime", dest="sigma_prime", type=float)

    p = sub.add_parser("density-diff", help="smooth against sharp cutoff densities")
    _common(p)
    p.add_argument("--N", dest="N_list", type=int, nargs="+", required=True)
    p.add_argument("--eps", type=float)
    p.add_argument("--R", type=float)
    p.add_argument("--N-grid", dest="N_grid", type=int)

    p = sub.add_parser("report", help="run a configuration file, or re-render a saved report")
    p.add_argument("path", type=Path, help="a configuration file, or a report's .json file")
    p.add_argument("--output", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")

    return parser


def _single(args: Dict, key: str) -> None:
    values = args.get(key)
    if isinstance(values, list):
        if len(values) != 1:
            raise exceptions.InvalidConfig(f"{key}: give a single value unless sweeping")
        args[key] = values[0]


def _to_lists(args: Dict, *keys: str) -> None:
    for key in keys:
        if args.get(key) is not None:
            args[f"{key}_list"] = args.pop(key)


def _experiment(command: str, args: Dict) -> str:
    if command == "derivative-mc":
        if args["sweep"]:
            _to_lists(args, "N", "eps")
            return "sweep"
        _single(args, "N")
        _single(args, "eps")
        return "cross-route" if args["cross_route"] else command
    if command == "lattice":
        if args["envelope"] is not None:
            args["model"] = args["envelope"]
            _to_lists(args, "N", "eps")
            return "envelope"
        _single(args, "N")
        _single(args, "eps")
        return command
    if command == "transport":
        if args["sweep"]:
            args["measure"] = "transport"
            _to_lists(args, "N", "eps")
            _single(args, "times")
            args["t"] = args.pop("times")
            return "sweep"
        _single(args, "N")
        _single(args, "eps")
        if args["monotonicity"]:
            _single(args, "times")
            args["t"] = args.pop("times")
            return "monotonicity"
        return command
    if command == "cancel-check" and args.get("sets") is None:
        args["sets"] = sorted(forms.CANCELLATION_SETS)
    return command


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Merge the flags of a subcommand over its ``--config`` file."""
    values = {k: v for k, v in vars(args).items()}
    experiment = _experiment(values["command"], values)

    config = load_config(values["config"]) if values.get("config") is not None else RunConfig()
    for key, value in values.items():
        if key in _CLI_ONLY or value is None:
            continue
        config[key] = value
    config["experiment"] = experiment
    if "samples" not in config and values["command"] in DEFAULT_SAMPLES:
        config["samples"] = DEFAULT_SAMPLES[values["command"]]

    return config


def _configure_logging(verbose: bool) -> None:
    package_logger = logging.getLogger("bo_invariance")
    for existing in package_logger.handlers:
        if getattr(existing, "name", None) == "bo-invariance-cli":
            existing.setLevel(logging.DEBUG if verbose else logging.INFO)
            return
    handler = logging.StreamHandler()
    handler.set_name("bo-invariance-cli")
    handler.setLevel(logging.DEBUG if verbose else logging.INFO)
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    package_logger.addHandler(handler)


def _rerender(path: Path, output: Optional[str]) -> reports.ExperimentReport:
    report = reports.load_report(path)
    reports.emit_report(report, output if output is not None else path.parent)
    return report


def run(argv: Optional[Sequence[str]] = None) -> int:
    """
    Run one subcommand and return its exit code:
    ``0`` on success, ``2`` on invalid flags or configuration,
    and ``1`` if the run failed or any of its checks failed.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INVALID

    _configure_logging(args.verbose)

    try:
        if args.command == "report" and args.path.suffix == ".json":
            report = _rerender(args.path, args.output)
        else:
            if args.command == "report":
                config = load_config(args.path)
                if args.output is not None:
                    config["output"] = args.output
            else:
                config = config_from_args(args)
            config.validate()
            report = runner.run_experiment(config)
    except exceptions.InvalidConfig as e:
        print(f"bo-invariance: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    except exceptions.BOInvarianceException as e:
        logger.exception(f"Run failed: {e}")
        print(f"bo-invariance: {e.__class__.__name__}: {e}", file=sys.stderr)
        return EXIT_FAILURE

    print(report.summary())

    return EXIT_FAILURE if report.checks.any_failed() else EXIT_OK


def main() -> None:
    sys.exit(run())
