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

import pytest

import bo_invariance as bo
from bo_invariance import cli, reports


def parse(*argv):
    return cli.config_from_args(cli.build_parser().parse_args(list(argv)))


def test_version(capsys):
    assert cli.run(["--version"]) == cli.EXIT_OK
    assert bo.__version__ in capsys.readouterr().out


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["nope"],
        ["lattice", "--form", "nope", "--N", "4"],
        ["evolve"],
        ["lattice", "--form", "cubic-F", "--N", "4", "--exact", "--sampled"],
    ],
)
def test_bad_flags_are_invalid(argv):
    assert cli.run(argv) == cli.EXIT_INVALID


@pytest.mark.parametrize(
    "argv",
    [
        ["evolve", "--N", "32", "--dt", "0.1"],
        ["derivative-mc", "--N", "4", "8"],
        ["lattice", "--form", "sextic-G", "--N", "32", "--exact"],
        ["converge", "--N", "8", "16", "--N-ref", "32"],
    ],
)
def test_invalid_configurations_exit_before_running(argv, tmp_path, capsys):
    assert cli.run(argv) == cli.EXIT_INVALID
    assert "invalid configuration" in capsys.readouterr().err
    assert not (tmp_path / "output").exists()


def test_lattice(tmp_path, capsys):
    code = cli.run(["lattice", "--form", "cubic-F", "--N", "4", "--eps", "0.5", "--exact", "--output", str(tmp_path)])

    assert code == cli.EXIT_OK
    assert (tmp_path / "lattice.json").exists()
    assert (tmp_path / "cubic-F-terms.csv").exists()
    assert capsys.readouterr().out.startswith("lattice")


def test_cancel_check_defaults_to_every_set(tmp_path):
    assert cli.run(["cancel-check", "--N", "8", "--eps", "0.5"]) == cli.EXIT_OK

    report = bo.load_report(tmp_path / "output" / "cancellation.json")

    assert report.parameters["sets"] == sorted(bo.forms.CANCELLATION_SETS)


def test_evolve(tmp_path):
    assert cli.run(["evolve", "--N", "4", "--t", "0.01", "--dt", "1e-3"]) == cli.EXIT_OK

    assert (tmp_path / "output" / "trajectory.npz").exists()
    assert (tmp_path / "output" / "manifest.json").exists()


def test_report_runs_a_configuration_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("experiment = cancel-check\nsets = quartic-E1-bulk\nN_list = 8\neps_list = 0.5\n")

    assert cli.run(["report", str(path), "--output", str(tmp_path / "out")]) == cli.EXIT_OK
    assert (tmp_path / "out" / "cancellation.json").exists()


def test_report_rerenders_a_saved_report(tmp_path):
    cli.run(["lattice", "--form", "cubic-F", "--N", "4", "--eps", "0.5", "--exact", "--output", str(tmp_path)])

    assert cli.run(["report", str(tmp_path / "lattice.json"), "--output", str(tmp_path / "again")]) == cli.EXIT_OK
    assert (tmp_path / "again" / "lattice.json").exists()


def test_failed_checks_exit_with_failure(tmp_path):
    report = bo.ExperimentReport("failing")
    report.checks.at_most("too big", 2.0, 1.0)
    reports.emit_report(report, tmp_path)

    assert cli.run(["report", str(tmp_path / "failing.json")]) == cli.EXIT_FAILURE


def test_missing_config_file_is_invalid(tmp_path):
    argv = ["lattice", "--config", str(tmp_path / "missing.cfg"), "--form", "cubic-F", "--N", "4"]

    assert cli.run(argv) == cli.EXIT_INVALID


def test_flags_override_the_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("eps = 0.25\nseed = 9\n")

    config = parse("lattice", "--config", str(path), "--form", "cubic-F", "--N", "4", "--eps", "0.5")

    assert config["eps"] == 0.5
    assert config["seed"] == 9
    assert config["experiment"] == "lattice"


def test_default_samples_per_command():
    assert parse("sample", "--N-grid", "8")["samples"] == cli.DEFAULT_SAMPLES["sample"]
    assert parse("sample", "--N-grid", "8", "--samples", "3")["samples"] == 3


def test_config_file_samples_win_over_defaults(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("samples = 7\n")

    assert parse("sample", "--config", str(path), "--N-grid", "8")["samples"] == 7


def test_cross_route_flag():
    config = parse("derivative-mc", "--N", "8", "--cross-route")

    assert config["experiment"] == "cross-route"
    assert config["N"] == 8


def test_derivative_sweep_flag():
    config = parse("derivative-mc", "--N", "8", "16", "--eps", "0.5", "0.25", "--measure", "mu32", "--sweep")

    assert config["experiment"] == "sweep"
    assert config["N_list"] == [8, 16]
    assert config["eps_list"] == [0.5, 0.25]
    assert config["measure"] == "mu32"
    assert "N" not in config


def test_lattice_envelope_flag():
    config = parse("lattice", "--form", "cubic-F", "--N", "8", "16", "--eps", "0.5", "--envelope", "inverse-sqrtN")

    assert config["experiment"] == "envelope"
    assert config["model"] == "inverse-sqrtN"
    assert config["N_list"] == [8, 16]


def test_lattice_sampled_flag():
    assert parse("lattice", "--form", "cubic-F", "--N", "8", "--sampled")["exact"] is False
    assert "exact" not in parse("lattice", "--form", "cubic-F", "--N", "8")


def test_transport_flags():
    config = parse("transport", "--N", "8", "--t", "0.1", "0.2", "--rho", "3")

    assert config["experiment"] == "transport"
    assert config["times"] == [0.1, 0.2]
    assert config["rho"] == 3.0


def test_monotonicity_flag():
    config = parse("transport", "--N", "8", "--t", "0.1", "--monotonicity", "--N-ref", "64")

    assert config["experiment"] == "monotonicity"
    assert config["t"] == 0.1
    assert config["N_ref"] == 64


def test_transport_sweep_flag():
    config = parse("transport", "--N", "8", "16", "--eps", "0.5", "--t", "0.1", "--sweep")

    assert config["experiment"] == "sweep"
    assert config["measure"] == "transport"
    assert config["t"] == 0.1
    assert config["N_list"] == [8, 16]
