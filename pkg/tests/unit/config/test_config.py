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

import math
from pathlib import Path

import bo_invariance as bo
from bo_invariance import config as cfg, exceptions


def test_init_from_kwargs():
    c = bo.RunConfig(experiment="lattice", N=8)

    assert c["experiment"] == "lattice"
    assert c["N"] == 8


def test_init_from_dict_and_kwargs():
    c = bo.RunConfig({"N": 8}, N=16)

    assert c["N"] == 16


def test_aliases_resolve_to_canonical_keys():
    c = bo.RunConfig(epsilon=0.5, n=8, Ns=[8, 16], base_seed=3)

    assert c["eps"] == 0.5
    assert c["N"] == 8
    assert c["N_list"] == [8, 16]
    assert c["seed"] == 3
    assert set(c) == {"eps", "N", "N_list", "seed"}


def test_unset_keys_read_as_defaults():
    c = bo.RunConfig()

    assert c["eps"] == 0.25
    assert c["rho"] == math.inf
    assert c["samples"] == 100
    assert c["N"] is None
    assert len(c) == 0


def test_unknown_keys_are_rejected():
    with pytest.raises(exceptions.InvalidConfig, match="bogus"):
        bo.RunConfig(bogus=1)


def test_dashed_keys_resolve_like_underscored_keys():
    c = bo.RunConfig(**{"check-conservation": True, "N-grid": 64})

    assert c["check_conservation"] is True
    assert c["N_grid"] == 64
    assert bo.config.canonical_key("base-seed") == "seed"


@pytest.mark.parametrize(
    "key, text, expected",
    [
        ("N", "8", 8),
        ("eps", " 0.5 ", 0.5),
        ("rho", "inf", math.inf),
        ("compare", "yes", True),
        ("compare", "off", False),
        ("N_list", "8, 16,32", [8, 16, 32]),
        ("eps_list", "0.25,0.5", [0.25, 0.5]),
        ("sets", "quartic-E1-bulk, quartic-G-bulk", ["quartic-E1-bulk", "quartic-G-bulk"]),
    ],
)
def test_values_are_parsed_from_text(key, text, expected):
    assert bo.RunConfig({key: text})[key] == expected


def test_python_values_are_coerced():
    c = bo.RunConfig(N=8.0, eps=1, N_list=(8, 16), eps_list=0.5)

    assert c["N"] == 8 and isinstance(c["N"], int)
    assert c["eps"] == 1.0 and isinstance(c["eps"], float)
    assert c["N_list"] == [8, 16]
    assert c["eps_list"] == [0.5]


@pytest.mark.parametrize(
    "key, value", [("N", "eight"), ("N", 2.5), ("N", True), ("compare", "maybe"), ("compare", 1)]
)
def test_bad_values_name_the_key(key, value):
    with pytest.raises(exceptions.InvalidConfig, match=f"^{key}:"):
        bo.RunConfig({key: value})


def test_setting_none_unsets():
    c = bo.RunConfig(N=8)
    c["N"] = None

    assert "N" not in c
    assert c["N"] is None


def test_delitem():
    c = bo.RunConfig(eps=0.5)
    del c["epsilon"]

    assert c["eps"] == 0.25


def test_contains():
    c = bo.RunConfig(eps=0.5)

    assert "eps" in c
    assert "epsilon" in c
    assert "N" not in c
    assert "bogus" not in c


def test_copy_with_changes():
    c = bo.RunConfig(N=8, eps=0.5)
    d = c.copy(N=16)

    assert d["N"] == 16
    assert d["eps"] == 0.5
    assert c["N"] == 8


def test_str():
    c = bo.RunConfig(experiment="cancel-check", N_list=[8, 12], eps=0.5, compare=True)

    assert str(c) == "experiment = cancel-check\nN_list = 8, 12\neps = 0.5\ncompare = True"


def test_str_round_trip():
    c = bo.RunConfig(experiment="transport", N=8, eps_list=[0.25, 0.5], rho=math.inf, filtered=True, sets=["a", "b"])

    assert cfg.parse_config(str(c)) == c


def test_parse_config_skips_comments_and_blank_lines():
    text = """
    # a lattice run
    experiment = lattice   # trailing comment
    form = cubic-F

    N = 8
    """

    c = cfg.parse_config(text)

    assert c == bo.RunConfig(experiment="lattice", form="cubic-F", N=8)


def test_parse_config_rejects_lines_without_equals():
    with pytest.raises(exceptions.InvalidConfig, match="line 2"):
        cfg.parse_config("N = 8\nnonsense\n")


def test_parse_config_rejects_keys_set_twice():
    with pytest.raises(exceptions.InvalidConfig, match="set twice"):
        cfg.parse_config("N = 8\nn = 16\n")


def test_write_and_load_config(tmp_path):
    c = bo.RunConfig(experiment="lattice", form="cubic-F", N=8, rho=2.5)

    path = cfg.write_config(c, tmp_path / "nested" / "run.cfg")

    assert bo.load_config(path) == c


def test_load_missing_config(tmp_path):
    with pytest.raises(exceptions.InvalidConfig):
        bo.load_config(tmp_path / "missing.cfg")


def test_digest_ignores_key_order():
    a = bo.RunConfig(N=8, eps=0.5)
    b = bo.RunConfig(eps=0.5, N=8)

    assert a.digest() == b.digest()
    assert a.digest() != a.copy(N=16).digest()


def test_json_renders_infinities_as_strings():
    assert bo.RunConfig(rho=math.inf).to_json() == {"rho": "inf"}


def test_output_defaults_to_environment(tmp_path):
    assert bo.RunConfig().output == tmp_path / "output"


def test_output_setting_wins(tmp_path):
    assert bo.RunConfig(output=(tmp_path / "elsewhere").as_posix()).output == tmp_path / "elsewhere"


def test_output_without_environment(monkeypatch):
    monkeypatch.delenv(cfg.OUTPUT_ENV_VAR)

    assert bo.RunConfig().output == Path(cfg.DEFAULT_OUTPUT)


@pytest.mark.parametrize(
    "settings",
    [
        dict(experiment="lattice", form="cubic-F", N=8),
        dict(experiment="evolve", N=8, dt=1e-3),
        dict(experiment="cancel-check", sets=["quartic-E1-bulk"], N_list=[8, 12], eps_list=[0.25]),
        dict(experiment="transport", N=8, N_grid=32, samples=4),
        dict(experiment="converge", N_list=[8, 16], N_ref=64, sigma=0.1, sigma_prime=0.05),
        dict(experiment="sweep", N_list=[8, 16], eps_list=[0.25], measure="transport", dt=1e-3),
    ],
)
def test_valid_configurations(settings):
    c = bo.RunConfig(settings)

    assert c.validate() is c


@pytest.mark.parametrize(
    "settings, message",
    [
        (dict(), "experiment: missing"),
        (dict(experiment="nope"), "experiment: unknown experiment"),
        (dict(experiment="lattice", N=8), "form: missing required key"),
        (dict(experiment="sweep", N_list=[8]), "eps_list: missing required key"),
        (dict(experiment="evolve", N=0), "N: must be at least 1"),
        (dict(experiment="converge", N_list=[0, 8]), "N_list: every N must be at least 1"),
        (dict(experiment="evolve", N=8, seed=-1), "seed: must be non-negative"),
        (dict(experiment="transport", N=8, R=0), "R: must be positive"),
        (dict(experiment="transport", N=8, rho=0), "rho: must be positive"),
        (dict(experiment="evolve", N=8, t=-1), "t: times must be non-negative"),
        (dict(experiment="sample", N_grid=8, k_half=0.25), "k_half: must be at least 1/2"),
        (dict(experiment="evolve", N=8, eps=1.0), "eps: must lie in"),
        (dict(experiment="sweep", N_list=[8], eps_list=[0.25, 0.0]), "eps: must lie in"),
        (dict(experiment="derivative-mc", N=8, measure="transport"), "measure:"),
        (dict(experiment="derivative-mc", N=8, samples=1), "samples: Monte Carlo needs"),
        (dict(experiment="evolve", N=32, dt=0.1), "dt: violates the CFL guard"),
        (dict(experiment="sweep", N_list=[8, 64], eps_list=[0.25], measure="transport", dt=0.01), "dt: violates the CFL guard"),
        (dict(experiment="transport", N=8, N_grid=16), "N_grid: the sampling grid"),
        (dict(experiment="converge", N_list=[8, 16], N_ref=32), "N_ref: the reference resolution"),
        (dict(experiment="converge", N_list=[8], sigma=0.05, sigma_prime=0.1), "sigma: must exceed"),
        (dict(experiment="lattice", form="nope", N=8), "form:"),
        (dict(experiment="lattice", form="sextic-G", N=32, exact=True), "N:.*enumeration budget"),
        (dict(experiment="cancel-check", sets=["nope"], N_list=[8], eps_list=[0.5]), "sets: unknown"),
        (dict(experiment="cancel-check", sets=["quartic-E1-bulk"], N_list=[128], eps_list=[0.5]), "N_list: exceeds"),
    ],
)
def test_invalid_configurations(settings, message):
    with pytest.raises(exceptions.InvalidConfig, match=message):
        bo.RunConfig(settings).validate()


def test_cfl_guard_only_needs_the_smallest_N_for_convergence():
    bo.RunConfig(experiment="converge", N_list=[8, 64], dt=0.1).validate()
