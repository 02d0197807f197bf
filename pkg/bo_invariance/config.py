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

from typing import Any, Callable, Dict, Iterator, List, Mapping, MutableMapping, Optional, Tuple, Union
import logging

import hashlib
import json
import math
import os
from pathlib import Path

from . import exceptions, forms, utils
from .dynamics import MAX_DT_N_SQUARED

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

T_CONFIG_VALUE = Union[str, int, float, bool, List[int], List[float], List[str], None]

OUTPUT_ENV_VAR = "BO_INVARIANCE_OUTPUT"
DEFAULT_OUTPUT = "bo-invariance-output"

EXPERIMENTS = (
    "sample",
    "evolve",
    "energy",
    "derivative-mc",
    "cross-route",
    "lattice",
    "cancel-check",
    "transport",
    "monotonicity",
    "sweep",
    "envelope",
    "converge",
    "density-diff",
    "centering",
)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_float(text: str) -> float:
    return float(text.strip())


def _list_of(parse: Callable[[str], Any]) -> Callable[[str], list]:
    def parse_list(text: str) -> list:
        return [parse(item) for item in text.split(",") if item.strip()]

    return parse_list


_PARSERS = {
    "int": lambda text: int(text.strip()),
    "float": _parse_float,
    "str": lambda text: text.strip(),
    "bool": _parse_bool,
    "int-list": _list_of(lambda text: int(text.strip())),
    "float-list": _list_of(_parse_float),
    "str-list": _list_of(lambda text: text.strip()),
}


class ConfigKey:
    """One documented configuration key."""

    __slots__ = ("name", "kind", "default", "help", "aliases")

    def __init__(self, name: str, kind: str, default: T_CONFIG_VALUE, help: str, aliases: Tuple[str, ...] = ()):
        self.name = name
        self.kind = kind
        self.default = default
        self.help = help
        self.aliases = aliases

    def __repr__(self):
        return f"{self.__class__.__name__}({self.name}: {self.kind} = {self.default!r})"

    def parse(self, value: Any) -> T_CONFIG_VALUE:
        if value is None:
            return None
        if isinstance(value, str):
            return _PARSERS[self.kind](value)
        if self.kind.endswith("-list"):
            if not isinstance(value, (list, tuple)):
                value = [value]
            return [_PARSERS[self.kind](str(v))[0] for v in value]
        if self.kind == "bool":
            if not isinstance(value, bool):
                raise ValueError(f"not a boolean: {value!r}")
            return value
        if self.kind == "int":
            if isinstance(value, bool) or int(value) != value:
                raise ValueError(f"not an integer: {value!r}")
            return int(value)
        if self.kind == "float":
            if isinstance(value, bool):
                raise ValueError(f"not a number: {value!r}")
            return float(value)
        return str(value)


SCHEMA: Dict[str, ConfigKey] = {
    key.name: key
    for key in (
        ConfigKey("experiment", "str", None, "which experiment to run", ("name",)),
        ConfigKey("N", "int", None, "truncation parameter", ("n",)),
        ConfigKey("N_list", "int-list", None, "truncation parameters to sweep", ("n_list", "Ns")),
        ConfigKey("N_grid", "int", None, "modes kept in every Gaussian draw", ("n_grid",)),
        ConfigKey("N_ref", "int", None, "resolution of the reference flow", ("n_ref", "resolution")),
        ConfigKey("eps", "float", 0.25, "width of the smoothed projector's transition", ("epsilon",)),
        ConfigKey("eps_list", "float-list", None, "eps values to sweep", ("epsilon_list",)),
        ConfigKey("R", "float", 1.0, "radius of the density cutoffs", ("r",)),
        ConfigKey("rho", "float", math.inf, "radius of the H^{1/2-sigma} ball", ()),
        ConfigKey("sigma", "float", 0.1, "the ball and error norms are H^{1/2-sigma}", ()),
        ConfigKey("sigma_prime", "float", 0.05, "initial data are measured in H^{1/2-sigma_prime}", ()),
        ConfigKey("k_half", "float", 1.0, "regularity index k/2 of the Gaussian measure", ()),
        ConfigKey("t", "float", 1.0, "final time", ("t_end", "t_bar")),
        ConfigKey("times", "float-list", None, "times of the transport experiment", ()),
        ConfigKey("dt", "float", 1e-3, "time step", ()),
        ConfigKey("samples", "int", 100, "ensemble size", ("count",)),
        ConfigKey("seed", "int", 0, "base seed of the ensemble", ("base_seed",)),
        ConfigKey("form", "str", None, "named multilinear form", ()),
        ConfigKey("sets", "str-list", None, "named cancellation sets", ("set",)),
        ConfigKey("measure", "str", "mu1", "mu1 or mu32", ()),
        ConfigKey("model", "str", "sqrt-eps", "rate model for decay fits", ()),
        ConfigKey("exact", "bool", None, "force (or forbid) exact enumeration", ()),
        ConfigKey("compare", "bool", False, "cross-check exact norms against other routes", ()),
        ConfigKey("filtered", "bool", False, "filter draws to the flat region", ()),
        ConfigKey("check_conservation", "bool", False, "report the drift of the invariants", ()),
        ConfigKey("gauge", "bool", False, "report the gauge-transform residuals of the first trajectory", ()),
        ConfigKey("workers", "int", 1, "size of the worker pool", ("jobs",)),
        ConfigKey("output", "str", None, f"output directory (default: ${OUTPUT_ENV_VAR} or ./{DEFAULT_OUTPUT})", ("output_dir",)),
    )
}

_ALIASES = {alias: key.name for key in SCHEMA.values() for alias in key.aliases}
_KEYS = {**{name: name for name in SCHEMA}, **_ALIASES}

REQUIRED: Dict[str, Tuple[str, ...]] = {
    "sample": ("N_grid",),
    "evolve": ("N",),
    "energy": ("N",),
    "derivative-mc": ("N",),
    "cross-route": ("N",),
    "lattice": ("form", "N"),
    "cancel-check": ("sets", "N_list", "eps_list"),
    "transport": ("N",),
    "monotonicity": ("N",),
    "sweep": ("N_list", "eps_list"),
    "envelope": ("form", "N_list", "eps_list"),
    "converge": ("N_list",),
    "density-diff": ("N_list",),
    "centering": ("N",),
}

MONTE_CARLO = {"derivative-mc", "cross-route", "transport", "monotonicity", "sweep", "density-diff", "centering"}
SAMPLING_RATIO = 4
MEASURES = {"derivative-mc": ("mu1", "mu32"), "sweep": ("mu1", "mu32", "transport")}


def canonical_key(key: str) -> str:
    """Resolve a key or an alias; dashes may stand for underscores, as on the command line."""
    key = str(key)
    name = utils.chain_get(_KEYS, (key, key.replace("-", "_")))
    if name is None:
        raise exceptions.InvalidConfig(f"{key}: unknown configuration key")
    return name


def default_output() -> Path:
    return Path(os.environ.get(OUTPUT_ENV_VAR, DEFAULT_OUTPUT))


class RunConfig(MutableMapping[str, T_CONFIG_VALUE]):
    """
    The flat key-value configuration of one run.
    It behaves like a dictionary of documented keys (see ``SCHEMA``);
    aliases such as ``epsilon`` for ``eps`` are resolved on the way in,
    and values are parsed to the key's type.
    Keys that are not set read as their defaults.
    """

    __slots__ = ("_values",)

    def __init__(self, mapping: Optional[Mapping[str, Any]] = None, **values: Any):
        """
        Parameters
        ----------
        mapping
            An optional mapping which provides initial key-value pairs.
        values
            Additional keys, provided as keyword arguments.
        """
        self._values: Dict[str, T_CONFIG_VALUE] = {}
        for key, value in dict(mapping or {}, **values).items():
            self[key] = value

    def __getitem__(self, key: str) -> T_CONFIG_VALUE:
        key = canonical_key(key)
        return self._values.get(key, SCHEMA[key].default)

    def __setitem__(self, key: str, value: Any) -> None:
        key = canonical_key(key)
        if value is None:
            self._values.pop(key, None)
            return
        try:
            self._values[key] = SCHEMA[key].parse(value)
        except (TypeError, ValueError) as e:
            raise exceptions.InvalidConfig(f"{key}: expected {SCHEMA[key].kind}, got {value!r} ({e})")

    def __delitem__(self, key: str) -> None:
        del self._values[canonical_key(key)]

    def __contains__(self, key) -> bool:
        try:
            return canonical_key(key) in self._values
        except exceptions.InvalidConfig:
            return False

    def __iter__(self) -> Iterator[str]:
        yield from self._values.keys()

    def __len__(self) -> int:
        return len(self._values)

    def __eq__(self, other):
        return isinstance(other, self.__class__) and self._values == other._values

    def __repr__(self):
        return f"{self.__class__.__name__}({self._values})"

    def __str__(self) -> str:
        return "\n".join(f"{k} = {_render(v)}" for k, v in self._values.items())

    def copy(self, **values: Any) -> "RunConfig":
        """
        Produce a copy of this :class:`RunConfig`,
        with the given ``values`` changed.
        """
        return self.__class__(self._values, **values)

    @property
    def experiment(self) -> str:
        return self["experiment"]

    @property
    def output(self) -> Path:
        output = self["output"]
        return Path(output) if output is not None else default_output()

    def to_json(self) -> dict:
        return {k: _jsonable(v) for k, v in self._values.items()}

    def digest(self) -> str:
        """A SHA-256 hash of the settings, independent of key order."""
        payload = json.dumps(self.to_json(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()

    def validate(self) -> "RunConfig":
        """
        Check the configuration against the constraints of its experiment.
        Nothing is computed before this passes.

        Raises
        ------
        :class:`exceptions.InvalidConfig`
            Naming the key or the guard that failed.
        """
        experiment = self["experiment"]
        if experiment is None:
            raise exceptions.InvalidConfig("experiment: missing required key")
        if experiment not in EXPERIMENTS:
            raise exceptions.InvalidConfig(
                f"experiment: unknown experiment {experiment!r}; known experiments are {', '.join(EXPERIMENTS)}"
            )

        for key in REQUIRED[experiment]:
            if self[key] is None or self[key] == []:
                raise exceptions.InvalidConfig(f"{key}: missing required key for {experiment}")

        for key in ("N", "N_grid", "N_ref", "samples", "workers"):
            if self[key] is not None and self[key] < 1:
                raise exceptions.InvalidConfig(f"{key}: must be at least 1, not {self[key]}")
        if any(N < 1 for N in self["N_list"] or []):
            raise exceptions.InvalidConfig("N_list: every N must be at least 1")
        if self["seed"] < 0:
            raise exceptions.InvalidConfig(f"seed: must be non-negative, not {self['seed']}")
        for key in ("R", "dt"):
            if not self[key] > 0:
                raise exceptions.InvalidConfig(f"{key}: must be positive, not {self[key]}")
        if not self["rho"] > 0:
            raise exceptions.InvalidConfig(f"rho: must be positive, not {self['rho']}")
        if self["t"] < 0 or any(t < 0 for t in self["times"] or []):
            raise exceptions.InvalidConfig("t: times must be non-negative")
        if self["k_half"] < 0.5:
            raise exceptions.InvalidConfig(f"k_half: must be at least 1/2, not {self['k_half']}")

        for eps in [self["eps"], *(self["eps_list"] or [])]:
            if not 0 < eps < 1:
                raise exceptions.InvalidConfig(f"eps: must lie in (0, 1), not {eps}")

        measures = MEASURES.get(experiment)
        if measures is not None and self["measure"] not in measures:
            raise exceptions.InvalidConfig(
                f"measure: {experiment} takes one of {', '.join(measures)}, not {self['measure']!r}"
            )

        if experiment in MONTE_CARLO and self["samples"] < 2:
            raise exceptions.InvalidConfig(f"samples: Monte Carlo needs at least 2 samples, not {self['samples']}")

        self._validate_flow(experiment)
        self._validate_budgets(experiment)

        if experiment in ("transport", "monotonicity") and self["N_grid"] is not None:
            if self["N_grid"] < SAMPLING_RATIO * self["N"]:
                raise exceptions.InvalidConfig(
                    f"N_grid: the sampling grid must satisfy N_grid >= {SAMPLING_RATIO} N ({self['N_grid']} < {SAMPLING_RATIO * self['N']})"
                )

        if experiment == "converge":
            if self["N_ref"] is not None and self["N_ref"] < SAMPLING_RATIO * max(self["N_list"]):
                raise exceptions.InvalidConfig(
                    f"N_ref: the reference resolution must satisfy N_ref >= {SAMPLING_RATIO} max(N_list) ({self['N_ref']} < {SAMPLING_RATIO * max(self['N_list'])})"
                )
            if not self["sigma"] > self["sigma_prime"]:
                raise exceptions.InvalidConfig(
                    f"sigma: must exceed sigma_prime ({self['sigma']} <= {self['sigma_prime']})"
                )

        logger.debug(f"Validated configuration for {experiment}: {self._values}")

        return self

    def _validate_flow(self, experiment: str) -> None:
        if experiment in ("evolve", "transport"):
            N_values = [self["N"]]
        elif experiment == "sweep" and self["measure"] == "transport":
            N_values = [max(self["N_list"])]
        elif experiment == "converge":
            # steps are clipped per N, so the configured step only has to suit the smallest N
            N_values = [min(self["N_list"])]
        else:
            return

        for N in N_values:
            if self["dt"] * N ** 2 > MAX_DT_N_SQUARED:
                raise exceptions.InvalidConfig(
                    f"dt: violates the CFL guard dt * N^2 <= {MAX_DT_N_SQUARED} (dt = {self['dt']}, N = {N}, dt * N^2 = {self['dt'] * N ** 2:.4g})"
                )

    def _validate_budgets(self, experiment: str) -> None:
        if experiment == "lattice":
            definition = _definition(self["form"])
            if self["exact"] and not forms.within_budget(definition.degree, self["N"]):
                raise exceptions.InvalidConfig(
                    f"N: {self['form']} at N = {self['N']} exceeds the enumeration budget N <= {forms.FORM_BUDGETS[definition.degree]}"
                )
            if not self["exact"] and not forms.within_budget(definition.degree, self["N"]) and self["samples"] < 2:
                raise exceptions.InvalidConfig("samples: Monte Carlo needs at least 2 samples")
        elif experiment == "cancel-check":
            for name in self["sets"]:
                if name not in forms.CANCELLATION_SETS:
                    raise exceptions.InvalidConfig(f"sets: unknown cancellation set {name!r}")
            if max(self["N_list"]) > forms.FORM_BUDGETS[4]:
                raise exceptions.InvalidConfig(
                    f"N_list: exceeds the enumeration budget N <= {forms.FORM_BUDGETS[4]}"
                )
        elif experiment == "envelope":
            definition = _definition(self["form"])
            if self["samples"] < 2 and not all(
                forms.within_budget(definition.degree, N) for N in self["N_list"]
            ):
                raise exceptions.InvalidConfig("samples: Monte Carlo needs at least 2 samples beyond the enumeration budget")


def _definition(name: str) -> "forms.FormDefinition":
    try:
        return forms.get_definition(name)
    except exceptions.UnknownForm as e:
        raise exceptions.InvalidConfig(f"form: {e}")


def _render(value: T_CONFIG_VALUE) -> str:
    if isinstance(value, (list, tuple)):
        return ", ".join(_render(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _jsonable(value: T_CONFIG_VALUE):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def parse_config(text: str) -> RunConfig:
    """
    Parse flat ``key = value`` lines.
    ``#`` starts a comment; lists are comma-separated.
    """
    config = RunConfig()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise exceptions.InvalidConfig(f"line {number}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if canonical_key(key) in config:
            raise exceptions.InvalidConfig(f"{key}: set twice (line {number})")
        config[key] = value.strip()
    return config


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read a flat configuration file written by hand or by ``str(config)``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise exceptions.InvalidConfig(f"could not read configuration {path}: {e}")

    config = parse_config(text)

    logger.info(f"Loaded configuration from {path}")

    return config


def write_config(config: RunConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(str(config) + "\n")
    return path
