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

from typing import Any, Dict, List, Optional, Union
import logging

import csv
import json
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from . import utils, exceptions
from .checks import CheckLedger
from .version import __version__

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

REPORT_SCHEMA_VERSION = 1


def to_jsonable(obj: Any) -> Any:
    """Convert numpy values and objects with a ``to_json`` method into plain JSON types."""
    if hasattr(obj, "to_json"):
        return to_jsonable(obj.to_json())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        return value if np.isfinite(value) else str(value)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"real": float(obj.real), "imag": float(obj.imag)}
    if isinstance(obj, utils.StrEnum):
        return str(obj.value)
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


class FigureSpec(utils.SlotPickleMixin):
    """A line plot of one table column against another."""

    __slots__ = ("table", "x", "y", "yerr", "group", "logx", "logy", "title")

    def __init__(
        self,
        table: str,
        x: str,
        y: str,
        yerr: Optional[str] = None,
        group: Optional[str] = None,
        logx: bool = False,
        logy: bool = False,
        title: str = "",
    ):
        self.table = table
        self.x = x
        self.y = y
        self.yerr = yerr
        self.group = group
        self.logx = logx
        self.logy = logy
        self.title = title

    def __repr__(self):
        return f"{self.__class__.__name__}({self.table}: {self.y} vs {self.x})"

    def to_json(self) -> dict:
        return {slot: getattr(self, slot) for slot in self.__slots__}

    @classmethod
    def from_json(cls, json: dict) -> "FigureSpec":
        return cls(**json)


class ExperimentReport(utils.SlotPickleMixin):
    """
    The record of one experiment run: its parameters, scalar results (Monte Carlo
    values always with their standard errors), tables, fits, checks and timing.
    """

    __slots__ = ("name", "parameters", "results", "tables", "fits", "checks", "wall_clock", "figures")

    def __init__(
        self,
        name: str,
        parameters: Optional[Dict[str, Any]] = None,
        results: Optional[Dict[str, Any]] = None,
        tables: Optional[Dict[str, List[Dict[str, Any]]]] = None,
        fits: Optional[Dict[str, Any]] = None,
        checks: Optional[CheckLedger] = None,
        wall_clock: float = 0.0,
        figures: Optional[List[FigureSpec]] = None,
    ):
        self.name = name
        self.parameters = dict(parameters or {})
        self.results = dict(results or {})
        self.tables = {k: list(v) for k, v in (tables or {}).items()}
        self.fits = dict(fits or {})
        self.checks = checks if checks is not None else CheckLedger()
        self.wall_clock = float(wall_clock)
        self.figures = list(figures or [])

    def __repr__(self):
        return f"{self.__class__.__name__}({self.name}, checks = {self.checks}, wall_clock = {self.wall_clock:.3g}s)"

    @property
    def passed(self) -> bool:
        return not self.checks.any_failed()

    def add_row(self, table: str, **row) -> None:
        self.tables.setdefault(table, []).append(row)

    def summary(self) -> str:
        """A short human-readable summary, one line per result and check."""
        lines = [f"{self.name} ({self.wall_clock:.3g}s)"]
        for key, value in self.results.items():
            lines.append(f"  {key} = {_format(value)}")
        for name, fit in self.fits.items():
            lines.append(f"  fit {name}: {fit!r}")
        for check in self.checks:
            lines.append(f"  [{check.status.name}] {check.name}: {check.value} (bound {check.bound}) {check.detail}".rstrip())
        return "\n".join(lines)

    def to_json(self) -> dict:
        return to_jsonable(
            {
                "schema_version": REPORT_SCHEMA_VERSION,
                "bo_invariance_version": __version__,
                "name": self.name,
                "parameters": self.parameters,
                "results": self.results,
                "tables": self.tables,
                "fits": self.fits,
                "checks": self.checks.to_json(),
                "wall_clock": self.wall_clock,
                "figures": [f.to_json() for f in self.figures],
            }
        )

    @classmethod
    def from_json(cls, json: dict) -> "ExperimentReport":
        version = json.get("schema_version")
        if version != REPORT_SCHEMA_VERSION:
            raise exceptions.InvalidConfig(
                f"report schema version {version} is not supported (expected {REPORT_SCHEMA_VERSION})"
            )
        return cls(
            json["name"],
            parameters=json["parameters"],
            results=json["results"],
            tables=json["tables"],
            fits=json["fits"],
            checks=CheckLedger.from_json(json["checks"]),
            wall_clock=json["wall_clock"],
            figures=[FigureSpec.from_json(f) for f in json["figures"]],
        )


def _format(value: Any) -> str:
    if hasattr(value, "to_json"):
        value = value.to_json()
    if isinstance(value, dict) and "value" in value and "standard_error" in value:
        if value.get("method") == "monte-carlo":
            return f"{value['value']:.6g} +/- {value['standard_error']:.2g}"
        return f"{value['value']:.6g}"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _write_csv(report: ExperimentReport, path: Path) -> Path:
    rows = [dict(table=table, **row) for table, records in report.tables.items() for row in records]
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)

    with path.open("w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, quoting=csv.QUOTE_MINIMAL)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: to_jsonable(v) for k, v in row.items()})

    return path


def _plot(report: ExperimentReport, spec: FigureSpec, path: Path) -> Path:
    records = report.tables.get(spec.table, [])
    groups: Dict[Any, List[dict]] = {}
    for row in records:
        groups.setdefault(row.get(spec.group) if spec.group else None, []).append(row)

    fig, ax = plt.subplots(figsize=(6.4, 3.8))
    for key, rows in groups.items():
        rows = sorted(rows, key=lambda r: r[spec.x])
        x = [r[spec.x] for r in rows]
        y = [r[spec.y] for r in rows]
        label = None if key is None else f"{spec.group} = {key}"
        if spec.yerr is not None:
            ax.errorbar(x, y, yerr=[r[spec.yerr] for r in rows], marker="o", capsize=3, label=label)
        else:
            ax.plot(x, y, marker="o", label=label)

    if spec.logx:
        ax.set_xscale("log")
    if spec.logy:
        ax.set_yscale("log")
    ax.set_xlabel(spec.x)
    ax.set_ylabel(spec.y)
    ax.set_title(spec.title or report.name)
    if any(k is not None for k in groups):
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)

    return path


def emit_report(report: ExperimentReport, directory: Union[str, Path]) -> List[Path]:
    """
    Write ``<name>.json``, ``<name>.csv`` (one row per table record, with a
    ``table`` column) and one SVG per figure into ``directory``.

    Returns
    -------
    paths : list of :class:`pathlib.Path`
        Every file written.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)

    json_path = directory / f"{report.name}.json"
    json_path.write_text(json.dumps(report.to_json(), indent=2))
    paths = [json_path]

    if report.tables:
        paths.append(_write_csv(report, directory / f"{report.name}.csv"))

    for index, spec in enumerate(report.figures):
        suffix = "" if len(report.figures) == 1 else f"-{index}"
        paths.append(_plot(report, spec, directory / f"{report.name}{suffix}.svg"))

    logger.info(f"Wrote report {report.name} to {directory}")

    return paths


def load_report(path: Union[str, Path]) -> ExperimentReport:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, ValueError) as e:
        raise exceptions.InvalidConfig(f"could not read report {path}: {e}")
    return ExperimentReport.from_json(payload)
