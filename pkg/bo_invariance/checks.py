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

from typing import Iterator, List, Optional, Union
import logging

import enum
import collections

import numpy as np

from . import exceptions

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)


class CheckStatus(enum.IntEnum):
    PASSED = 1
    FAILED = 2
    FLAGGED = 3
    SKIPPED = 4


class Check:
    """
    One declared tolerance check: a measured value held against a bound.
    """

    __slots__ = ("name", "status", "value", "bound", "detail")

    def __init__(
        self,
        name: str,
        status: CheckStatus,
        value: Optional[float] = None,
        bound: Optional[float] = None,
        detail: str = "",
    ):
        self.name = name
        self.status = CheckStatus(status)
        self.value = value
        self.bound = bound
        self.detail = detail

    def __repr__(self):
        return f"{self.__class__.__name__}({self.name}: {self.status.name}, value = {self.value}, bound = {self.bound})"

    def __eq__(self, other):
        return isinstance(other, self.__class__) and self.to_json() == other.to_json()

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "status": self.status.name,
            "value": self.value,
            "bound": self.bound,
            "detail": self.detail,
        }

    @classmethod
    def from_json(cls, json: dict) -> "Check":
        return cls(
            json["name"],
            CheckStatus[json["status"]],
            json.get("value"),
            json.get("bound"),
            json.get("detail", ""),
        )


def _number(value) -> Optional[float]:
    if value is None:
        return None
    return float(value)


class CheckLedger:
    """
    The pass/fail record of an experiment.
    Counts of each :class:`CheckStatus` are kept as checks are recorded.
    """

    __slots__ = ("_checks", "_counts")

    def __init__(self, checks: Optional[List[Check]] = None):
        self._checks: List[Check] = []
        self._counts = collections.Counter()
        for check in checks or []:
            self.record(check)

    def record(self, check: Check) -> Check:
        if any(c.name == check.name for c in self._checks):
            raise exceptions.InvalidParameters(f"check {check.name!r} was already recorded")
        self._checks.append(check)
        self._counts[check.status] += 1

        log = logger.info if check.status is CheckStatus.PASSED else logger.warning
        log(f"check {check.name}: {check.status.name} (value = {check.value}, bound = {check.bound}) {check.detail}")

        return check

    def at_most(self, name: str, value: float, bound: float, detail: str = "") -> Check:
        """Pass if ``value <= bound``. A non-finite value fails."""
        value = _number(value)
        passed = bool(np.isfinite(value) and value <= bound)
        return self.record(
            Check(name, CheckStatus.PASSED if passed else CheckStatus.FAILED, value, bound, detail)
        )

    def at_least(self, name: str, value: float, bound: float, detail: str = "") -> Check:
        """Pass if ``value >= bound``. A non-finite value fails."""
        value = _number(value)
        passed = bool(np.isfinite(value) and value >= bound)
        return self.record(
            Check(name, CheckStatus.PASSED if passed else CheckStatus.FAILED, value, bound, detail)
        )

    def expect(self, name: str, condition: bool, detail: str = "") -> Check:
        return self.record(
            Check(name, CheckStatus.PASSED if condition else CheckStatus.FAILED, detail=detail)
        )

    def flag(self, name: str, detail: str, value: Optional[float] = None) -> Check:
        """Record a result that is reported but could not be judged."""
        return self.record(Check(name, CheckStatus.FLAGGED, _number(value), detail=detail))

    def skip(self, name: str, detail: str) -> Check:
        return self.record(Check(name, CheckStatus.SKIPPED, detail=detail))

    def __getitem__(self, item: Union[int, str]) -> Check:
        if isinstance(item, int):
            return self._checks[item]
        for check in self._checks:
            if check.name == item:
                return check
        raise KeyError(item)

    def __iter__(self) -> Iterator[Check]:
        yield from self._checks

    def __len__(self):
        return len(self._checks)

    def __repr__(self):
        return f"{self.__class__.__name__}({dict((s.name, n) for s, n in self._counts.items())})"

    def counts(self) -> collections.Counter:
        """
        Return the number of checks in each :class:`CheckStatus`, as a :class:`collections.Counter`.
        """
        return self._counts.copy()

    def all_passed(self) -> bool:
        """Return ``True`` if **all** of the checks passed (an empty ledger passes)."""
        return self._counts[CheckStatus.PASSED] == len(self)

    def any_failed(self) -> bool:
        """Return ``True`` if **any** of the checks failed."""
        return self._counts[CheckStatus.FAILED] > 0

    def any_flagged(self) -> bool:
        """Return ``True`` if **any** of the checks was flagged."""
        return self._counts[CheckStatus.FLAGGED] > 0

    def to_json(self) -> list:
        return [c.to_json() for c in self._checks]

    @classmethod
    def from_json(cls, json: list) -> "CheckLedger":
        return cls([Check.from_json(c) for c in json])
