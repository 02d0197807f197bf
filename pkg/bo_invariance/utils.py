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

from typing import Optional, Any, Mapping, Iterable, Tuple, Dict, Union
import logging

import enum
import json
from pathlib import Path

import numpy as np

from . import exceptions

logger = logging.getLogger(__name__)
logger.setLevel(logging.DEBUG)

ARCHIVE_FORMAT_VERSION = 1


class StrEnum(str, enum.Enum):
    pass


class SlotPickleMixin:
    """A mixin class which lets classes with __slots__ be pickled."""

    __slots__ = ()

    def __getstate__(self):
        # get all the __slots__ in the inheritance tree
        # if any class has a __dict__, it will be included! no special case needed
        slots = sum((getattr(c, "__slots__", ()) for c in self.__class__.__mro__), ())

        state = dict(
            (slot, getattr(self, slot)) for slot in slots if hasattr(self, slot)
        )

        # __weakref__ should always be removed from the state dict
        state.pop("__weakref__", None)

        return state

    def __setstate__(self, state: Mapping):
        for slot, value in state.items():
            object.__setattr__(self, slot, value)


def chain_get(mapping: Mapping, keys: Iterable[str], default: Optional[Any] = None):
    """
    As Mapping.get(key, default), except that it will try multiple keys before returning the default.

    Parameters
    ----------
    mapping
        The :class:`collections.abc.Mapping` to get from.
    keys
        The keys to try, in order.
    default
        What to return if none of the keys are in the mapping.
        Defaults to ``None``.

    Returns
    -------
    val :
        The value of the first key that was in the mapping,
        or the ``default`` if none of the keys were in the mapping.
    """
    for k in keys:
        try:
            return mapping[k]
        except KeyError:
            pass

    return default


def write_archive(
    path: Union[str, Path], kind: str, header: Mapping[str, Any], **arrays: np.ndarray
) -> Path:
    """
    Write a versioned ``.npz`` archive: a JSON header plus named arrays.
    Ensembles and trajectory checkpoints share this format.

    Parameters
    ----------
    path
        Where to write the archive. A ``.npz`` suffix is added if missing.
    kind
        What the archive holds, e.g. ``"ensemble"`` or ``"trajectory"``.
    header
        JSON-serializable metadata.
    arrays
        The numeric payload.

    Returns
    -------
    path : :class:`pathlib.Path`
        The path that was actually written.
    """
    path = Path(path)
    if path.suffix != ".npz":
        path = path.with_suffix(".npz")
    path.parent.mkdir(parents=True, exist_ok=True)

    full_header = dict(header, kind=kind, format_version=ARCHIVE_FORMAT_VERSION)
    np.savez(path, header=np.array(json.dumps(full_header)), **arrays)

    logger.info(f"Wrote {kind} archive to {path}")

    return path


def read_archive(
    path: Union[str, Path], kind: str
) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """
    Read an archive written by :func:`write_archive`,
    checking that it holds the expected ``kind`` and format version.
    """
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            arrays = {k: data[k] for k in data.files if k != "header"}
    except (OSError, KeyError, ValueError) as e:
        raise exceptions.InvalidArchive(f"could not read archive {path}: {e}")

    if header.get("kind") != kind:
        raise exceptions.InvalidArchive(
            f"archive {path} holds {header.get('kind')!r}, expected {kind!r}"
        )
    if header.get("format_version") != ARCHIVE_FORMAT_VERSION:
        raise exceptions.InvalidArchive(
            f"archive {path} has format version {header.get('format_version')}, expected {ARCHIVE_FORMAT_VERSION}"
        )

    logger.debug(f"Read {kind} archive from {path} with header {header}")

    return header, arrays
