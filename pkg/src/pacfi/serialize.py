"""JSON output shared by every structured report.

Output is canonical (sorted keys, fixed separators) so identical inputs give
byte-identical files. PA keys are rejected outright.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from pathlib import Path

from pacfi import SCHEMA_VERSION
from pacfi.pa.model import PaKey


class KeyMaterialError(TypeError):
    """Raised when a PA key reaches a serialisation path."""


def _default(obj):
    if isinstance(obj, PaKey):
        raise KeyMaterialError("refusing to serialise PA key material")
    if isinstance(obj, enum.Enum):
        return obj.value
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)}
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(payload, kind: str | None = None) -> str:
    if kind is not None:
        payload = {"schema": SCHEMA_VERSION, "kind": kind, **payload}
    return json.dumps(payload, default=_default, sort_keys=True, indent=2) + "\n"


def write(path: str | Path, payload, kind: str | None = None) -> None:
    Path(path).write_text(dumps(payload, kind), encoding="utf-8")
