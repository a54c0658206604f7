"""objbind / retbind annotation lines.

Lines look like ``irqaction: objbind(name, handler)`` or
``kref_put: retbind(release)``. An objbind's first argument is the binding
field (``&field`` binds to the field's address); the rest name the bound code
pointers, ``*`` meaning every code-pointer field of the record.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

_LINE_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*:\s*(objbind|retbind)\s*\(([^)]*)\)\s*$")


class AnnotationError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ObjBind:
    record: str
    field: str
    pointers: tuple[str, ...]
    by_address: bool = False

    def text(self) -> str:
        bind = ("&" if self.by_address else "") + self.field
        return f"{self.record}: objbind({', '.join((bind, *self.pointers))})"


@dataclass(frozen=True, order=True)
class RetBind:
    function: str
    params: tuple[str, ...]

    def text(self) -> str:
        return f"{self.function}: retbind({', '.join(self.params)})"


Annotation = ObjBind | RetBind


def parse_annotation(line: str) -> Annotation:
    m = _LINE_RE.match(line)
    if not m:
        raise AnnotationError(f"bad annotation {line!r}")
    owner, kind, body = m.groups()
    args = [a.strip() for a in body.split(",") if a.strip()]
    if kind == "retbind":
        if not args:
            raise AnnotationError("retbind needs at least one parameter")
        return RetBind(owner, tuple(args))
    if len(args) < 2:
        raise AnnotationError("objbind needs a binding field and at least one pointer")
    bind = args[0]
    by_address = bind.startswith("&")
    return ObjBind(owner, bind.lstrip("&"), tuple(args[1:]), by_address)


def parse_annotations(text: str) -> list[Annotation]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(parse_annotation(line))
    return out


def format_annotations(annotations) -> str:
    return "".join(a.text() + "\n" for a in annotations)
