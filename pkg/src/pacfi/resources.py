"""Locating shipped fixtures (overridable with ``PACFI_FIXTURES``)."""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

FIXTURES_ENV = "PACFI_FIXTURES"


def fixtures_dir() -> Path:
    override = os.environ.get(FIXTURES_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("pacfi").joinpath("fixtures")))


def resolve_input(path: str | Path) -> Path:
    """``path`` as given if it exists, else looked up in the fixture directory.

    A leading ``fixtures/`` component is accepted, so ``fixtures/objbind.ir``
    works from any working directory.
    """
    p = Path(path)
    if p.exists():
        return p
    parts = p.parts[1:] if p.parts and p.parts[0] == "fixtures" else p.parts
    candidate = fixtures_dir().joinpath(*parts) if parts else fixtures_dir()
    if candidate.exists():
        return candidate
    raise FileNotFoundError(f"no such file: {path}")


def read_fixture(name: str) -> str:
    return resolve_input(name).read_text(encoding="utf-8")
