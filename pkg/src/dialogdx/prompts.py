"""Versioned prompt template assets.

Templates ship as plain-text package data and can be overridden per
deployment by pointing ``template_dir`` at a directory holding files with
the same names.  Placeholders use ``str.format`` field names.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

TEMPLATE_VERSIONS = {
    "gate": 1,
    "analyzer": 1,
    "doctor": 1,
    "doctor_force": 1,
    "patient": 1,
    "judge": 1,
}


def load_template(name: str, template_dir: str | Path | None = None) -> str:
    if name not in TEMPLATE_VERSIONS:
        raise KeyError(f"unknown prompt template {name!r}")
    filename = f"{name}.txt"
    if template_dir is not None:
        override = Path(template_dir) / filename
        if override.is_file():
            return override.read_text(encoding="utf-8")
    return resources.files("dialogdx").joinpath("templates", filename).read_text(encoding="utf-8")


def render_template(name: str, template_dir: str | Path | None = None, **fields: str) -> str:
    return load_template(name, template_dir).format(**fields)
