"""Deterministic CSV/JSON writers for experiment outputs.

Every table carries a ``schema_version`` column (JSON: key); floats print at
12 significant digits so identical configurations produce byte-identical
files.
"""

from __future__ import annotations

import json
import os

SCHEMA_VERSION = 1


def format_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def write_csv(path, header: list[str], rows: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(["schema_version"] + list(header)) + "\n")
        for row in rows:
            fh.write(",".join([str(SCHEMA_VERSION)]
                              + [format_value(x) for x in row]) + "\n")


def write_json(path, payload: dict) -> None:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(body, fh, indent=2, sort_keys=True, default=_default)
        fh.write("\n")


def _default(x):
    try:
        import numpy as np
        if isinstance(x, np.generic):
            return x.item()
        if isinstance(x, np.ndarray):
            return x.tolist()
    except ImportError:
        pass
    raise TypeError(f"not JSON serializable: {type(x)}")


def output_dir(explicit: str | None = None) -> str:
    """Resolve the output directory: flag value, else NETSEG_OUTDIR, else cwd."""
    if explicit:
        return explicit
    return os.environ.get("NETSEG_OUTDIR", ".")
