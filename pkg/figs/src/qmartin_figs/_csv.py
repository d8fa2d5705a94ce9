"""Strict CSV ingestion for the simulator's output schemas."""

from __future__ import annotations

import csv

import numpy as np


class SchemaError(Exception):
    pass


def read_columns(path, required: tuple[str, ...],
                 optional: tuple[str, ...] = ()) -> dict[str, np.ndarray]:
    """Read a headered CSV into float columns, enforcing the schema."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: empty file")
            missing = [c for c in required if c not in header]
            if missing:
                raise SchemaError(f"{path}: missing columns {missing} in {header}")
            rows = [row for row in reader if row]
    except OSError as exc:
        raise SchemaError(f"{path}: {exc}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = {}
    for name in (*required, *optional):
        if name not in header:
            continue
        idx = header.index(name)
        try:
            data[name] = np.array([float(r[idx]) for r in rows])
        except (ValueError, IndexError) as exc:
            raise SchemaError(f"{path}: bad value in column {name}: {exc}")
    return data


def configure_deterministic_output() -> None:
    """Fixed style; strip run-dependent state from figure files."""
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "qmartin-figs"
    matplotlib.rcParams["figure.dpi"] = 110


def save_figure(fig, path) -> None:
    # Date: None strips timestamps from both SVG and PDF backends
    fig.savefig(path, metadata={"Date": None} if str(path).endswith((".svg", ".pdf"))
                else None)
