"""Deterministic artifact writers: trajectory CSVs and the run manifest.

Numbers are written with 17 significant digits in scientific notation and
files use LF line endings, so identical runs produce byte-identical output.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dynamics import SimulationResult

__all__ = ["format_number", "write_trajectory_csv", "write_manifest"]

_FMT = "%.17e"


def format_number(x: float) -> str:
    return _FMT % float(x)


def write_trajectory_csv(result: SimulationResult, path, time_scale: float = 1.0) -> None:
    """Columns: t, one population per label (sorted), F, residual."""
    labels = sorted(result.populations)
    columns = [result.times * time_scale]
    header = ["t"] + [f"P_{name}" for name in labels] + ["F", "residual"]
    columns += [result.populations[name] for name in labels]
    columns.append(result.fidelity)
    residual = result.auxiliary.get("residual")
    if residual is None:
        residual = np.zeros_like(result.times)
    columns.append(residual)
    data = np.column_stack(columns)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(format_number(x) for x in row) + "\n")


def write_manifest(path, config_echo: dict, runs: list, version: str,
                   duration_seconds: float) -> None:
    payload = {
        "config": config_echo,
        "runs": runs,
        "version": version,
        "duration_seconds": duration_seconds,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
