"""Cyanobacteria density binning and ordinal severity metrics.

The five-level scale refines the WHO recreational guidance thresholds;
bounds are lower-inclusive:

    level 1:            x < 2e4  cells/mL
    level 2:  2e4 <= x < 1e5
    level 3:  1e5 <= x < 1e6
    level 4:  1e6 <= x < 1e7
    level 5:  1e7 <= x
"""

from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyInput, InvalidDensity, LengthMismatch

DENSITY_THRESHOLDS = (2e4, 1e5, 1e6, 1e7)


class SeverityLevel(IntEnum):
    VERY_LOW = 1
    LOW = 2
    MODERATE = 3
    HIGH = 4
    VERY_HIGH = 5


@dataclass(frozen=True)
class SeverityReport:
    mse: float
    rmse: float
    mae: float
    n: int


def bin_density(cells_per_ml: float) -> SeverityLevel:
    """Map a density reading to its ordinal level (lower bound inclusive)."""
    x = float(cells_per_ml)
    if math.isnan(x) or math.isinf(x) or x < 0.0:
        raise InvalidDensity(f"density must be finite and >= 0, got {cells_per_ml!r}")
    return SeverityLevel(1 + bisect_right(DENSITY_THRESHOLDS, x))


def severity_metrics(
    pred: Sequence[SeverityLevel | int], truth: Sequence[SeverityLevel | int]
) -> SeverityReport:
    """MSE / RMSE / MAE over paired ordinal levels, in double precision."""
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(truth)} truths")
    if not pred:
        raise EmptyInput("severity_metrics needs at least one pair")
    p = np.asarray([float(int(v)) for v in pred], dtype=np.float64)
    t = np.asarray([float(int(v)) for v in truth], dtype=np.float64)
    resid = p - t
    mse = float(np.mean(resid**2))
    return SeverityReport(
        mse=mse, rmse=math.sqrt(mse), mae=float(np.mean(np.abs(resid))), n=len(pred)
    )


def read_labels(path: str | Path) -> dict[str, SeverityLevel]:
    """Read a label CSV with header `scene_id,cells_per_ml` or
    `scene_id,severity_level` (exactly one of the two value columns)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        has_density = "cells_per_ml" in fields
        has_level = "severity_level" in fields
        if "scene_id" not in fields or has_density == has_level:
            raise ValueError(
                f"{path}: header must be scene_id,cells_per_ml or scene_id,severity_level"
            )
        labels: dict[str, SeverityLevel] = {}
        for row in reader:
            scene_id = row["scene_id"]
            if scene_id in labels:
                raise ValueError(f"{path}: duplicate scene_id {scene_id!r}")
            if has_density:
                labels[scene_id] = bin_density(float(row["cells_per_ml"]))
            else:
                labels[scene_id] = SeverityLevel(int(row["severity_level"]))
    return labels


def write_labels(labels: dict[str, SeverityLevel], path: str | Path) -> None:
    """Write a `scene_id,severity_level` CSV, rows sorted by scene_id."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene_id", "severity_level"])
        for scene_id in sorted(labels):
            writer.writerow([scene_id, int(labels[scene_id])])
