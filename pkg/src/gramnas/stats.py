"""Per-generation statistics and the stats CSV format."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, fields
from typing import Iterable, Sequence

import numpy as np

__all__ = ["GenerationStats", "STATS_HEADER", "pearson", "stats_to_csv", "read_stats_csv", "aggregate_runs"]


@dataclass(frozen=True)
class GenerationStats:
    generation: int
    best_fitness: float
    mean_fitness: float
    best_hidden_layers: int
    mean_hidden_layers: float
    best_id: int

    to_dict = asdict

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationStats":
        return cls(**{f.name: d[f.name] for f in fields(cls)})


STATS_HEADER = tuple(f.name for f in fields(GenerationStats))


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient; ``nan`` when either series is constant."""
    a = np.asarray(x, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two 1-D series of equal length >= 2")
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(np.dot(da, da)) * float(np.dot(db, db)))
    if denom == 0:
        return math.nan
    return float(np.dot(da, db)) / denom


def _cell(value) -> str:
    return repr(float(value)) if isinstance(value, float) else str(value)


def stats_to_csv(rows: Iterable[GenerationStats]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(STATS_HEADER)
    for row in rows:
        writer.writerow([_cell(getattr(row, name)) for name in STATS_HEADER])
    return buf.getvalue()


def read_stats_csv(path) -> dict[str, np.ndarray]:
    """Column name -> float array."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
        header = reader.fieldnames or []
    return {name: np.array([float(r[name]) for r in rows]) for name in header}


def aggregate_runs(runs: Sequence[dict[str, np.ndarray]]) -> dict[str, np.ndarray]:
    """Mean and population std per generation across runs, truncated to the shortest run."""
    length = min(len(r["generation"]) for r in runs)
    out = {"generation": runs[0]["generation"][:length]}
    for name in runs[0]:
        if name in ("generation", "best_id"):
            continue
        stacked = np.stack([r[name][:length] for r in runs])
        out[f"{name}_mean"] = stacked.mean(axis=0)
        out[f"{name}_std"] = stacked.std(axis=0)
    return out
