"""Small labelled datasets split into train / validation / test."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

__all__ = ["DatasetSplit", "make_toy_dataset", "stratified_split", "load_csv_dataset", "SPLIT_FRACTIONS"]

SPLIT_FRACTIONS = (0.70, 0.15, 0.15)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    x_train: np.ndarray
    y_train: np.ndarray
    x_val: np.ndarray
    y_val: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    n_classes: int

    def __post_init__(self):
        for name in ("x_train", "x_val", "x_test"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.float64)))
        for name in ("y_train", "y_val", "y_test"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.int64)))
        for x, y in ((self.x_train, self.y_train), (self.x_val, self.y_val), (self.x_test, self.y_test)):
            if len(x) == 0 or len(x) != len(y):
                raise ValueError("every partition must be non-empty with one label per row")
            if y.min() < 0 or y.max() >= self.n_classes:
                raise ValueError(f"labels must lie in [0, {self.n_classes})")

    @property
    def n_features(self) -> int:
        return self.x_train.shape[1]

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.y_train), len(self.y_val), len(self.y_test)


def stratified_split(x: np.ndarray, y: np.ndarray, rng: np.random.Generator, n_classes=None) -> DatasetSplit:
    """70/15/15 split keeping class proportions.

    Each class is shuffled, the classes are interleaved round-robin, and the
    resulting order is cut at ``round(0.70 n)`` and ``round(0.85 n)``.
    """
    n = len(y)
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    queues = [list(rng.permutation(np.flatnonzero(y == c))) for c in range(n_classes)]
    order: list[int] = []
    while any(queues):
        for q in queues:
            if q:
                order.append(q.pop())
    order_arr = np.asarray(order)
    n_train = round(SPLIT_FRACTIONS[0] * n)
    n_val = round(SPLIT_FRACTIONS[1] * n)
    parts = np.split(order_arr, [n_train, n_train + n_val])
    return DatasetSplit(*(a for idx in parts for a in (x[idx], y[idx])), n_classes=n_classes)


def make_toy_dataset(kind: str, n: int, noise: float, seed: int) -> DatasetSplit:
    """Two-class 2-D problems.

    * ``blobs``: clusters centred at (-1.5, 0) and (1.5, 0)
    * ``rings``: concentric circles of radius 0.5 (class 0) and 1.0 (class 1)
    * ``xor``: uniform square, label = signs of the coordinates differ

    ``noise`` is the standard deviation of isotropic Gaussian jitter.
    """
    if n < 30:
        raise ValueError("n must be at least 30")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x70E]))
    y = np.arange(n) % 2
    if kind == "blobs":
        centres = np.array([[-1.5, 0.0], [1.5, 0.0]])
        x = centres[y].copy()
    elif kind == "rings":
        theta = rng.uniform(0.0, 2 * np.pi, size=n)
        radius = np.where(y == 0, 0.5, 1.0)
        x = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    elif kind == "xor":
        x = rng.uniform(-1.0, 1.0, size=(n, 2))
        y = ((x[:, 0] > 0) ^ (x[:, 1] > 0)).astype(np.int64)
    else:
        raise ValueError(f"unknown dataset kind {kind!r}")
    x = x + rng.normal(0.0, noise, size=x.shape) if noise > 0 else x
    return stratified_split(x, y, rng, n_classes=2)


def load_csv_dataset(path: Union[str, Path], seed: int = 0) -> DatasetSplit:
    """Feature columns followed by an integer ``label`` column, optionally a ``split`` column.

    ``split`` values are ``train``, ``valid`` and ``test``; without it the
    stratified 70/15/15 rule applies.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if "label" not in header:
            raise ValueError(f"{path}: no 'label' column")
        features = [h for h in header if h not in ("label", "split")]
        rows = list(reader)
    x = np.array([[float(r[h]) for h in features] for r in rows])
    y = np.array([int(r["label"]) for r in rows])
    n_classes = int(y.max()) + 1
    if "split" not in header:
        return stratified_split(x, y, np.random.default_rng(seed), n_classes)
    tags = np.array([r["split"] for r in rows])
    unknown = set(tags) - {"train", "valid", "test"}
    if unknown:
        raise ValueError(f"{path}: unknown split values {sorted(unknown)}")
    parts = [tags == t for t in ("train", "valid", "test")]
    return DatasetSplit(*(a for m in parts for a in (x[m], y[m])), n_classes=n_classes)
