"""Synthetic overlapping-cluster datasets, deterministic splits, and
ingestion of external prediction logs.

The prediction-log formats are shared with :mod:`calibkit.reporting`:

* JSONL: one object per line, ``{"probs": [..K floats..], "label": int}``,
  UTF-8, LF endings.
* CSV: header ``p0,...,p{K-1},label``, decimal-point floats.

Loaded probability vectors are renormalized when their sum strays from 1
by at most 1e-3 and rejected beyond that; predicted class and confidence
are always recomputed from the probabilities.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    DomainError,
    LabelRangeError,
    MalformedRowError,
    MissingLogError,
    PredictionLogError,
    ProbabilitySumError,
)
from .metrics import PredictionRecord

# Cluster centers sit at simplex vertices scaled by this factor; together
# with the per-class standard deviation it sets the attainable accuracy.
CLUSTER_SPREAD = 2.0


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix (n, dim) with integer labels in [0, K)."""

    features: np.ndarray
    labels: np.ndarray
    k: int

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DomainError(f"features must be 2-D, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise DomainError("labels must be one class index per feature row")
        if self.n and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise DomainError(f"labels outside [0, {self.k})")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    """Train/val/test ratios (must sum to 1) plus the shuffle seed."""

    ratios: tuple[float, float, float]
    seed: int

    def __post_init__(self):
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise DomainError(f"need three positive ratios, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise DomainError(f"ratios must sum to 1 within 1e-9, got {sum(self.ratios)}")


def gen_synthetic(k: int, n_per_class: int, dim: int, overlap: float, seed: int) -> Dataset:
    """K isotropic Gaussian clusters with per-class standard deviation
    ``overlap``; larger overlap lowers the attainable accuracy.

    Cluster means sit on the scaled standard simplex (one axis per class)
    when ``dim >= k``; with fewer dimensions than classes they fall back
    to seeded random directions of the same norm. Fully deterministic in
    ``seed``.
    """
    if k < 2:
        raise DomainError(f"need at least 2 classes, got {k}")
    if n_per_class < 1:
        raise DomainError(f"need at least 1 sample per class, got {n_per_class}")
    if dim < 2:
        raise DomainError(f"need at least 2 feature dimensions, got {dim}")
    if overlap < 0:
        raise DomainError(f"overlap must be non-negative, got {overlap}")
    rng = np.random.default_rng(seed)
    means = np.zeros((k, dim))
    if dim >= k:
        means[np.arange(k), np.arange(k)] = CLUSTER_SPREAD
    else:
        directions = rng.standard_normal((k, dim))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        means = CLUSTER_SPREAD * directions
    features = np.empty((k * n_per_class, dim))
    labels = np.repeat(np.arange(k, dtype=np.int64), n_per_class)
    for c in range(k):
        block = slice(c * n_per_class, (c + 1) * n_per_class)
        features[block] = means[c] + overlap * rng.standard_normal((n_per_class, dim))
    return Dataset(features=features, labels=labels, k=k)


def _largest_remainder_sizes(n: int, ratios: tuple[float, float, float]) -> list[int]:
    exact = [n * r for r in ratios]
    base = [math.floor(e) for e in exact]
    fracs = np.array([e - b for e, b in zip(exact, base)])
    for idx in np.argsort(-fracs, kind="stable")[: n - sum(base)]:
        base[idx] += 1
    return base


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded shuffle followed by a contiguous three-way cut.

    Split sizes come from largest-remainder rounding of the ratios, so
    they always sum to n exactly; every sample lands in exactly one split.
    """
    sizes = _largest_remainder_sizes(dataset.n, spec.ratios)
    if any(s < 1 for s in sizes):
        raise DomainError(
            f"ratios {spec.ratios} leave an empty split for n={dataset.n} (sizes {sizes})"
        )
    order = np.random.default_rng(spec.seed).permutation(dataset.n)
    parts = []
    start = 0
    for size in sizes:
        idx = order[start:start + size]
        parts.append(Dataset(dataset.features[idx], dataset.labels[idx], dataset.k))
        start += size
    return tuple(parts)


class LogFormat(Enum):
    JSONL = "jsonl"
    CSV = "csv"

    @classmethod
    def from_name(cls, name: str) -> "LogFormat":
        try:
            return cls(name.lower())
        except ValueError:
            raise DomainError(f"unknown prediction log format {name!r}") from None


def _finalize_row(probs: list[float], label: int, k: int | None, line: int) -> tuple[np.ndarray, int]:
    if k is not None and len(probs) != k:
        raise MalformedRowError(f"expected {k} probabilities, got {len(probs)}", line)
    p = np.array(probs, dtype=np.float64)
    if p.shape[0] < 2:
        raise MalformedRowError(f"need at least 2 probabilities, got {p.shape[0]}", line)
    if not np.all(np.isfinite(p)):
        raise MalformedRowError("non-finite probability", line)
    if np.any(p < 0):
        raise MalformedRowError("negative probability", line)
    total = float(p.sum())
    if abs(total - 1.0) > 1e-3:
        raise ProbabilitySumError(
            f"probabilities sum to {total:.6f}, outside 1 +/- 1e-3", line
        )
    p /= total
    if not 0 <= label < p.shape[0]:
        raise LabelRangeError(f"label {label} outside [0, {p.shape[0]})", line)
    return p, label


def _iter_jsonl_rows(path: Path):
    with path.open("r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            if not raw.strip():
                raise MalformedRowError("blank line", line_no)
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise MalformedRowError(f"invalid JSON ({exc.msg})", line_no) from None
            if not isinstance(obj, dict) or "probs" not in obj or "label" not in obj:
                raise MalformedRowError('expected {"probs": [...], "label": int}', line_no)
            probs, label = obj["probs"], obj["label"]
            if not isinstance(probs, list) or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in probs
            ):
                raise MalformedRowError("probs must be a list of numbers", line_no)
            if not isinstance(label, int) or isinstance(label, bool):
                raise MalformedRowError("label must be an integer", line_no)
            yield line_no, [float(x) for x in probs], label


def _iter_csv_rows(path: Path):
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PredictionLogError("file contains no prediction rows") from None
        k = len(header) - 1
        if k < 2 or header != [f"p{i}" for i in range(k)] + ["label"]:
            raise MalformedRowError(
                "header must be p0,...,p{K-1},label", 1
            )
        for line_no, row in enumerate(reader, start=2):
            if len(row) != k + 1:
                raise MalformedRowError(f"expected {k + 1} columns, got {len(row)}", line_no)
            try:
                probs = [float(x) for x in row[:-1]]
                label = int(row[-1])
            except ValueError:
                raise MalformedRowError("unparseable number", line_no) from None
            yield line_no, probs, label


def load_predictions(path, fmt: LogFormat) -> list[PredictionRecord]:
    """Load an external prediction log into validated records.

    Raises a distinct error for a missing file, a malformed row, a
    probability sum outside tolerance, or an out-of-range label; row
    errors carry the 1-based line number.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingLogError(f"prediction log not found: {path}")
    rows = _iter_jsonl_rows(path) if fmt is LogFormat.JSONL else _iter_csv_rows(path)
    records: list[PredictionRecord] = []
    k: int | None = None
    for line_no, probs, label in rows:
        p, label = _finalize_row(probs, label, k, line_no)
        k = p.shape[0]
        records.append(PredictionRecord.from_probs(p, label))
    if not records:
        raise PredictionLogError("file contains no prediction rows")
    return records
