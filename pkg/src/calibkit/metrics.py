"""Binned calibration measurement and multi-class classification metrics.

Confidences live on the unit interval split into M equal right-closed bins
((m-1)/M, m/M]; a confidence of exactly 0 (impossible for a softmax max,
which is at least 1/K) is assigned to bin 0 so the mapping is total. The
expected calibration error is the bin-count-weighted mean absolute gap
between per-bin accuracy and per-bin mean confidence; empty bins carry
zero weight.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError
from .kernels import bin_edges, reliability_sums


@dataclass(frozen=True, eq=False)
class PredictionRecord:
    """One sample's probability vector plus derived and true labels.

    ``predicted_class`` is the argmax of ``probs`` (lowest index wins ties)
    and ``confidence`` is the corresponding probability; both are always
    recomputed from ``probs``, never trusted from external input.
    """

    probs: np.ndarray
    predicted_class: int
    confidence: float
    true_class: int

    @classmethod
    def from_probs(cls, probs, true_class: int) -> "PredictionRecord":
        p = np.array(probs, dtype=np.float64)
        if p.ndim != 1 or p.shape[0] < 2:
            raise DomainError(f"probs must be a vector of K >= 2 entries, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise DomainError("probs contain non-finite entries")
        if np.any(p < 0.0):
            raise DomainError("probs contain negative entries")
        total = float(p.sum())
        if abs(total - 1.0) > 1e-9:
            raise DomainError(f"probs sum to {total!r}, expected 1 within 1e-9")
        k = p.shape[0]
        true_class = int(true_class)
        if not 0 <= true_class < k:
            raise DomainError(f"true_class {true_class} outside [0, {k})")
        pred = int(np.argmax(p))
        return cls(probs=p, predicted_class=pred, confidence=float(p[pred]), true_class=true_class)

    @property
    def correct(self) -> bool:
        return self.predicted_class == self.true_class


def records_from_probs(probs: np.ndarray, labels: Sequence[int]) -> list[PredictionRecord]:
    """Build one record per row of an (n, K) probability matrix."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise DomainError(f"expected an (n, K) probability matrix, got shape {probs.shape}")
    if probs.shape[0] != len(labels):
        raise DomainError("probs and labels disagree on sample count")
    return [PredictionRecord.from_probs(row, y) for row, y in zip(probs, labels)]


@dataclass(frozen=True)
class BinStats:
    count: int
    acc: float
    conf: float


@dataclass(frozen=True)
class ReliabilityTable:
    """Per-bin sample count, accuracy, and mean confidence over M bins.

    Empty bins carry count 0 and acc = conf = 0; bin counts always sum
    to ``n``.
    """

    m: int
    bins: tuple[BinStats, ...]
    n: int

    def counts(self) -> np.ndarray:
        return np.array([b.count for b in self.bins], dtype=np.int64)

    def accs(self) -> np.ndarray:
        return np.array([b.acc for b in self.bins], dtype=np.float64)

    def confs(self) -> np.ndarray:
        return np.array([b.conf for b in self.bins], dtype=np.float64)


def bin_index(confidence: float, n_bins: int) -> int:
    """Bin of ``confidence`` among M right-closed intervals ((m-1)/M, m/M]."""
    if n_bins < 1:
        raise DomainError(f"bin count must be >= 1, got {n_bins}")
    if not 0.0 <= confidence <= 1.0:
        raise DomainError(f"confidence {confidence!r} outside [0, 1]")
    edges = bin_edges(n_bins)
    return int(np.searchsorted(edges, confidence, side="left"))


def build_reliability_table(records: Iterable[PredictionRecord], n_bins: int) -> ReliabilityTable:
    """Bin records by confidence and aggregate per-bin accuracy and confidence."""
    records = list(records)
    if not records:
        raise DomainError("cannot build a reliability table from zero records")
    if n_bins < 1:
        raise DomainError(f"bin count must be >= 1, got {n_bins}")
    k = records[0].probs.shape[0]
    if any(r.probs.shape[0] != k for r in records):
        raise DomainError("records disagree on class count K")
    conf = np.array([r.confidence for r in records], dtype=np.float64)
    correct = np.array([1.0 if r.correct else 0.0 for r in records], dtype=np.float64)
    counts, acc_sums, conf_sums = reliability_sums(conf, correct, bin_edges(n_bins), n_bins)
    bins = []
    for m in range(n_bins):
        c = int(counts[m])
        if c == 0:
            bins.append(BinStats(0, 0.0, 0.0))
        else:
            bins.append(BinStats(c, float(acc_sums[m] / c), float(conf_sums[m] / c)))
    return ReliabilityTable(m=n_bins, bins=tuple(bins), n=len(records))


def ece(table: ReliabilityTable) -> float:
    """Bin-weighted mean absolute gap between accuracy and confidence."""
    if table.n < 1:
        raise DomainError("reliability table holds no samples")
    total = 0.0
    for b in table.bins:
        if b.count:
            total += (b.count / table.n) * abs(b.acc - b.conf)
    return total


@dataclass(frozen=True)
class ClassificationReport:
    """Macro-averaged precision/recall/F1 plus overall accuracy.

    ``per_class`` holds one (precision, recall, f1) triple per class; a
    class absent from both predictions and labels scores 0 throughout,
    as do precision/recall with zero denominators.
    """

    per_class: tuple[tuple[float, float, float], ...]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float


def classification_report(records: Iterable[PredictionRecord], k: int) -> ClassificationReport:
    """Per-class and macro-averaged classification metrics over K classes."""
    records = list(records)
    if not records:
        raise DomainError("cannot compute classification metrics from zero records")
    if k < 1:
        raise DomainError(f"class count must be >= 1, got {k}")
    true = np.array([r.true_class for r in records], dtype=np.int64)
    pred = np.array([r.predicted_class for r in records], dtype=np.int64)
    if true.min() < 0 or true.max() >= k or pred.min() < 0 or pred.max() >= k:
        raise DomainError(f"labels or predictions outside [0, {k})")
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (true, pred), 1)
    per_class = []
    for c in range(k):
        tp = float(cm[c, c])
        fp = float(cm[:, c].sum() - cm[c, c])
        fn = float(cm[c, :].sum() - cm[c, c])
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class.append((precision, recall, f1))
    return ClassificationReport(
        per_class=tuple(per_class),
        macro_precision=float(np.mean([p for p, _, _ in per_class])),
        macro_recall=float(np.mean([r for _, r, _ in per_class])),
        macro_f1=float(np.mean([f for _, _, f in per_class])),
        accuracy=float(np.trace(cm) / len(records)),
    )
