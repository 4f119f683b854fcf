"""Evaluation: accuracy, multiclass log loss, confusion matrix, baselines.

Log loss is natural-log with probabilities clipped to [eps, 1-eps],
eps = 1e-15. Probability rows must sum to 1 within 1e-6 on entry and are
then renormalized exactly, which keeps accumulated ensemble float error out
of the metric.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ingest import ClassFrequencyTable

LOG_LOSS_EPS = 1e-15
ROW_SUM_TOLERANCE = 1e-6


def accuracy(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Fraction of exact matches."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("empty label vectors")
    return float(np.mean(y_true == y_pred))


def log_loss(y_true: np.ndarray, probs: np.ndarray, eps: float = LOG_LOSS_EPS) -> float:
    """Mean negative natural log of the probability given to the true class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] != y_true.shape[0]:
        raise ValueError("probs must be (n, n_classes) aligned with y_true")
    if y_true.min() < 0 or y_true.max() >= probs.shape[1]:
        raise ValueError("a label is outside the probability column range")
    row_sums = probs.sum(axis=1)
    if np.abs(row_sums - 1.0).max() > ROW_SUM_TOLERANCE:
        worst = int(np.argmax(np.abs(row_sums - 1.0)))
        raise ValueError(f"probability row {worst} sums to {row_sums[worst]!r}, not ~1")
    probs = probs / row_sums[:, None]
    p_true = probs[np.arange(y_true.size), y_true]
    p_true = np.clip(p_true, eps, 1.0 - eps)
    return float(-np.mean(np.log(p_true)))


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    """Count matrix: entry (i, j) is true class i predicted as j."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("length mismatch")
    for name, v in (("y_true", y_true), ("y_pred", y_pred)):
        if v.size and (v.min() < 0 or v.max() >= n_classes):
            raise ValueError(f"{name} contains labels outside [0, {n_classes})")
    out = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(out, (y_true, y_pred), 1)
    return out


def majority_baseline(freq: ClassFrequencyTable) -> tuple[float, float]:
    """(accuracy, log loss) of the predictor that always emits the prior.

    Accuracy is the majority-class share; log loss is the entropy (nats) of
    the empirical class distribution.
    """
    if freq.total == 0:
        raise ValueError("empty frequency table")
    counts = np.asarray(freq.counts, dtype=np.float64)
    p = counts / freq.total
    acc = float(p.max())
    nz = p[p > 0]
    loss = float(-(nz * np.log(nz)).sum())
    return acc, loss


@dataclass(frozen=True)
class EvaluationReport:
    """Metrics for one experiment cell."""

    accuracy: float
    log_loss: float
    confusion: np.ndarray
    n_test: int
    per_class_recall: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "confusion", np.asarray(self.confusion, dtype=np.int64))
        object.__setattr__(self, "per_class_recall",
                           np.asarray(self.per_class_recall, dtype=np.float64))

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "log_loss": self.log_loss,
            "n_test": self.n_test,
            "confusion": self.confusion.tolist(),
            "per_class_recall": self.per_class_recall.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluationReport":
        return cls(
            accuracy=d["accuracy"],
            log_loss=d["log_loss"],
            confusion=np.asarray(d["confusion"], dtype=np.int64),
            n_test=d["n_test"],
            per_class_recall=np.asarray(d["per_class_recall"], dtype=np.float64),
        )


def evaluate(y_true: np.ndarray, probs: np.ndarray, n_classes: int) -> EvaluationReport:
    """Full report from true labels and predicted probability rows."""
    y_pred = np.argmax(probs, axis=1)
    confusion = confusion_matrix(y_true, y_pred, n_classes)
    row_totals = confusion.sum(axis=1)
    # classes absent from the test split get recall 0 rather than NaN
    recall = np.divide(np.diag(confusion), row_totals,
                       out=np.zeros(n_classes, dtype=np.float64),
                       where=row_totals > 0)
    return EvaluationReport(
        accuracy=accuracy(y_true, y_pred),
        log_loss=log_loss(y_true, probs),
        confusion=confusion,
        n_test=int(y_true.shape[0]),
        per_class_recall=recall,
    )


def write_report_record(path: str | Path, name: str, params: dict,
                        report: EvaluationReport, seed: int) -> None:
    """One experiment cell as a deterministic JSON record.

    Wall-clock timings are deliberately kept out of this file (they go to a
    sidecar) so identical config + seed + input reproduce identical bytes.
    """
    record = {
        "name": name,
        "seed": seed,
        "params": params,
        "report": report.to_dict(),
    }
    Path(path).write_text(json.dumps(record, sort_keys=True, indent=1) + "\n",
                          encoding="utf-8")


def read_report_record(path: str | Path) -> dict:
    record = json.loads(Path(path).read_text(encoding="utf-8"))
    record["report"] = EvaluationReport.from_dict(record["report"])
    return record


def write_results_csv(path: str | Path, rows: list[dict], columns: list[str]) -> None:
    """Flat CSV used to assemble the per-table result summaries."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
