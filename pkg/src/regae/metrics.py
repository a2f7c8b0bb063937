"""Size-weighted reconstruction metrics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np


def pad_to(A: np.ndarray, size: int) -> np.ndarray:
    """Zero-pad a square matrix with extra rows/columns up to ``size``."""
    out = np.zeros((size, size), dtype=np.int8)
    n = A.shape[0]
    out[:n, :n] = A
    return out


def confusion(A_true: np.ndarray, A_pred: np.ndarray) -> tuple[int, int, int, int]:
    """(tp, fp, fn, tn) over strictly-lower-triangle entries after zero padding."""
    size = max(A_true.shape[0], A_pred.shape[0])
    t = pad_to(A_true, size)
    p = pad_to(A_pred, size)
    rows, cols = np.tril_indices(size, -1)
    t, p = t[rows, cols].astype(bool), p[rows, cols].astype(bool)
    tp = int(np.sum(t & p))
    fp = int(np.sum(~t & p))
    fn = int(np.sum(t & ~p))
    tn = int(np.sum(~t & ~p))
    return tp, fp, fn, tn


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Class-1 precision, recall, F1.

    Both classes empty (no true and no predicted edges) counts as a perfect
    1/1/1; any other zero denominator gives 0.
    """
    if tp + fp == 0 and tp + fn == 0:
        return 1.0, 1.0, 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass
class GraphScore:
    n: int
    n_hat: int
    precision: float
    recall: float
    f1: float
    truncated: bool = False


@dataclass
class MetricsReport:
    f1: float
    precision: float
    recall: float
    size_accuracy: float
    mean_size_error: float
    num_graphs: int
    per_graph: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        d = dict(d)
        d["per_graph"] = [GraphScore(**g) for g in d.get("per_graph", [])]
        return cls(**d)


def score_graph(A_true: np.ndarray, A_pred: np.ndarray, truncated: bool = False) -> GraphScore:
    p, r, f = prf(*confusion(A_true, A_pred)[:3])
    return GraphScore(int(A_true.shape[0]), int(A_pred.shape[0]), p, r, f, truncated)


def summarize(scores: list[GraphScore]) -> MetricsReport:
    if not scores:
        return MetricsReport(0.0, 0.0, 0.0, 0.0, 0.0, 0, [])
    n = np.array([s.n for s in scores], dtype=np.float64)
    n_hat = np.array([s.n_hat for s in scores], dtype=np.float64)
    w = n / n.sum()

    def wavg(attr):
        return float(np.sum(w * np.array([getattr(s, attr) for s in scores])))

    return MetricsReport(
        f1=wavg("f1"),
        precision=wavg("precision"),
        recall=wavg("recall"),
        size_accuracy=float(np.mean(n == n_hat)),
        mean_size_error=float(np.mean(np.abs(n_hat - n)) / np.mean(n)),
        num_graphs=len(scores),
        per_graph=list(scores),
    )


def aggregate(reports: list[MetricsReport]) -> dict:
    """Mean and standard deviation of each headline metric across runs."""
    keys = ("f1", "precision", "recall", "size_accuracy", "mean_size_error")
    out = {"runs": len(reports)}
    for k in keys:
        vals = np.array([getattr(r, k) for r in reports], dtype=np.float64)
        out[k] = {"mean": float(vals.mean()) if len(vals) else 0.0,
                  "std": float(vals.std()) if len(vals) else 0.0}
    return out
