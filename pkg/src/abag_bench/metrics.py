"""Classification and statistical metrics for cross-validation evaluation.

AUROC uses the Mann-Whitney rank formulation with average ranks on ties, so
it equals the probability that a random positive outranks a random negative
with ties counting one half. AUPRC is average precision with tied scores
processed as one block (precision taken after the whole block enters), the
conservative estimator for quantized score vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import UndefinedMetricError
from .special import chi2_sf, student_t_sf


def _as_scored_labels(scores: Sequence[float], labels: Sequence[bool]):
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=bool)
    if s.ndim != 1 or y.ndim != 1:
        raise UndefinedMetricError("scores and labels must be one-dimensional")
    if s.shape[0] == 0:
        raise UndefinedMetricError("empty score vector")
    if s.shape[0] != y.shape[0]:
        raise UndefinedMetricError("scores and labels differ in length")
    return s, y


def auroc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Rank-based AUROC; requires both classes present."""
    s, y = _as_scored_labels(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC undefined for single-class labels")
    order = np.argsort(s, kind="mergesort")
    sorted_scores = s[order]
    # Average 1-based ranks within tied groups: (first + last) / 2 is exact
    # in binary floating point, which keeps the oracle comparison exact.
    ranks = np.empty(s.shape[0], dtype=np.float64)
    i = 0
    n = s.shape[0]
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = ((i + 1) + (j + 1)) / 2.0
        i = j + 1
    rank_sum = float(ranks[y].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auprc(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Average precision over descending scores with tied-block handling."""
    s, y = _as_scored_labels(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AUPRC undefined without positive labels")
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    ap = 0.0
    tp = 0
    seen = 0
    i = 0
    n = s.shape[0]
    while i < n:
        j = i
        block_tp = int(y_sorted[i])
        while j + 1 < n and s_sorted[j + 1] == s_sorted[i]:
            j += 1
            block_tp += int(y_sorted[j])
        tp += block_tp
        seen = j + 1
        if block_tp:
            precision = tp / seen
            ap += precision * (block_tp / n_pos)
        i = j + 1
    return ap


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Sample Pearson r and its two-sided p-value (t approximation, n-2 df)."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise UndefinedMetricError("pearson requires equal-length vectors")
    n = xs.shape[0]
    if n < 3:
        raise UndefinedMetricError("pearson requires at least 3 points")
    dx = xs - xs.mean()
    dy = ys - ys.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedMetricError("pearson undefined for a constant vector")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    p = 2.0 * student_t_sf(abs(t), n - 2)
    return r, min(p, 1.0)


def one_sided_paired_t_test(a: Sequence[float], b: Sequence[float]) -> float:
    """p-value for the alternative mean(a - b) > 0 on paired samples."""
    xs = np.asarray(a, dtype=np.float64)
    ys = np.asarray(b, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise UndefinedMetricError("paired t-test requires equal-length vectors")
    k = xs.shape[0]
    if k < 2:
        raise UndefinedMetricError("paired t-test requires at least 2 pairs")
    d = xs - ys
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        if mean > 0:
            return 0.0
        return 1.0 if mean < 0 else 0.5
    t = mean / (sd / math.sqrt(k))
    return student_t_sf(t, k - 1)


def chi_square_independence(table: Sequence[Sequence[float]]) -> float:
    """Pearson chi-square p-value for an r x m contingency table of counts."""
    obs = np.asarray(table, dtype=np.float64)
    if obs.ndim != 2 or obs.shape[0] < 2 or obs.shape[1] < 2:
        raise UndefinedMetricError("contingency table must be at least 2x2")
    if (obs < 0).any():
        raise UndefinedMetricError("contingency table must be non-negative")
    row_tot = obs.sum(axis=1)
    col_tot = obs.sum(axis=0)
    total = obs.sum()
    if (row_tot == 0).any() or (col_tot == 0).any():
        raise UndefinedMetricError("chi-square undefined with a zero marginal")
    expected = np.outer(row_tot, col_tot) / total
    stat = float(((obs - expected) ** 2 / expected).sum())
    df = (obs.shape[0] - 1) * (obs.shape[1] - 1)
    return chi2_sf(stat, df)


@dataclass(frozen=True)
class CvAggregate:
    mean: float
    std: float
    se: float

    def formatted(self, digits: int = 2) -> str:
        return f"{self.mean:.{digits}f} ± {self.std:.{max(digits, 1) + 1}g}"


def aggregate_cv(per_fold: Sequence[float]) -> CvAggregate:
    """Mean, sample standard deviation, and SE = std / sqrt(k) across folds."""
    vals = np.asarray(per_fold, dtype=np.float64)
    k = vals.shape[0]
    if k < 2:
        raise UndefinedMetricError("aggregation requires at least 2 folds")
    mean = float(vals.mean())
    std = float(vals.std(ddof=1))
    return CvAggregate(mean=mean, std=std, se=std / math.sqrt(k))
