"""
Anomaly onset by penalized mean-shift segmentation, truncated RUL labels,
evaluation metrics and the least-squares linear baseline.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DegenerateLabelError, RankError, StructuralError, UndefinedMetricError


@dataclass(frozen=True)
class ChangePointResult:
    indices: list[int]
    contrast: float


def default_penalty(series) -> float:
    """``2 * sigma^2 * log(T)`` with sigma^2 estimated from first differences."""
    x = np.asarray(series, dtype=float)
    sigma2 = float(np.var(np.diff(x))) / 2.0 if x.size > 2 else 0.0
    return max(2.0 * sigma2 * math.log(x.size), 1e-12)


def segment_cost(x, start: int, stop: int) -> float:
    seg = np.asarray(x[start:stop], dtype=float)
    return float(np.sum((seg - seg.mean()) ** 2))


def detect_change_points(series, max_k: int = 3, penalty: float | None = None) -> ChangePointResult:
    """Exact minimizer of within-segment squared error + ``penalty * K`` for K <= max_k.

    A boundary ``t`` means a new segment starts at index ``t``.
    """
    x = np.asarray(series, dtype=float)
    T = x.size
    if x.ndim != 1 or T < 4:
        raise ValueError("series must be 1-D with at least 4 points")
    if max_k < 1:
        raise ValueError("max_k must be >= 1")
    if penalty is None:
        penalty = default_penalty(x)
    if not penalty > 0:
        raise ValueError("penalty must be positive")
    max_k = min(max_k, T - 1)

    # centered data keeps prefix-sum cancellation small
    xc = x - x.mean()
    s1 = np.concatenate([[0.0], np.cumsum(xc)])
    s2 = np.concatenate([[0.0], np.cumsum(xc * xc)])

    def cost_to(end):
        # cost of segments [s, end) for every s in 0..end-1
        s = np.arange(end)
        n = end - s
        tot = s1[end] - s1[s]
        c = (s2[end] - s2[s]) - tot * tot / n
        return np.maximum(c, 0.0)

    seg = [cost_to(e) for e in range(T + 1)]  # seg[e][s]
    inf = np.inf
    # best[k][t]: minimal cost of x[:t] split into k+1 segments
    best = np.full((max_k + 1, T + 1), inf)
    arg = np.zeros((max_k + 1, T + 1), dtype=int)
    for t in range(1, T + 1):
        best[0, t] = seg[t][0]
    for k in range(1, max_k + 1):
        for t in range(k + 1, T + 1):
            s = np.arange(k, t)
            cand = best[k - 1, s] + seg[t][s]
            i = int(np.argmin(cand))
            best[k, t] = cand[i]
            arg[k, t] = s[i]
    totals = best[:, T] + penalty * np.arange(max_k + 1)
    k_best = int(np.argmin(totals))
    bounds = []
    t = T
    for k in range(k_best, 0, -1):
        t = int(arg[k, t])
        bounds.append(t)
    return ChangePointResult(sorted(bounds), float(totals[k_best]))


def contrast(series, boundaries, penalty: float) -> float:
    """Penalized cost of an explicit boundary set."""
    x = np.asarray(series, dtype=float)
    cuts = [0, *sorted(boundaries), x.size]
    return sum(segment_cost(x, a, b) for a, b in zip(cuts, cuts[1:])) + penalty * len(boundaries)


class Onset(NamedTuple):
    index: int
    detected: bool
    per_row: list


def anomaly_onset(features, penalty: float | None = None, max_k: int = 3) -> Onset:
    """Latest change point over all feature rows; ``(0, False)`` when no row has one.

    ``features`` is a (n_features, n_records) array or a FeatureTrajectory.
    With ``penalty=None`` each row gets its own default penalty.
    """
    feats = np.atleast_2d(np.asarray(getattr(features, "features", features), dtype=float))
    per_row = [detect_change_points(row, max_k, penalty).indices for row in feats]
    found = [i for idx in per_row for i in idx]
    if not found:
        return Onset(0, False, per_row)
    return Onset(max(found), True, per_row)


@dataclass
class RulSeries:
    times_s: np.ndarray
    true_rul_s: np.ndarray
    anomaly_index: int
    rul_max_s: float
    est_rul_s: np.ndarray | None = None

    @property
    def normalized(self) -> np.ndarray:
        return self.true_rul_s / self.rul_max_s

    def write_csv(self, path):
        est = self.est_rul_s if self.est_rul_s is not None else np.full(self.true_rul_s.size, np.nan)
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["time_s", "true_rul_s", "est_rul_s", "normalized_label"])
            for row in zip(self.times_s, self.true_rul_s, est, self.normalized):
                wr.writerow([repr(float(v)) for v in row])


def read_rul_csv(path) -> RulSeries:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    true = data[:, 1]
    rul_max = float(true.max())
    plateau = np.flatnonzero(true == rul_max)
    return RulSeries(data[:, 0], true, int(plateau[-1]), rul_max, data[:, 2])


def label_rul(record_count: int, record_interval_s: float, anomaly_index: int, times_s=None) -> RulSeries:
    """RUL counted back from the last record, truncated at its value at ``anomaly_index``."""
    if not 0 <= anomaly_index < record_count:
        raise ValueError(f"anomaly_index {anomaly_index} outside [0, {record_count})")
    j = np.arange(record_count)
    raw = (record_count - 1 - j) * float(record_interval_s)
    rul_max = float(raw[anomaly_index])
    if rul_max <= 0:
        raise DegenerateLabelError("anomaly at the final record leaves a zero maximum RUL")
    if times_s is None:
        times_s = j * float(record_interval_s)
    return RulSeries(np.asarray(times_s, dtype=float), np.minimum(raw, rul_max), int(anomaly_index), rul_max)


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise StructuralError("inputs must be non-empty and of equal length")
    return a, b


def rmse(true_s, est_s) -> float:
    a, b = _pair(true_s, est_s)
    return float(np.sqrt(np.mean((a - b) ** 2)))


def relative_error(actual: float, estimate: float) -> float:
    """``(actual - estimate) / actual``; negative when the estimate overshoots."""
    if actual == 0:
        raise UndefinedMetricError("relative error undefined when the actual RUL is 0")
    return (actual - estimate) / actual


def evaluation_index(true_s, offset: int = 0) -> int:
    """Last index with positive true RUL, moved ``offset`` records earlier."""
    pos = np.flatnonzero(np.asarray(true_s) > 0)
    if pos.size == 0:
        raise UndefinedMetricError("true RUL is never positive")
    return int(pos[-1]) - offset


def series_relative_error(true_s, est_s, offset: int = 0) -> float:
    a, b = _pair(true_s, est_s)
    i = evaluation_index(a, offset)
    if not 0 <= i < a.size:
        raise UndefinedMetricError(f"evaluation index {i} outside the series")
    return relative_error(float(a[i]), float(b[i]))


@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float
    ridge: float = 0.0


def fit_linear_baseline(features, labels) -> LinearModel:
    """Ordinary least squares via the normal equations; adds 1e-8 ridge if singular."""
    x = np.atleast_2d(np.asarray(features, dtype=float))
    if x.ndim == 2 and np.asarray(features).ndim == 1:
        x = x.T
    y = np.asarray(labels, dtype=float).ravel()
    if x.shape[0] != y.size:
        raise StructuralError(f"{x.shape[0]} samples vs {y.size} labels")
    if x.shape[0] < x.shape[1] + 1:
        raise RankError(f"{x.shape[0]} samples for {x.shape[1] + 1} unknowns")
    a = np.hstack([x, np.ones((x.shape[0], 1))])
    ata = a.T @ a
    aty = a.T @ y
    ridge = 0.0
    try:
        if np.linalg.cond(ata) > 1e14:
            raise np.linalg.LinAlgError
        coef = np.linalg.solve(ata, aty)
    except np.linalg.LinAlgError:
        ridge = 1e-8
        coef = np.linalg.solve(ata + ridge * np.eye(ata.shape[0]), aty)
    return LinearModel(coef[:-1], float(coef[-1]), ridge)


def predict_linear(model: LinearModel, features) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim == 1 and model.weights.size == 1:
        x = x[:, None]
    return np.atleast_2d(x) @ model.weights + model.intercept


@dataclass
class RunMetrics:
    run_id: str
    rmse_s: float
    re: float


def write_metrics_csv(metrics, path):
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["run_id", "rmse_s", "re"])
        for m in metrics:
            wr.writerow([m.run_id, repr(float(m.rmse_s)), repr(float(m.re))])
