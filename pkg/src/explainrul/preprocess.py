"""Feature matrices from band vectors, and per-row z-score normalization fitted on a run prefix."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import OctaveBandSpec, to_decibel
from .errors import InsufficientDataError, ParseError, StructuralError

SIGMA_FLOOR = 1e-9


@dataclass
class FeatureMatrix:
    """Rows are band components (horizontal above vertical), columns are records."""

    values: np.ndarray
    row_labels: list[tuple[str, float, float]] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise StructuralError("feature matrix must be 2-D")
        if not self.row_labels:
            self.row_labels = [("x", float(i), float(i + 1)) for i in range(self.rows)]
        if len(self.row_labels) != self.rows:
            raise StructuralError(f"{len(self.row_labels)} row labels for {self.rows} rows")
        if not np.all(np.isfinite(self.values)):
            raise StructuralError("feature matrix contains non-finite values")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def label_strings(self) -> list[str]:
        return [f"{ch}:{lo:.6g}-{hi:.6g}" for ch, lo, hi in self.row_labels]

    def column(self, j: int) -> np.ndarray:
        return self.values[:, j].copy()


@dataclass
class NormalizationStats:
    mu: np.ndarray
    sigma: np.ndarray
    fit_fraction: float = 0.8

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.mu.shape != self.sigma.shape or self.mu.ndim != 1:
            raise StructuralError("mu and sigma must be equal-length vectors")
        if np.any(self.sigma <= 0):
            raise StructuralError("sigma must be positive")

    @property
    def rows(self) -> int:
        return self.mu.size


def band_row_labels(spec: OctaveBandSpec) -> list[tuple[str, float, float]]:
    lo, hi = spec.lower_hz, spec.upper_hz
    return [(ch, float(a), float(b)) for ch in ("H", "V") for a, b in zip(lo, hi)]


def assemble_matrix(band_vectors_h, band_vectors_v, row_labels=None) -> FeatureMatrix:
    """Stack dB band vectors per record: column j is ``[dB(h_j); dB(v_j)]``."""
    if len(band_vectors_h) != len(band_vectors_v):
        raise StructuralError(f"{len(band_vectors_h)} horizontal vs {len(band_vectors_v)} vertical records")
    if not band_vectors_h:
        raise StructuralError("no records to assemble")
    h = np.asarray(band_vectors_h, dtype=float)
    v = np.asarray(band_vectors_v, dtype=float)
    if h.ndim != 2 or v.ndim != 2:
        raise StructuralError("band vectors must share one length per channel")
    values = np.vstack([to_decibel(h).T, to_decibel(v).T])
    if row_labels is None:
        row_labels = [("H", float(i), float(i + 1)) for i in range(h.shape[1])]
        row_labels += [("V", float(i), float(i + 1)) for i in range(v.shape[1])]
    return FeatureMatrix(values, list(row_labels))


def fit_normalizer(matrix: FeatureMatrix, fit_fraction: float = 0.8) -> NormalizationStats:
    """Row mean and population std over the first ``floor(fit_fraction * cols)`` columns."""
    if not 0 < fit_fraction <= 1:
        raise ValueError("fit_fraction must lie in (0, 1]")
    if matrix.cols < 2:
        raise InsufficientDataError("need at least 2 columns to fit a normalizer")
    m_prime = int(np.floor(fit_fraction * matrix.cols))
    if m_prime < 1:
        raise InsufficientDataError(f"fit prefix of {fit_fraction} x {matrix.cols} columns is empty")
    prefix = matrix.values[:, :m_prime]
    mu = prefix.mean(axis=1)
    sigma = np.sqrt(np.mean((prefix - mu[:, None]) ** 2, axis=1))
    return NormalizationStats(mu, np.maximum(sigma, SIGMA_FLOOR), fit_fraction)


def apply_normalizer(matrix: FeatureMatrix, stats: NormalizationStats) -> FeatureMatrix:
    if stats.rows != matrix.rows:
        raise StructuralError(f"stats for {stats.rows} rows, matrix has {matrix.rows}")
    return FeatureMatrix((matrix.values - stats.mu[:, None]) / stats.sigma[:, None], list(matrix.row_labels))


def invert_normalizer(matrix: FeatureMatrix, stats: NormalizationStats) -> FeatureMatrix:
    if stats.rows != matrix.rows:
        raise StructuralError(f"stats for {stats.rows} rows, matrix has {matrix.rows}")
    return FeatureMatrix(matrix.values * stats.sigma[:, None] + stats.mu[:, None], list(matrix.row_labels))


def write_matrix_csv(matrix: FeatureMatrix, path, column_names=None):
    if column_names is None:
        column_names = [f"r{j}" for j in range(matrix.cols)]
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["row_label", *column_names])
        for label, row in zip(matrix.label_strings(), matrix.values):
            wr.writerow([label, *(repr(float(x)) for x in row)])


def _parse_label(text: str) -> tuple[str, float, float]:
    ch, _, rng = text.partition(":")
    lo, _, hi = rng.partition("-")
    return ch, float(lo), float(hi)


def read_matrix_csv(path) -> FeatureMatrix:
    path = Path(path)
    labels, rows = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        for lineno, row in enumerate(reader, start=2):
            try:
                labels.append(_parse_label(row[0]))
                rows.append([float(x) for x in row[1:]])
            except (ValueError, IndexError) as exc:
                raise ParseError(path, lineno, str(exc)) from None
    if not rows:
        raise StructuralError(f"{path} holds no rows")
    return FeatureMatrix(np.array(rows), labels)


def write_stats_csv(stats: NormalizationStats, path):
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["row", "mu", "sigma"])
        for i, (m, s) in enumerate(zip(stats.mu, stats.sigma)):
            wr.writerow([i, repr(float(m)), repr(float(s))])
