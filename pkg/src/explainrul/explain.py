"""
Tools for explaining the trained models.

* reactive monitoring: encode every record of a run and line the feature
  trajectories up with the input spectrogram;
* direct feature injection: sweep one bottleneck feature through the decoder
  while the others stay at a baseline;
* connection-weight importance of the regressor inputs;
* bearing characteristic frequencies and their octave-band locations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import OctaveBandSpec
from .errors import StructuralError
from .models import AeModel, decode, encode
from .neural import Network
from .preprocess import FeatureMatrix

DEFAULT_SWEEP = np.arange(-1.0, 3.0 + 0.25, 0.5)


@dataclass
class FeatureTrajectory:
    times_s: np.ndarray
    features: np.ndarray  # (bottleneck_dim, n_records)

    def __post_init__(self):
        self.times_s = np.asarray(self.times_s, dtype=float)
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        if self.features.shape[1] != self.times_s.size:
            raise StructuralError(f"{self.features.shape[1]} feature columns for {self.times_s.size} times")

    def write_csv(self, path):
        k = self.features.shape[0]
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["time_s", *(f"f{i + 1}" for i in range(k))])
            for t, col in zip(self.times_s, self.features.T):
                wr.writerow([repr(float(t)), *(repr(float(v)) for v in col)])

    @classmethod
    def read_csv(cls, path) -> "FeatureTrajectory":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0], data[:, 1:].T)


@dataclass
class InjectionGrid:
    feature_index: int
    sweep_values: np.ndarray
    reconstructions: np.ndarray  # (input_dim, len(sweep_values))

    def write_csv(self, path, row_labels=None):
        if row_labels is None:
            row_labels = [f"x{i}" for i in range(self.reconstructions.shape[0])]
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["row_label", *(repr(float(v)) for v in self.sweep_values)])
            for label, row in zip(row_labels, self.reconstructions):
                wr.writerow([label, *(repr(float(v)) for v in row)])


def reactive_monitor(ae: AeModel, matrix, times_s=None) -> FeatureTrajectory:
    """Encode each (normalized) column of ``matrix`` on its own."""
    values = matrix.values if isinstance(matrix, FeatureMatrix) else np.atleast_2d(np.asarray(matrix, dtype=float))
    if values.shape[0] != ae.input_dim:
        raise StructuralError(f"matrix has {values.shape[0]} rows, encoder expects {ae.input_dim}")
    if times_s is None:
        times_s = np.arange(values.shape[1], dtype=float)
    feats = np.empty((ae.bottleneck_dim, values.shape[1]))
    for j in range(values.shape[1]):
        feats[:, j] = encode(ae, values[:, j])
    return FeatureTrajectory(times_s, feats)


def inject_features(ae: AeModel, feature_index: int, sweep=DEFAULT_SWEEP, baseline=None) -> InjectionGrid:
    """Decode ``baseline`` with one feature replaced by each sweep value in turn."""
    if not 0 <= feature_index < ae.bottleneck_dim:
        raise IndexError(f"feature_index {feature_index} outside [0, {ae.bottleneck_dim})")
    sweep = np.atleast_1d(np.asarray(sweep, dtype=float))
    base = np.zeros(ae.bottleneck_dim) if baseline is None else np.asarray(baseline, dtype=float)
    if base.shape != (ae.bottleneck_dim,):
        raise StructuralError(f"baseline of shape {base.shape}, expected ({ae.bottleneck_dim},)")
    cols = np.empty((ae.input_dim, sweep.size))
    for i, v in enumerate(sweep):
        f = base.copy()
        f[feature_index] = v
        cols[:, i] = decode(ae, f)
    return InjectionGrid(feature_index, sweep, cols)


def connection_weight_importance(net: Network) -> np.ndarray:
    """Signed input importance from products of connection weights.

    Starting from the output units (seeded with 1), each layer passes
    importance back as ``FI_in[i] = sum_j FI_out[j] * w[i, j]``. Activations
    and biases are ignored, so the scores only approximate the behaviour of
    deep or strongly nonlinear nets.
    """
    fi = np.ones(net.out_dim)
    for layer in reversed(net.layers):
        W = layer.W  # (out, in): W[j, i] connects input i to unit j
        fi = np.array([sum(fi[j] * W[j, i] for j in range(W.shape[0])) for i in range(W.shape[1])])
    return fi


def write_importance_csv(values, path):
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["feature", "value"])
        for i, v in enumerate(values):
            wr.writerow([f"f{i + 1}", repr(float(v))])


@dataclass(frozen=True)
class BearingGeometry:
    n_balls: int
    ball_diameter: float
    pitch_diameter: float
    contact_angle: float = 0.0  # radians
    shaft_hz: float = 1.0

    def __post_init__(self):
        if self.n_balls < 3:
            raise ValueError("a rolling bearing has at least 3 rolling elements")
        if not 0 < self.ball_diameter < self.pitch_diameter:
            raise ValueError("need 0 < ball_diameter < pitch_diameter")


def characteristic_frequencies(geom: BearingGeometry) -> dict[str, float]:
    """Kinematic fault frequencies (Hz): ``ftf``, ``bpfo``, ``bpfi``, ``bsf``."""
    r = geom.ball_diameter / geom.pitch_diameter * math.cos(geom.contact_angle)
    fs = geom.shaft_hz
    ftf = fs / 2 * (1 - r)
    return {
        "ftf": ftf,
        "bpfo": geom.n_balls * ftf,
        "bpfi": geom.n_balls * fs / 2 * (1 + r),
        "bsf": geom.pitch_diameter * fs / (2 * geom.ball_diameter) * (1 - r * r),
    }


@dataclass(frozen=True)
class Annotation:
    band_index: int | None
    label: str
    freq_hz: float


def annotate_bands(spec: OctaveBandSpec, freqs, harmonics: int = 1) -> list[Annotation]:
    """Locate each ``(label, hz)`` and its harmonics ``1..harmonics`` in the band layout.

    Labels read like ``"2 X BPFI"``. Frequencies outside ``(edges[0], edges[-1]]``
    get ``band_index=None``.
    """
    out = []
    for label, hz in freqs:
        for h in range(1, harmonics + 1):
            f = h * float(hz)
            out.append(Annotation(spec.band_of(f), f"{h} X {label}", f))
    return out


def write_annotations_csv(spec: OctaveBandSpec, annotations, path):
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["band_index", "f_low", "f_high", "label"])
        for a in annotations:
            if a.band_index is None:
                wr.writerow(["", "", "", a.label])
            else:
                i = a.band_index
                wr.writerow([i, repr(float(spec.edges_hz[i])), repr(float(spec.edges_hz[i + 1])), a.label])


def write_pgm(values, path, lo=None, hi=None):
    """Grayscale binary PGM of a 2-D array; row 0 at the bottom, brighter is larger."""
    a = np.asarray(values, dtype=float)
    lo = float(np.min(a)) if lo is None else lo
    hi = float(np.max(a)) if hi is None else hi
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = np.clip(np.rint((a - lo) * scale), 0, 255).astype(np.uint8)[::-1]
    with open(Path(path), "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode("ascii"))
        fh.write(img.tobytes())
