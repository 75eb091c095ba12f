"""
Power spectra and modified octave-band filtering.

The modified filter uses ``m``-Hz constant-width bands at low frequency and
switches to 1/n-octave (constant percentage) bands once a 1/n-octave band
would be wider than ``m``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import RangeError, SizeError

DB_FLOOR = 1e-12


@dataclass(frozen=True)
class PowerSpectrum:
    bin_width_hz: float
    psd: np.ndarray

    @property
    def freqs_hz(self) -> np.ndarray:
        return self.bin_width_hz * np.arange(self.psd.size)

    @property
    def nyquist_hz(self) -> float:
        return self.bin_width_hz * (self.psd.size - 1)


@dataclass(frozen=True)
class OctaveBandSpec:
    m: float
    n: int
    k: int
    n_const: int
    edges_hz: np.ndarray

    @property
    def n_bands(self) -> int:
        return self.edges_hz.size - 1

    @property
    def lower_hz(self) -> np.ndarray:
        return self.edges_hz[:-1]

    @property
    def upper_hz(self) -> np.ndarray:
        return self.edges_hz[1:]

    @property
    def centers_hz(self) -> np.ndarray:
        # arithmetic centers for constant-width bands, geometric for the octave part
        lo, hi = self.lower_hz, self.upper_hz
        n_abs = self.n_const - 1
        centers = np.sqrt(lo * hi)
        centers[:n_abs] = 0.5 * (lo[:n_abs] + hi[:n_abs])
        return centers

    def band_of(self, freq_hz: float) -> int | None:
        """Index of the band with ``lower < freq_hz <= upper``, or None."""
        e = self.edges_hz
        if not e[0] < freq_hz <= e[-1]:
            return None
        return int(np.searchsorted(e, freq_hz, side="left")) - 1


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window, ``0.5 * (1 - cos(2*pi*t/length))``."""
    if length < 2:
        raise SizeError(f"window length must be >= 2, got {length}")
    t = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * t / length))


def power_spectrum(channel, sample_rate_hz: float, window=None) -> PowerSpectrum:
    """One-sided, window-power-normalized PSD in g^2/Hz.

    Parseval holds: ``sum(psd) * bin_width`` equals the mean square of the
    windowed signal divided by the mean square of the window.
    """
    x = np.asarray(channel, dtype=float)
    w = hann_window(x.size) if window is None else np.asarray(window, dtype=float)
    if x.ndim != 1 or x.shape != w.shape:
        raise SizeError(f"channel length {x.shape} does not match window length {w.shape}")
    spec = np.fft.rfft(w * x)
    psd = np.abs(spec) ** 2 / (sample_rate_hz * np.sum(w * w))
    n = x.size
    if n % 2 == 0:
        psd[1:-1] *= 2.0
    else:
        psd[1:] *= 2.0
    return PowerSpectrum(sample_rate_hz / n, psd)


def band_edges(m: float, n: int, f_max_hz: float) -> OctaveBandSpec:
    """Edges of the modified octave filter up to ``f_max_hz`` (inclusive)."""
    if not m > 0 or n < 1 or not f_max_hz > m:
        raise ValueError(f"need m > 0, n >= 1, f_max > m; got m={m}, n={n}, f_max={f_max_hz}")
    k = math.ceil(n * math.log2(m / (2.0 ** (1.0 / n) - 1.0)))
    n_const = math.floor(2.0 ** ((k + 1) / n) / m + 1.0)
    edges = [m * (i - 1) for i in range(1, n_const + 1) if m * (i - 1) <= f_max_hz]
    j = 1
    while True:
        f = 2.0 ** ((j + k) / n)
        if f > f_max_hz:
            break
        if f > edges[-1]:
            edges.append(f)
        j += 1
    arr = np.asarray(edges, dtype=float)
    assert np.all(np.diff(arr) > 0), "band edges not strictly increasing"
    return OctaveBandSpec(m=float(m), n=int(n), k=int(k), n_const=int(n_const), edges_hz=arr)


def filter_spectrum(spectrum: PowerSpectrum, spec: OctaveBandSpec) -> np.ndarray:
    """Mean PSD of the bins inside each band ``(lower, upper]``; empty bands give 0."""
    if spec.edges_hz[-1] > spectrum.nyquist_hz * (1 + 1e-12):
        raise RangeError(
            f"last band edge {spec.edges_hz[-1]:.3f} Hz beyond spectrum Nyquist {spectrum.nyquist_hz:.3f} Hz"
        )
    f = spectrum.freqs_hz
    # bin k belongs to band i when edges[i] < f[k] <= edges[i+1]
    idx = np.searchsorted(spec.edges_hz, f, side="left") - 1
    inside = (idx >= 0) & (idx < spec.n_bands)
    sums = np.bincount(idx[inside], weights=spectrum.psd[inside], minlength=spec.n_bands)
    counts = np.bincount(idx[inside], minlength=spec.n_bands)
    out = np.zeros(spec.n_bands)
    nz = counts > 0
    out[nz] = sums[nz] / counts[nz]
    return out


def to_decibel(x):
    """``10*log10(max(x, 1e-12))`` relative to 1 g^2/Hz. Scalars stay scalars."""
    out = 10.0 * np.log10(np.maximum(np.asarray(x, dtype=float), DB_FLOOR))
    return float(out) if np.ndim(out) == 0 else out


def record_band_vectors(records, sample_rate_hz: float, spec: OctaveBandSpec):
    """Band vectors (horizontal, vertical) for every record of a RecordSet-like iterable."""
    records = list(records)
    if not records:
        return [], []
    w = hann_window(records[0].horiz.size)
    h = [filter_spectrum(power_spectrum(r.horiz, sample_rate_hz, w), spec) for r in records]
    v = [filter_spectrum(power_spectrum(r.vert, sample_rate_hz, w), spec) for r in records]
    return h, v


def write_band_spec_csv(spec: OctaveBandSpec, path):
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["band_index", "f_low_hz", "f_high_hz", "center_hz"])
        for i, (lo, hi, c) in enumerate(zip(spec.lower_hz, spec.upper_hz, spec.centers_hz)):
            wr.writerow([i, repr(float(lo)), repr(float(hi)), repr(float(c))])
