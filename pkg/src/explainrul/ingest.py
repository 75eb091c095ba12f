"""
Run-to-failure vibration records: loading from the canonical CSV layout and
synthesizing bearing degradation runs.

Canonical layout, one directory per run::

    run_dir/
        meta.txt            key=value lines: sample_rate_hz, record_len, record_interval_s
        <anything>.csv      one snapshot per file, header ``timestamp_s,horiz_g,vert_g``

The ``timestamp_s`` column holds sample times; a record's timestamp is the
value on its first data row. Records are ordered by that timestamp, never by
file name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, NoDataError, ParseError, StructuralError

CSV_HEADER = "timestamp_s,horiz_g,vert_g"
META_FILENAME = "meta.txt"

# Fixed synthetic amplitudes (g). Only the degradation terms are configurable.
SHAFT_AMPLITUDE_G = 0.05
RESONANCE_GAIN = 2.0
RESONANCE_TONES = 9


@dataclass(frozen=True)
class FormatSpec:
    sample_rate_hz: float
    record_len: int
    record_interval_s: float

    def __post_init__(self):
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")
        if self.record_len < 1:
            raise ConfigError("record_len must be a positive integer")
        if not self.record_interval_s > 0:
            raise ConfigError("record_interval_s must be positive")


@dataclass(frozen=True)
class Record:
    timestamp_s: float
    horiz: np.ndarray
    vert: np.ndarray


@dataclass
class RecordSet:
    """Ordered snapshots of two-channel acceleration (g) from one run."""

    sample_rate_hz: float
    record_len: int
    record_interval_s: float
    records: list[Record] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        for r in self.records:
            if r.horiz.shape != (self.record_len,) or r.vert.shape != (self.record_len,):
                raise StructuralError(
                    f"record at t={r.timestamp_s} has {r.horiz.size}/{r.vert.size} samples, "
                    f"expected {self.record_len}"
                )
        ts = self.timestamps
        if ts.size > 1:
            steps = np.diff(ts)
            tol = 1e-9 * max(abs(self.record_interval_s), np.max(np.abs(ts)))
            if np.any(steps <= 0) or np.any(np.abs(steps - self.record_interval_s) > tol):
                raise StructuralError(
                    f"timestamps must be strictly increasing with spacing {self.record_interval_s} s"
                )

    def __len__(self):
        return len(self.records)

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([r.timestamp_s for r in self.records], dtype=float)

    @property
    def format_spec(self) -> FormatSpec:
        return FormatSpec(self.sample_rate_hz, self.record_len, self.record_interval_s)


def read_format_spec(path) -> FormatSpec:
    """Parse a ``key=value`` sidecar file into a FormatSpec."""
    path = Path(path)
    values = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(path, lineno, f"expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    try:
        return FormatSpec(
            sample_rate_hz=float(values["sample_rate_hz"]),
            record_len=int(values["record_len"]),
            record_interval_s=float(values["record_interval_s"]),
        )
    except KeyError as exc:
        raise ConfigError(f"{path}: missing key {exc.args[0]}") from None
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def write_format_spec(spec: FormatSpec, path):
    Path(path).write_text(
        f"sample_rate_hz={spec.sample_rate_hz!r}\n"
        f"record_len={spec.record_len}\n"
        f"record_interval_s={spec.record_interval_s!r}\n",
        encoding="utf-8",
    )


def _locate_bad_line(path: Path, ncols: int):
    text = path.read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        if lineno == 1:
            continue
        line = raw.strip()
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != ncols:
            raise ParseError(path, lineno, f"expected {ncols} columns, found {len(cells)}")
        for cell in cells:
            try:
                float(cell)
            except ValueError:
                raise ParseError(path, lineno, f"non-numeric value {cell.strip()!r}") from None
    raise ParseError(path, 0, "unreadable file")


def read_record_csv(path, record_len: int) -> Record:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        header = fh.readline().strip()
    if header.replace(" ", "") != CSV_HEADER:
        raise ParseError(path, 1, f"header must be {CSV_HEADER!r}, got {header!r}")
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2, dtype=float, encoding="utf-8")
    except ValueError:
        _locate_bad_line(path, 3)
        raise
    if data.shape[1] != 3:
        _locate_bad_line(path, 3)
    if data.shape[0] != record_len:
        raise StructuralError(f"{path}: {data.shape[0]} data rows, expected {record_len}")
    return Record(float(data[0, 0]), np.ascontiguousarray(data[:, 1]), np.ascontiguousarray(data[:, 2]))


def load_record_set(path, format_spec: FormatSpec | None = None) -> RecordSet:
    """Load every snapshot CSV under ``path`` (a run directory or a single file).

    When ``format_spec`` is omitted it is read from ``meta.txt`` next to the data.
    """
    path = Path(path)
    if not path.exists():
        raise NoDataError(f"{path} does not exist")
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix.lower() == ".csv")
        meta_dir = path
    else:
        files = [path]
        meta_dir = path.parent
    if not files:
        raise NoDataError(f"no record files in {path}")
    if format_spec is None:
        meta = meta_dir / META_FILENAME
        if not meta.exists():
            raise ConfigError(f"no format_spec given and {meta} not found")
        format_spec = read_format_spec(meta)
    records = [read_record_csv(f, format_spec.record_len) for f in files]
    records.sort(key=lambda r: r.timestamp_s)
    return RecordSet(format_spec.sample_rate_hz, format_spec.record_len, format_spec.record_interval_s, records)


def write_record_set(rs: RecordSet, directory, prefix: str = "rec"):
    """Write ``rs`` in the canonical layout (used by the synth stage)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_format_spec(rs.format_spec, directory / META_FILENAME)
    width = max(5, len(str(len(rs))))
    dt = 1.0 / rs.sample_rate_hz
    for i, r in enumerate(rs.records):
        t = r.timestamp_s + dt * np.arange(rs.record_len)
        table = np.column_stack([t, r.horiz, r.vert])
        np.savetxt(
            directory / f"{prefix}_{i:0{width}d}.csv",
            table,
            delimiter=",",
            header=CSV_HEADER,
            comments="",
            fmt="%.17g",
        )


@dataclass(frozen=True)
class SynthConfig:
    shaft_hz: float = 30.0
    fault_freqs_hz: Sequence[float] = (168.0,)
    resonance_centers_hz: Sequence[float] = (3800.0,)
    duration_records: int = 100
    degradation_onset_record: int = 60
    degradation_rate: float = 1e-3
    noise_std_g: float = 0.05
    seed: int = 0
    sample_rate_hz: float = 25600.0
    record_len: int = 2560
    record_interval_s: float = 10.0
    resonance_bandwidth_hz: float = 400.0
    onset_amplitude_g: float = 0.0

    def validate(self):
        if self.duration_records < 1:
            raise ConfigError("duration_records must be >= 1")
        if not 0 <= self.degradation_onset_record < self.duration_records:
            raise ConfigError("need 0 <= degradation_onset_record < duration_records")
        if self.noise_std_g < 0 or self.degradation_rate < 0 or self.onset_amplitude_g < 0:
            raise ConfigError("noise_std_g, degradation_rate and onset_amplitude_g must be non-negative")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")
        nyq = self.sample_rate_hz / 2
        tops = [self.shaft_hz, *self.fault_freqs_hz]
        tops += [c + self.resonance_bandwidth_hz / 2 for c in self.resonance_centers_hz]
        for f in tops:
            if not 0 < f < nyq:
                raise ConfigError(f"frequency {f} Hz outside (0, Nyquist={nyq}) Hz")
        for c in self.resonance_centers_hz:
            if c - self.resonance_bandwidth_hz / 2 <= 0:
                raise ConfigError(f"resonance band around {c} Hz reaches 0 Hz")


def synth_bearing_run(cfg: SynthConfig) -> RecordSet:
    """Synthesize a seeded run-to-failure RecordSet.

    Each channel is a shaft tone, fault tones whose amplitude steps to
    ``onset_amplitude_g`` at the onset record and then grows by
    ``degradation_rate`` g per record, a band of tones around each
    resonance center (amplitude ``RESONANCE_GAIN`` times the fault amplitude)
    and white Gaussian noise. Phases are drawn once per run, so the signal
    content changes between records only through degradation and noise.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    t = np.arange(cfg.record_len) / cfg.sample_rate_hz

    faults = np.asarray(cfg.fault_freqs_hz, dtype=float)
    offsets = np.linspace(-0.5, 0.5, RESONANCE_TONES) * cfg.resonance_bandwidth_hz
    res = np.concatenate([c + offsets for c in cfg.resonance_centers_hz]) if len(cfg.resonance_centers_hz) else np.empty(0)

    # channel x component phases; vertical channel sees the same sources with other phases
    phases = {ch: (rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi, faults.size), rng.uniform(0, 2 * math.pi, res.size))
              for ch in ("h", "v")}
    basis = {}
    for ch, (p_shaft, p_fault, p_res) in phases.items():
        shaft = SHAFT_AMPLITUDE_G * np.sin(2 * math.pi * cfg.shaft_hz * t + p_shaft)
        fault = np.sin(2 * math.pi * faults[:, None] * t + p_fault[:, None]).sum(axis=0) if faults.size else np.zeros_like(t)
        reson = (np.sin(2 * math.pi * res[:, None] * t + p_res[:, None]).sum(axis=0) / math.sqrt(RESONANCE_TONES)
                 if res.size else np.zeros_like(t))
        basis[ch] = (shaft, fault, reson)

    records = []
    for j in range(cfg.duration_records):
        k = j - cfg.degradation_onset_record
        amp = 0.0 if k < 0 else cfg.onset_amplitude_g + cfg.degradation_rate * k
        chans = []
        for ch in ("h", "v"):
            shaft, fault, reson = basis[ch]
            x = shaft + amp * fault + RESONANCE_GAIN * amp * reson
            if cfg.noise_std_g > 0:
                x = x + rng.normal(0.0, cfg.noise_std_g, cfg.record_len)
            chans.append(x)
        records.append(Record(j * cfg.record_interval_s, chans[0], chans[1]))
    return RecordSet(cfg.sample_rate_hz, cfg.record_len, cfg.record_interval_s, records)
