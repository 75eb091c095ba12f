"""
Stage-by-stage orchestration of the prognostic pipeline.

Every stage reads the artifacts of its upstream stages from the output
directory, writes CSV artifacts of its own and finishes with a manifest
(``manifests/<stage>.json``) holding the config hash, the stage seed and
sha256 digests of inputs and outputs. A stage refuses to run when an
upstream manifest is missing.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
import logging
import math
import os
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp, explain, ingest, models, neural, preprocess, prognosis
from .errors import ConfigError, DependencyError, ExplainRulError

log = logging.getLogger(__name__)

STAGES = (
    "synth", "preprocess", "train-ae", "extract", "changepoint", "label",
    "train-ffnn", "estimate", "explain", "evaluate", "baseline-linear",
)

DEPENDS = {
    "synth": (),
    "preprocess": ("synth",),
    "train-ae": ("preprocess",),
    "extract": ("train-ae",),
    "changepoint": ("extract",),
    "label": ("changepoint",),
    "train-ffnn": ("label",),
    "estimate": ("train-ffnn",),
    "explain": ("train-ffnn",),
    "evaluate": ("estimate",),
    "baseline-linear": ("label",),
}

DEFAULT_CONFIG = """
[pipeline]
out = out
seed = 0
ae_pool = train

[data]
source = synth
train_runs =
test_runs =

[synth]
n_train = 5
n_test = 2
duration = 110
duration_jitter = 0.2
onset_fraction = 0.6
shaft_hz = 30
fault_freqs_hz = 168, 236
resonance_centers_hz = 3800, 7600
resonance_bandwidth_hz = 400
final_amplitude_g = 0.3
degradation_rate =
onset_amplitude_g = 0.0
noise_std_g = 0.05
sample_rate_hz = 25600
record_len = 2560
record_interval_s = 10

[dsp]
m = 32
n = 16

[normalize]
fit_fraction = 0.8

[autoencoder]
encoder_hidden = 64, 16
bottleneck = 4
decoder_hidden = 64
lambda = 1e-4
beta = 1e-2
rho = 0.05
learning_rate = 1e-3
batch_size = 32
epochs = 2000
patience = 100
validation_fraction = 0.5

[ffnn]
hidden = 8, 4
lambda = 1e-4
beta = 0
rho = 0.05
learning_rate = 1e-3
batch_size = 32
epochs = 2000
patience = 100
validation_fraction = 0.3

[changepoint]
max_k = 1
penalty = auto
penalty_factor = 1.0

[evaluate]
re_offset = 0

[explain]
sweep_start = -1
sweep_stop = 3
sweep_step = 0.5
harmonics = 3
spectrogram = yes
n_balls =
ball_diameter =
pitch_diameter =
contact_angle_rad = 0
shaft_hz =
"""


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(";", ",").split(",") if t.strip()]


@dataclass
class PipelineConfig:
    parser: configparser.ConfigParser
    path: Path | None = None
    overrides: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path=None, out=None, seed=None, ae_pool=None) -> "PipelineConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.read_string(DEFAULT_CONFIG)
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise ConfigError(f"config file {path} not found")
            try:
                with open(path, encoding="utf-8") as fh:
                    text = fh.read()
                parser.read_string(text, source=str(path))
            except configparser.Error as exc:
                raise ConfigError(str(exc)) from None
            # relative data paths resolve against the config file
            base = path.parent
            for key in ("train_runs", "test_runs"):
                raw = parser.get("data", key)
                if raw.strip():
                    parts = [p.strip() for p in raw.split(",") if p.strip()]
                    parser.set("data", key, ", ".join(str((base / p).resolve()) if not os.path.isabs(p) else p for p in parts))
        if out is not None:
            parser.set("pipeline", "out", str(out))
        if seed is not None:
            parser.set("pipeline", "seed", str(seed))
        if ae_pool is not None:
            parser.set("pipeline", "ae_pool", ae_pool)
        cfg = cls(parser, path)
        cfg.validate()
        return cfg

    def get(self, section, key, kind=str):
        raw = self.parser.get(section, key)
        try:
            if kind is bool:
                return self.parser.getboolean(section, key)
            if kind in (list, "floats"):
                return _floats(raw)
            if kind == "ints":
                return _ints(raw)
            return kind(raw)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None

    def validate(self):
        known = configparser.ConfigParser()
        known.read_string(DEFAULT_CONFIG)
        for section in self.parser.sections():
            if not known.has_section(section):
                raise ConfigError(f"unknown config section [{section}]")
            for key in self.parser[section]:
                if key not in known[section]:
                    raise ConfigError(f"unknown key '{key}' in [{section}]")
        if self.get("pipeline", "ae_pool") not in ("train", "train+test"):
            raise ConfigError("ae_pool must be 'train' or 'train+test'")
        if self.seed < 0:
            raise ConfigError("seed must be unsigned")
        source = self.get("data", "source")
        if source not in ("synth", "files"):
            raise ConfigError("[data] source must be 'synth' or 'files'")
        if source == "files":
            train = [p for p in self.get("data", "train_runs").split(",") if p.strip()]
            if not train:
                raise ConfigError("[data] train_runs is empty")
            for p in train + [p for p in self.get("data", "test_runs").split(",") if p.strip()]:
                if not Path(p.strip()).exists():
                    raise ConfigError(f"run path {p.strip()} does not exist")
        if not 0 < self.get("normalize", "fit_fraction", float) <= 1:
            raise ConfigError("fit_fraction must lie in (0, 1]")
        if self.get("dsp", "m", float) <= 0 or self.get("dsp", "n", int) < 1:
            raise ConfigError("[dsp] needs m > 0 and n >= 1")
        if self.get("changepoint", "max_k", int) < 1:
            raise ConfigError("max_k must be >= 1")
        pen = self.get("changepoint", "penalty")
        if pen != "auto" and not float(pen) > 0:
            raise ConfigError("penalty must be 'auto' or a positive number")
        for section in ("autoencoder", "ffnn"):
            self.cost_config(section)
            self.train_options(section, 0)
        if source == "synth":
            self.synth_configs()

    @property
    def seed(self) -> int:
        return self.get("pipeline", "seed", int)

    @property
    def out(self) -> Path:
        return Path(self.get("pipeline", "out"))

    def canonical(self) -> str:
        lines = []
        for section in sorted(self.parser.sections()):
            if section == "pipeline":
                items = [(k, v) for k, v in self.parser[section].items() if k != "out"]
            else:
                items = list(self.parser[section].items())
            lines.append(f"[{section}]")
            lines += [f"{k} = {v.strip()}" for k, v in sorted(items)]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()

    def stage_seed(self, stage: str) -> int:
        digest = hashlib.sha256(f"{self.seed}:{stage}".encode()).digest()
        return int.from_bytes(digest[:4], "little")

    def cost_config(self, section) -> neural.CostConfig:
        try:
            return neural.CostConfig(
                lam=self.get(section, "lambda", float),
                beta=self.get(section, "beta", float),
                rho=self.get(section, "rho", float),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"[{section}] {exc}") from None

    def train_options(self, section, seed) -> neural.TrainOptions:
        return neural.TrainOptions(
            learning_rate=self.get(section, "learning_rate", float),
            batch_size=self.get(section, "batch_size", int),
            epochs=self.get(section, "epochs", int),
            seed=seed,
            validation_fraction=self.get(section, "validation_fraction", float),
            patience=self.get(section, "patience", int),
        )

    def synth_configs(self) -> list[tuple[str, ingest.SynthConfig]]:
        s = "synth"
        n_train, n_test = self.get(s, "n_train", int), self.get(s, "n_test", int)
        if n_train < 1 or n_test < 0:
            raise ConfigError("[synth] needs n_train >= 1 and n_test >= 0")
        rng = np.random.default_rng(self.stage_seed("synth"))
        base, jitter = self.get(s, "duration", int), self.get(s, "duration_jitter", float)
        frac = self.get(s, "onset_fraction", float)
        if not 0 <= frac < 1:
            raise ConfigError("onset_fraction must lie in [0, 1)")
        rate_raw = self.get(s, "degradation_rate").strip()
        out = []
        for i in range(n_train + n_test):
            split = "train" if i < n_train else "test"
            idx = i if i < n_train else i - n_train
            dur = max(4, int(round(base * (1 + jitter * rng.uniform(-1, 1)))))
            onset = int(math.floor(frac * dur))
            rate = float(rate_raw) if rate_raw else self.get(s, "final_amplitude_g", float) / max(1, dur - onset)
            cfg = ingest.SynthConfig(
                shaft_hz=self.get(s, "shaft_hz", float),
                fault_freqs_hz=tuple(self.get(s, "fault_freqs_hz", "floats")),
                resonance_centers_hz=tuple(self.get(s, "resonance_centers_hz", "floats")),
                duration_records=dur,
                degradation_onset_record=onset,
                degradation_rate=rate,
                noise_std_g=self.get(s, "noise_std_g", float),
                seed=int(rng.integers(0, 2**32)),
                sample_rate_hz=self.get(s, "sample_rate_hz", float),
                record_len=self.get(s, "record_len", int),
                record_interval_s=self.get(s, "record_interval_s", float),
                resonance_bandwidth_hz=self.get(s, "resonance_bandwidth_hz", float),
                onset_amplitude_g=self.get(s, "onset_amplitude_g", float),
            )
            cfg.validate()
            out.append((f"{split}_{idx:02d}", cfg))
        return out


# -- artifact helpers ----------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class Run:
    run_id: str
    split: str
    path: Path
    true_onset: int | None = None


class Workspace:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.root = cfg.out
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []

    def p(self, *parts) -> Path:
        path = self.root.joinpath(*parts)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def manifest_path(self, stage) -> Path:
        return self.root / "manifests" / f"{stage}.json"

    def require(self, stage):
        for dep in DEPENDS[stage]:
            if dep == "synth" and self.cfg.get("data", "source") != "synth":
                continue
            if not self.manifest_path(dep).exists():
                raise DependencyError(stage, dep)
            man = json.loads(self.manifest_path(dep).read_text())
            if man.get("config_hash") != self.cfg.config_hash():
                log.error("stage '%s' last ran with a different configuration", dep)
                raise DependencyError(stage, dep)

    def read(self, path) -> Path:
        self.inputs.append(Path(path))
        return Path(path)

    def wrote(self, path) -> Path:
        self.outputs.append(Path(path))
        return Path(path)

    def write_manifest(self, stage, seed):
        def digests(paths):
            out = {}
            for p in sorted(set(paths)):
                if p.is_file():
                    key = os.path.relpath(p, self.root) if p.is_relative_to(self.root) else str(p)
                    out[key] = sha256_file(p)
            return out

        man = {
            "stage": stage,
            "config_hash": self.cfg.config_hash(),
            "seed": seed,
            "global_seed": self.cfg.seed,
            "inputs": digests(self.inputs),
            "outputs": digests(self.outputs),
        }
        path = self.p("manifests", f"{stage}.json")
        path.write_text(json.dumps(man, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    # runs table
    def runs(self) -> list[Run]:
        path = self.read(self.root / "runs.csv")
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        return [Run(r["run_id"], r["split"], Path(r["path"]),
                    int(r["true_onset"]) if r["true_onset"] else None) for r in rows]

    def write_runs(self, runs: list[Run]):
        path = self.wrote(self.p("runs.csv"))
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["run_id", "split", "path", "true_onset"])
            for r in runs:
                wr.writerow([r.run_id, r.split, str(r.path), "" if r.true_onset is None else r.true_onset])


@contextmanager
def output_lock(root: Path):
    root.mkdir(parents=True, exist_ok=True)
    lock = root / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise ExplainRulError(f"{lock} exists: another stage is writing to {root} (remove a stale lock by hand)") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


# -- stages --------------------------------------------------------------------

def _matrix_times(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        header = next(csv.reader(fh))
    return np.array([float(h) for h in header[1:]])


def _band_spec(cfg: PipelineConfig, sample_rate_hz: float) -> dsp.OctaveBandSpec:
    return dsp.band_edges(cfg.get("dsp", "m", float), cfg.get("dsp", "n", int), sample_rate_hz / 2)


def stage_synth(ws: Workspace, seed: int):
    if ws.cfg.get("data", "source") != "synth":
        raise ConfigError("the synth stage needs [data] source = synth")
    runs = []
    for run_id, scfg in ws.cfg.synth_configs():
        rs = ingest.synth_bearing_run(scfg)
        d = ws.root / "runs" / run_id
        if d.exists():
            for old in d.glob("*.csv"):
                old.unlink()
        ingest.write_record_set(rs, d)
        ws.wrote(d / ingest.META_FILENAME)
        runs.append(Run(run_id, run_id.split("_")[0], Path("runs") / run_id, scfg.degradation_onset_record))
        log.info("synth %s: %d records, onset %d", run_id, scfg.duration_records, scfg.degradation_onset_record)
    ws.write_runs(runs)


def _resolve(ws: Workspace, run: Run) -> Path:
    return run.path if run.path.is_absolute() else ws.root / run.path


def stage_preprocess(ws: Workspace, seed: int):
    if ws.cfg.get("data", "source") == "files":
        runs = []
        for split in ("train", "test"):
            paths = [p.strip() for p in ws.cfg.get("data", f"{split}_runs").split(",") if p.strip()]
            runs += [Run(f"{split}_{i:02d}", split, Path(p)) for i, p in enumerate(paths)]
        ws.write_runs(runs)
    else:
        runs = ws.runs()
    fit_fraction = ws.cfg.get("normalize", "fit_fraction", float)
    spec = None
    for run in runs:
        rs = ingest.load_record_set(_resolve(ws, run))
        for f in sorted(_resolve(ws, run).glob("*.csv")):
            ws.read(f)
        if spec is None:
            spec = _band_spec(ws.cfg, rs.sample_rate_hz)
            dsp.write_band_spec_csv(spec, ws.wrote(ws.p("bands.csv")))
        h, v = dsp.record_band_vectors(rs.records, rs.sample_rate_hz, spec)
        raw = preprocess.assemble_matrix(h, v, preprocess.band_row_labels(spec))
        stats = preprocess.fit_normalizer(raw, fit_fraction)
        norm = preprocess.apply_normalizer(raw, stats)
        names = [repr(float(t)) for t in rs.timestamps]
        preprocess.write_matrix_csv(raw, ws.wrote(ws.p("features", f"raw_{run.run_id}.csv")), names)
        preprocess.write_matrix_csv(norm, ws.wrote(ws.p("features", f"matrix_{run.run_id}.csv")), names)
        preprocess.write_stats_csv(stats, ws.wrote(ws.p("features", f"stats_{run.run_id}.csv")))
        ingest.write_format_spec(rs.format_spec, ws.wrote(ws.p("features", f"format_{run.run_id}.txt")))
        log.info("preprocess %s: %d x %d", run.run_id, norm.rows, norm.cols)


def _format(ws: Workspace, run: Run) -> ingest.FormatSpec:
    return ingest.read_format_spec(ws.read(ws.root / "features" / f"format_{run.run_id}.txt"))


def _matrix(ws: Workspace, run: Run) -> preprocess.FeatureMatrix:
    return preprocess.read_matrix_csv(ws.read(ws.root / "features" / f"matrix_{run.run_id}.csv"))


def stage_train_ae(ws: Workspace, seed: int):
    cfg = ws.cfg
    pool = cfg.get("pipeline", "ae_pool")
    runs = [r for r in ws.runs() if r.split == "train" or pool == "train+test"]
    cols = np.hstack([_matrix(ws, r).values for r in runs]).T
    dims = (cols.shape[1], *cfg.get("autoencoder", "encoder_hidden", "ints"), cfg.get("autoencoder", "bottleneck", int))
    ae, hist = models.train_autoencoder(
        cols, dims, tuple(cfg.get("autoencoder", "decoder_hidden", "ints")),
        cfg.cost_config("autoencoder"), cfg.train_options("autoencoder", seed),
    )
    models.save_model(ae, ws.wrote(ws.p("models", "ae.model")))
    hist.write_csv(ws.wrote(ws.p("models", "ae_loss.csv")))
    log.info("train-ae: %d epochs, best val loss %.4g", hist.epoch[-1], hist.best_val_loss)


def stage_extract(ws: Workspace, seed: int):
    ae = models.load_model(ws.read(ws.root / "models" / "ae.model"), "autoencoder")
    for run in ws.runs():
        path = ws.root / "features" / f"matrix_{run.run_id}.csv"
        traj = explain.reactive_monitor(ae, _matrix(ws, run), _matrix_times(path))
        traj.write_csv(ws.wrote(ws.p("trajectories", f"trajectory_{run.run_id}.csv")))


def _trajectory(ws: Workspace, run: Run) -> explain.FeatureTrajectory:
    return explain.FeatureTrajectory.read_csv(ws.read(ws.root / "trajectories" / f"trajectory_{run.run_id}.csv"))


def stage_changepoint(ws: Workspace, seed: int):
    cfg = ws.cfg
    max_k = cfg.get("changepoint", "max_k", int)
    pen_raw = cfg.get("changepoint", "penalty")
    factor = cfg.get("changepoint", "penalty_factor", float)
    path = ws.wrote(ws.p("changepoints.csv"))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["run_id", "onset_index", "detected", "row_change_points"])
        for run in ws.runs():
            feats = _trajectory(ws, run).features
            per_row = []
            for row in feats:
                pen = prognosis.default_penalty(row) if pen_raw == "auto" else float(pen_raw)
                per_row.append(prognosis.detect_change_points(row, max_k, factor * pen).indices)
            found = [i for idx in per_row for i in idx]
            onset = max(found) if found else 0
            wr.writerow([run.run_id, onset, int(bool(found)), "|".join(" ".join(map(str, r)) for r in per_row)])
            log.info("changepoint %s: onset %d%s", run.run_id, onset, "" if found else " (no anomaly detected)")


def _onsets(ws: Workspace) -> dict[str, int]:
    with open(ws.read(ws.root / "changepoints.csv"), newline="", encoding="utf-8") as fh:
        return {r["run_id"]: int(r["onset_index"]) for r in csv.DictReader(fh)}


def stage_label(ws: Workspace, seed: int):
    onsets = _onsets(ws)
    summary = ws.wrote(ws.p("labels.csv"))
    with open(summary, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["run_id", "anomaly_index", "rul_max_s"])
        for run in ws.runs():
            traj = _trajectory(ws, run)
            interval = _format(ws, run).record_interval_s
            onset = min(onsets[run.run_id], traj.times_s.size - 2)
            lab = prognosis.label_rul(traj.times_s.size, interval, onset, traj.times_s)
            lab.write_csv(ws.wrote(ws.p("labels", f"label_{run.run_id}.csv")))
            wr.writerow([run.run_id, onset, repr(lab.rul_max_s)])


def _label(ws: Workspace, run: Run) -> prognosis.RulSeries:
    return prognosis.read_rul_csv(ws.read(ws.root / "labels" / f"label_{run.run_id}.csv"))


def stage_train_ffnn(ws: Workspace, seed: int):
    cfg = ws.cfg
    runs = [r for r in ws.runs() if r.split == "train"]
    feats = np.vstack([_trajectory(ws, r).features.T for r in runs])
    labels = [_label(ws, r) for r in runs]
    y = np.concatenate([l.normalized for l in labels])
    rul_max = float(np.mean([l.rul_max_s for l in labels]))
    ffnn, hist = models.train_ffnn(
        feats, y, tuple(cfg.get("ffnn", "hidden", "ints")), cfg.train_options("ffnn", seed),
        cfg.cost_config("ffnn"), rul_max,
    )
    models.save_model(ffnn, ws.wrote(ws.p("models", "ffnn.model")))
    hist.write_csv(ws.wrote(ws.p("models", "ffnn_loss.csv")))
    log.info("train-ffnn: %d epochs, best val loss %.4g", hist.epoch[-1], hist.best_val_loss)


def stage_estimate(ws: Workspace, seed: int):
    ffnn = models.load_model(ws.read(ws.root / "models" / "ffnn.model"), "ffnn")
    for run in ws.runs():
        lab = _label(ws, run)
        feats = _trajectory(ws, run).features.T
        # seconds use the run's own truncated maximum, so estimates share the label scale
        _, seconds = models.estimate_rul(ffnn, feats, lab.rul_max_s)
        lab.est_rul_s = seconds
        lab.write_csv(ws.wrote(ws.p("estimates", f"rul_{run.run_id}.csv")))


def _write_run_metrics(ws: Workspace, prefix: str, name: str):
    offset = ws.cfg.get("evaluate", "re_offset", int)
    metrics = []
    for run in ws.runs():
        if run.split != "test":
            continue
        series = prognosis.read_rul_csv(ws.read(ws.root / "estimates" / f"{prefix}_{run.run_id}.csv"))
        metrics.append(prognosis.RunMetrics(
            run.run_id,
            prognosis.rmse(series.true_rul_s, series.est_rul_s),
            prognosis.series_relative_error(series.true_rul_s, series.est_rul_s, offset),
        ))
    prognosis.write_metrics_csv(metrics, ws.wrote(ws.p(name)))
    for m in metrics:
        log.info("%s %s: rmse %.1f s, re %.3f", name, m.run_id, m.rmse_s, m.re)


def stage_evaluate(ws: Workspace, seed: int):
    _write_run_metrics(ws, "rul", "metrics.csv")


def stage_baseline_linear(ws: Workspace, seed: int):
    runs = ws.runs()
    train = [r for r in runs if r.split == "train"]
    x = np.vstack([_trajectory(ws, r).features.T for r in train])
    y = np.concatenate([_label(ws, r).normalized for r in train])
    model = prognosis.fit_linear_baseline(x, y)
    with open(ws.wrote(ws.p("models", "linear.csv")), "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["term", "value"])
        for i, w in enumerate(model.weights):
            wr.writerow([f"f{i + 1}", repr(float(w))])
        wr.writerow(["intercept", repr(model.intercept)])
    for run in runs:
        lab = _label(ws, run)
        lab.est_rul_s = prognosis.predict_linear(model, _trajectory(ws, run).features.T) * lab.rul_max_s
        lab.write_csv(ws.wrote(ws.p("estimates", f"linear_{run.run_id}.csv")))
    _write_run_metrics(ws, "linear", "baseline_metrics.csv")


def stage_explain(ws: Workspace, seed: int):
    cfg = ws.cfg
    ae = models.load_model(ws.read(ws.root / "models" / "ae.model"), "autoencoder")
    ffnn = models.load_model(ws.read(ws.root / "models" / "ffnn.model"), "ffnn")
    runs = ws.runs()
    labels = preprocess.read_matrix_csv(ws.read(ws.root / "features" / f"matrix_{runs[0].run_id}.csv")).label_strings()

    start, stop, step = (cfg.get("explain", k, float) for k in ("sweep_start", "sweep_stop", "sweep_step"))
    if step <= 0 or stop < start:
        raise ConfigError("[explain] needs sweep_step > 0 and sweep_stop >= sweep_start")
    sweep = start + step * np.arange(int(math.floor((stop - start) / step + 1e-9)) + 1)
    for k in range(ae.bottleneck_dim):
        grid = explain.inject_features(ae, k, sweep)
        grid.write_csv(ws.wrote(ws.p("explain", f"injection_{k + 1}.csv")), labels)

    explain.write_importance_csv(explain.connection_weight_importance(ffnn.net),
                                 ws.wrote(ws.p("explain", "importance.csv")))

    spec = _band_spec(cfg, _format(ws, runs[0]).sample_rate_hz)
    freqs = []
    if cfg.get("explain", "n_balls").strip():
        geom = explain.BearingGeometry(
            n_balls=cfg.get("explain", "n_balls", int),
            ball_diameter=cfg.get("explain", "ball_diameter", float),
            pitch_diameter=cfg.get("explain", "pitch_diameter", float),
            contact_angle=cfg.get("explain", "contact_angle_rad", float),
            shaft_hz=cfg.get("explain", "shaft_hz", float),
        )
        freqs = [(k.upper(), v) for k, v in explain.characteristic_frequencies(geom).items()]
    elif cfg.get("data", "source") == "synth":
        freqs = [(f"FAULT{i + 1}", f) for i, f in enumerate(cfg.get("synth", "fault_freqs_hz", "floats"))]
    ann = explain.annotate_bands(spec, freqs, cfg.get("explain", "harmonics", int))
    explain.write_annotations_csv(spec, ann, ws.wrote(ws.p("explain", "annotations.csv")))

    if cfg.get("explain", "spectrogram", bool):
        for run in runs:
            explain.write_pgm(_matrix(ws, run).values, ws.wrote(ws.p("explain", f"spectrogram_{run.run_id}.pgm")))


STAGE_FUNCS = {
    "synth": stage_synth,
    "preprocess": stage_preprocess,
    "train-ae": stage_train_ae,
    "extract": stage_extract,
    "changepoint": stage_changepoint,
    "label": stage_label,
    "train-ffnn": stage_train_ffnn,
    "estimate": stage_estimate,
    "explain": stage_explain,
    "evaluate": stage_evaluate,
    "baseline-linear": stage_baseline_linear,
}


def run_stage(stage: str, cfg: PipelineConfig) -> Path:
    """Run one stage; returns the path of its manifest."""
    if stage not in STAGE_FUNCS:
        raise ConfigError(f"unknown stage {stage!r}; choose from {', '.join(STAGES)}")
    ws = Workspace(cfg)
    ws.require(stage)
    seed = cfg.stage_seed(stage)
    with output_lock(ws.root):
        STAGE_FUNCS[stage](ws, seed)
        return ws.write_manifest(stage, seed)


def run_all(cfg: PipelineConfig) -> list[Path]:
    stages = [s for s in STAGES if not (s == "synth" and cfg.get("data", "source") != "synth")]
    return [run_stage(s, cfg) for s in stages]
