"""
The autoencoder that compresses octave-band spectra to a few high-level
features, the feed-forward regressor that maps those features to RUL, and a
checksummed text format for both.
"""

from __future__ import annotations

import hashlib
import io
import os
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    ChecksumError,
    KindMismatchError,
    ModelFileError,
    ModelVersionError,
    StructuralError,
    TruncatedFileError,
)
from .neural import CostConfig, Layer, LayerSpec, Network, TrainOptions, train
from .preprocess import NormalizationStats

FORMAT_VERSION = 1

DEFAULT_ENCODER_DIMS = (176, 64, 16, 4)
DEFAULT_DECODER_HIDDEN = (64,)
DEFAULT_FFNN_HIDDEN = (8, 4)
ENCODER_ACTIVATIONS = ("sigmoid", "elu", "elu")
DECODER_OUTPUT_SCALE = 3.0


@dataclass
class AeModel:
    encoder: Network
    decoder: Network
    normalization: NormalizationStats | None = None
    validation_loss: float = float("nan")
    train_mse: float = float("nan")

    def __post_init__(self):
        if self.encoder.out_dim != self.decoder.in_dim:
            raise StructuralError("encoder output and decoder input differ")
        if self.decoder.out_dim != self.encoder.in_dim:
            raise StructuralError("decoder output and encoder input differ")

    @property
    def bottleneck_dim(self) -> int:
        return self.encoder.out_dim

    @property
    def input_dim(self) -> int:
        return self.encoder.in_dim


@dataclass
class FfnnModel:
    net: Network
    rul_max_s: float = 1.0
    validation_loss: float = float("nan")

    def __post_init__(self):
        if self.net.layers[-1].spec.activation != "relu":
            raise StructuralError("the RUL regressor must end in a relu layer")


def autoencoder_network(encoder_dims=DEFAULT_ENCODER_DIMS, decoder_hidden=DEFAULT_DECODER_HIDDEN, seed: int = 0):
    """Fresh (encoder, decoder) pair: sigmoid/elu/elu encoder, elu decoder with x3 output."""
    encoder_dims = tuple(encoder_dims)
    n_enc = len(encoder_dims) - 1
    enc_acts = (ENCODER_ACTIVATIONS + ("elu",) * n_enc)[:n_enc]
    encoder = Network.from_dims(encoder_dims, enc_acts, seed=seed)
    dec_dims = (encoder_dims[-1], *decoder_hidden, encoder_dims[0])
    n_dec = len(dec_dims) - 1
    scales = [1.0] * (n_dec - 1) + [DECODER_OUTPUT_SCALE]
    decoder = Network.from_dims(dec_dims, ["elu"] * n_dec, scales, seed=seed + 1)
    return encoder, decoder


def train_autoencoder(columns, encoder_dims=None, decoder_hidden=DEFAULT_DECODER_HIDDEN,
                      cfg: CostConfig = CostConfig(), opt: TrainOptions | None = None,
                      normalization: NormalizationStats | None = None):
    """Fit encoder and decoder jointly to reproduce ``columns`` (samples as rows).

    By default half of a seeded permutation trains and the rest validates.
    Returns ``(AeModel, LossHistory)``.
    """
    x = np.atleast_2d(np.asarray(columns, dtype=float))
    if encoder_dims is None:
        encoder_dims = (x.shape[1], *DEFAULT_ENCODER_DIMS[1:])
    if x.shape[1] != encoder_dims[0]:
        raise StructuralError(f"columns of length {x.shape[1]} for encoder input {encoder_dims[0]}")
    if x.shape[0] < 2 * encoder_dims[-1]:
        raise StructuralError(f"need at least {2 * encoder_dims[-1]} columns, got {x.shape[0]}")
    opt = opt or TrainOptions(validation_fraction=0.5)
    encoder, decoder = autoencoder_network(encoder_dims, decoder_hidden, seed=opt.seed)
    best, history = train(encoder + decoder, x, x, cfg, opt)
    n_enc = len(encoder.layers)
    enc, dec = Network(best.layers[:n_enc]), Network(best.layers[n_enc:])
    best_epoch = int(np.argmin(history.val_loss))
    model = AeModel(enc, dec, normalization, validation_loss=history.val_loss[best_epoch],
                    train_mse=history.mse[best_epoch])
    return model, history


def encode(ae: AeModel, column) -> np.ndarray:
    column = np.asarray(column, dtype=float)
    if column.shape != (ae.input_dim,):
        raise StructuralError(f"column of shape {column.shape}, encoder expects ({ae.input_dim},)")
    return ae.encoder(column)


def decode(ae: AeModel, features) -> np.ndarray:
    features = np.asarray(features, dtype=float)
    if features.shape != (ae.bottleneck_dim,):
        raise StructuralError(f"feature vector of shape {features.shape}, decoder expects ({ae.bottleneck_dim},)")
    return ae.decoder(features)


def ffnn_network(in_dim: int = 4, hidden=DEFAULT_FFNN_HIDDEN, seed: int = 0) -> Network:
    dims = (in_dim, *hidden, 1)
    acts = ["elu"] * len(hidden) + ["relu"]
    return Network.from_dims(dims, acts, seed=seed)


def train_ffnn(features, labels, hidden=DEFAULT_FFNN_HIDDEN, opt: TrainOptions | None = None,
               cfg: CostConfig = CostConfig(lam=1e-4, beta=0.0), rul_max_s: float = 1.0):
    """Fit the RUL regressor on normalized labels in [0, 1]; 70/30 split by default.

    Returns ``(FfnnModel, LossHistory)``.
    """
    x = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(labels, dtype=float).reshape(-1, 1)
    if x.shape[0] != y.shape[0]:
        raise StructuralError(f"{x.shape[0]} feature rows vs {y.shape[0]} labels")
    if np.any(y < 0) or np.any(y > 1) or not np.all(np.isfinite(y)):
        raise ValueError("normalized RUL labels must lie in [0, 1]")
    opt = opt or TrainOptions(validation_fraction=0.3)
    net = ffnn_network(x.shape[1], hidden, seed=opt.seed)
    best, history = train(net, x, y, cfg, opt)
    return FfnnModel(best, float(rul_max_s), validation_loss=history.best_val_loss), history


def estimate_rul(ffnn: FfnnModel, features, rul_max_s: float | None = None):
    """(normalized, seconds) for one feature vector or a batch of rows."""
    features = np.asarray(features, dtype=float)
    if features.shape[-1] != ffnn.net.in_dim:
        raise StructuralError(f"features of width {features.shape[-1]}, model expects {ffnn.net.in_dim}")
    out = ffnn.net(features)
    normalized = out[0] if features.ndim == 1 else out[:, 0]
    scale = ffnn.rul_max_s if rul_max_s is None else rul_max_s
    if features.ndim == 1:
        return float(normalized), float(normalized) * scale
    return normalized, normalized * scale


# -- serialization -----------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _created() -> str:
    # honour SOURCE_DATE_EPOCH so repeated runs write identical bytes
    epoch = int(os.environ.get("SOURCE_DATE_EPOCH", "0"))
    return datetime.fromtimestamp(epoch, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _network_blocks(prefix: str, net: Network, out: io.StringIO):
    out.write(f"{prefix}_layers={len(net.layers)}\n")
    for i, layer in enumerate(net.layers):
        s = layer.spec
        out.write(f"[{prefix}.{i}] in={s.in_dim} out={s.out_dim} activation={s.activation} "
                  f"output_scale={_fmt(s.output_scale)}\n")
        for row in layer.W:
            out.write(",".join(_fmt(v) for v in row) + "\n")
        out.write("bias=" + ",".join(_fmt(v) for v in layer.b) + "\n")


def dumps_model(model, created: str | None = None) -> bytes:
    if isinstance(model, AeModel):
        kind, nets = "autoencoder", [("encoder", model.encoder), ("decoder", model.decoder)]
        extras = {"validation_loss": _fmt(model.validation_loss), "train_mse": _fmt(model.train_mse)}
        norm = model.normalization
    elif isinstance(model, FfnnModel):
        kind, nets = "ffnn", [("net", model.net)]
        extras = {"rul_max_s": _fmt(model.rul_max_s), "validation_loss": _fmt(model.validation_loss)}
        norm = None
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    out = io.StringIO()
    out.write("# explainrul model\n")
    out.write(f"format_version={FORMAT_VERSION}\n")
    out.write(f"kind={kind}\n")
    out.write(f"created={created or getattr(model, 'created', None) or _created()}\n")
    for name, net in nets:
        dims = [net.in_dim] + [l.spec.out_dim for l in net.layers]
        out.write(f"{name}_dims={','.join(map(str, dims))}\n")
        out.write(f"{name}_activations={','.join(l.spec.activation for l in net.layers)}\n")
        out.write(f"{name}_output_scales={','.join(_fmt(l.spec.output_scale) for l in net.layers)}\n")
    for k, v in extras.items():
        out.write(f"{k}={v}\n")
    out.write("[normalization]\n")
    if norm is None:
        out.write("rows=0\n")
    else:
        out.write(f"rows={norm.rows} fit_fraction={_fmt(norm.fit_fraction)}\n")
        for m, s in zip(norm.mu, norm.sigma):
            out.write(f"{_fmt(m)},{_fmt(s)}\n")
    for name, net in nets:
        _network_blocks(name, net, out)
    body = out.getvalue().encode("utf-8")
    digest = hashlib.blake2b(body, digest_size=8).hexdigest()
    return body + f"checksum={digest}\n".encode("ascii")


def save_model(model, path, created: str | None = None):
    data = dumps_model(model, created)
    Path(path).write_bytes(data)
    return data


class _Lines:
    def __init__(self, lines):
        self.lines = lines
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise TruncatedFileError("model file ends early")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def keyvalue(self, key: str) -> str:
        line = self.next()
        k, sep, v = line.partition("=")
        if not sep or k != key:
            raise ModelFileError(f"expected '{key}=', found {line!r}")
        return v


def _floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split(",")], dtype=float) if text else np.empty(0)


def _read_network(prefix: str, rd: _Lines) -> Network:
    n_layers = int(rd.keyvalue(f"{prefix}_layers"))
    layers = []
    for i in range(n_layers):
        header = rd.next()
        tag, _, rest = header.partition(" ")
        if tag != f"[{prefix}.{i}]":
            raise ModelFileError(f"expected layer block [{prefix}.{i}], found {header!r}")
        fields = dict(item.split("=", 1) for item in rest.split())
        spec = LayerSpec(int(fields["in"]), int(fields["out"]), fields["activation"], float(fields["output_scale"]))
        W = np.vstack([_floats(rd.next()) for _ in range(spec.out_dim)])
        b = _floats(rd.keyvalue("bias"))
        layers.append(Layer(spec, W, b))
    return Network(layers)


def loads_model(data: bytes, expected_kind: str | None = None):
    if not data.endswith(b"\n"):
        raise TruncatedFileError("model file does not end with a newline")
    body, sep, last = data[:-1].rpartition(b"\n")
    if not sep or not last.startswith(b"checksum="):
        raise TruncatedFileError("checksum line missing")
    body += b"\n"
    digest = hashlib.blake2b(body, digest_size=8).hexdigest()
    if last[len(b"checksum="):].decode("ascii", "replace") != digest:
        raise ChecksumError("model file checksum mismatch")
    rd = _Lines(body.decode("utf-8").splitlines())
    rd.next()
    version = int(rd.keyvalue("format_version"))
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"format_version {version}, this build reads {FORMAT_VERSION}")
    kind = rd.keyvalue("kind")
    if expected_kind is not None and kind != expected_kind:
        raise KindMismatchError(f"file holds a {kind} model, expected {expected_kind}")
    created = rd.keyvalue("created")
    names = ["encoder", "decoder"] if kind == "autoencoder" else ["net"]
    for name in names:
        rd.keyvalue(f"{name}_dims")
        rd.keyvalue(f"{name}_activations")
        rd.keyvalue(f"{name}_output_scales")
    extras = {}
    keys = ["validation_loss", "train_mse"] if kind == "autoencoder" else ["rul_max_s", "validation_loss"]
    for k in keys:
        extras[k] = float(rd.keyvalue(k))
    if rd.next() != "[normalization]":
        raise ModelFileError("normalization block missing")
    head = dict(item.split("=", 1) for item in rd.next().split())
    rows = int(head["rows"])
    norm = None
    if rows:
        pairs = np.vstack([_floats(rd.next()) for _ in range(rows)])
        norm = NormalizationStats(pairs[:, 0], pairs[:, 1], float(head["fit_fraction"]))
    nets = {name: _read_network(name, rd) for name in names}
    if kind == "autoencoder":
        model = AeModel(nets["encoder"], nets["decoder"], norm, extras["validation_loss"], extras["train_mse"])
    elif kind == "ffnn":
        model = FfnnModel(nets["net"], extras["rul_max_s"], extras["validation_loss"])
    else:
        raise ModelFileError(f"unknown model kind {kind!r}")
    model.created = created
    return model


def load_model(path, expected_kind: str | None = None):
    """Read a model file. ``expected_kind`` is ``'autoencoder'`` or ``'ffnn'``."""
    return loads_model(Path(path).read_bytes(), expected_kind)
