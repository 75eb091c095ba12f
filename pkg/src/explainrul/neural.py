"""
Dense feed-forward networks in plain numpy.

Layers compute ``x_next = s * f(W @ x + b)``. Batches are 2-D arrays with one
sample per row. The training cost is

    E = mean squared error (averaged over samples and output units)
        + lam * 0.5 * sum of squared weights
        + beta * sum over hidden layers of KL(rho || rho_hat_l)

with ``rho_hat_l`` the batch- and unit-averaged ``|f(z)|`` of layer ``l``.
Biases are not penalized and the output layer carries no sparsity term.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DivergenceError, StructuralError

ACTIVATIONS = ("sigmoid", "elu", "relu", "linear")
RHO_CLAMP = 1e-6


def activate(kind: str, z):
    z = np.asarray(z, dtype=float)
    if kind == "sigmoid":
        # split by sign so exp never overflows
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
    elif kind == "elu":
        out = np.where(z < 0, np.expm1(np.minimum(z, 0.0)), z)
    elif kind == "relu":
        out = np.maximum(z, 0.0)
    elif kind == "linear":
        out = z.copy()
    else:
        raise ValueError(f"unknown activation {kind!r}")
    return float(out) if out.ndim == 0 else out


def activation_derivative(kind: str, z, fz=None):
    z = np.asarray(z, dtype=float)
    if kind == "sigmoid":
        s = activate("sigmoid", z) if fz is None else fz
        return s * (1.0 - s)
    if kind == "elu":
        return np.where(z < 0, np.exp(np.minimum(z, 0.0)), 1.0)
    if kind == "relu":
        return (z > 0).astype(float)
    if kind == "linear":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {kind!r}")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str
    output_scale: float = 1.0

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise StructuralError("layer dimensions must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class Layer:
    spec: LayerSpec
    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.W.shape != (self.spec.out_dim, self.spec.in_dim) or self.b.shape != (self.spec.out_dim,):
            raise StructuralError(
                f"layer {self.spec} got W{self.W.shape}, b{self.b.shape}"
            )


class Network:
    """An ordered stack of dense layers."""

    def __init__(self, layers: list[Layer]):
        if not layers:
            raise StructuralError("a network needs at least one layer")
        for a, b in zip(layers, layers[1:]):
            if a.spec.out_dim != b.spec.in_dim:
                raise StructuralError(f"layer output {a.spec.out_dim} does not feed input {b.spec.in_dim}")
        self.layers = list(layers)

    @classmethod
    def initialize(cls, specs, seed: int = 0) -> "Network":
        """Uniform +-sqrt(6/(in+out)) weights, zero biases."""
        rng = np.random.default_rng(seed)
        layers = []
        for s in specs:
            limit = math.sqrt(6.0 / (s.in_dim + s.out_dim))
            layers.append(Layer(s, rng.uniform(-limit, limit, (s.out_dim, s.in_dim)), np.zeros(s.out_dim)))
        return cls(layers)

    @classmethod
    def from_dims(cls, dims, activations, output_scales=None, seed: int = 0) -> "Network":
        if len(activations) != len(dims) - 1:
            raise StructuralError("need one activation per layer")
        output_scales = output_scales or [1.0] * len(activations)
        specs = [LayerSpec(a, b, f, s) for a, b, f, s in zip(dims[:-1], dims[1:], activations, output_scales)]
        return cls.initialize(specs, seed)

    @property
    def specs(self) -> list[LayerSpec]:
        return [l.spec for l in self.layers]

    @property
    def in_dim(self) -> int:
        return self.layers[0].spec.in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].spec.out_dim

    def copy(self) -> "Network":
        return Network([Layer(l.spec, l.W.copy(), l.b.copy()) for l in self.layers])

    def __add__(self, other: "Network") -> "Network":
        # shares parameter arrays; used to train encoder and decoder jointly
        return Network(self.layers + other.layers)

    def parameters(self) -> list[np.ndarray]:
        return [p for l in self.layers for p in (l.W, l.b)]

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())

    def __call__(self, x):
        return forward(self, x)[0]


@dataclass
class ForwardCache:
    inputs: list[np.ndarray] = field(default_factory=list)   # x^l fed to each layer
    pre: list[np.ndarray] = field(default_factory=list)      # z^l
    act: list[np.ndarray] = field(default_factory=list)      # f(z^l), before output scaling


def forward(net: Network, x):
    """Evaluate ``net`` on one vector or a batch (rows). Returns (output, cache)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != net.in_dim:
        raise StructuralError(f"input of shape {x.shape} does not fit network input dim {net.in_dim}")
    cache = ForwardCache()
    h = xb
    for layer in net.layers:
        cache.inputs.append(h)
        z = h @ layer.W.T + layer.b
        a = activate(layer.spec.activation, z)
        cache.pre.append(z)
        cache.act.append(a)
        s = layer.spec.output_scale
        h = a if s == 1.0 else s * a
    return (h[0] if single else h), cache


@dataclass(frozen=True)
class CostConfig:
    lam: float = 1e-4
    beta: float = 1e-2
    rho: float = 0.05

    def __post_init__(self):
        if self.lam < 0 or self.beta < 0:
            raise ConfigError("lam and beta must be non-negative")
        if not 0 < self.rho < 1:
            raise ConfigError("rho must lie in (0, 1)")


def kl_divergence(rho: float, rho_hat: float) -> float:
    return rho * math.log(rho / rho_hat) + (1 - rho) * math.log((1 - rho) / (1 - rho_hat))


def _batch(inputs, targets):
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    y = np.asarray(targets, dtype=float)
    y = y.reshape(x.shape[0], -1) if y.ndim < 2 else y
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    if y.shape[0] != x.shape[0]:
        raise StructuralError(f"{x.shape[0]} inputs vs {y.shape[0]} targets")
    return x, y


def _rho_hats(net: Network, cache: ForwardCache):
    """(clamped rho_hat, raw rho_hat) per hidden layer."""
    out = []
    for a in cache.act[:-1]:
        raw = float(np.mean(np.abs(a)))
        out.append((min(max(raw, RHO_CLAMP), 1.0 - RHO_CLAMP), raw))
    return out


def cost(net: Network, inputs, targets, cfg: CostConfig):
    """Total cost and its components ``{'mse', 'l2', 'kl'}`` (unweighted)."""
    x, y = _batch(inputs, targets)
    out, cache = forward(net, x)
    if out.shape != y.shape:
        raise StructuralError(f"targets of shape {y.shape} do not match outputs {out.shape}")
    mse = float(np.mean((y - out) ** 2))
    l2 = 0.5 * sum(float(np.sum(l.W * l.W)) for l in net.layers)
    kl = sum(kl_divergence(cfg.rho, rh) for rh, _ in _rho_hats(net, cache))
    total = mse + cfg.lam * l2 + cfg.beta * kl
    return total, {"mse": mse, "l2": l2, "kl": kl}


def gradients(net: Network, inputs, targets, cfg: CostConfig):
    """Analytic ``dE/dW`` and ``dE/db`` for every layer, as a list of (dW, db)."""
    x, y = _batch(inputs, targets)
    out, cache = forward(net, x)
    if out.shape != y.shape:
        raise StructuralError(f"targets of shape {y.shape} do not match outputs {out.shape}")
    n = x.shape[0]
    g = 2.0 * (out - y) / y.size
    rho_hats = _rho_hats(net, cache)
    grads = []
    for l in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[l]
        z, a = cache.pre[l], cache.act[l]
        da = g * layer.spec.output_scale
        if l < len(net.layers) - 1 and cfg.beta > 0:
            rh, raw = rho_hats[l]
            if RHO_CLAMP < raw < 1.0 - RHO_CLAMP:
                dkl = -cfg.rho / rh + (1 - cfg.rho) / (1 - rh)
                da = da + cfg.beta * dkl * np.sign(a) / (n * a.shape[1])
        dz = da * activation_derivative(layer.spec.activation, z, a)
        dW = dz.T @ cache.inputs[l] + cfg.lam * layer.W
        db = dz.sum(axis=0)
        grads.append((dW, db))
        g = dz @ layer.W
    grads.reverse()
    return grads


@dataclass(frozen=True)
class TrainOptions:
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 2000
    seed: int = 0
    validation_fraction: float = 0.2
    patience: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not 0 <= self.validation_fraction <= 0.9:
            raise ConfigError("validation_fraction must lie in [0, 0.9]")
        if self.batch_size < 1 or self.epochs < 0 or self.patience < 1:
            raise ConfigError("batch_size >= 1, epochs >= 0 and patience >= 1 required")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")


@dataclass
class LossHistory:
    epoch: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    mse: list[float] = field(default_factory=list)
    l2: list[float] = field(default_factory=list)
    kl: list[float] = field(default_factory=list)

    def append(self, epoch, train_loss, val_loss, parts):
        self.epoch.append(epoch)
        self.train_loss.append(train_loss)
        self.val_loss.append(val_loss)
        self.mse.append(parts["mse"])
        self.l2.append(parts["l2"])
        self.kl.append(parts["kl"])

    @property
    def best_val_loss(self) -> float:
        return min(self.val_loss)

    def write_csv(self, path):
        with open(Path(path), "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["epoch", "train_loss", "val_loss", "mse", "l2", "kl"])
            for row in zip(self.epoch, self.train_loss, self.val_loss, self.mse, self.l2, self.kl):
                wr.writerow([row[0], *(repr(float(v)) for v in row[1:])])


def split_indices(n: int, validation_fraction: float, rng: np.random.Generator):
    """Seeded (train, validation) index split; validation gets floor(fraction * n)."""
    perm = rng.permutation(n)
    n_val = int(math.floor(validation_fraction * n))
    if n - n_val < 1:
        n_val = n - 1
    return perm[n_val:], perm[:n_val]


def train(net: Network, inputs, targets, cfg: CostConfig, opt: TrainOptions = TrainOptions()):
    """Mini-batch Adam with early stopping on validation loss.

    Returns ``(best_network, history)``; ``net`` itself is left untouched.
    History row 0 holds the losses of the initial parameters.
    """
    # overflow shows up as a non-finite loss and is reported as DivergenceError
    with np.errstate(over="ignore", invalid="ignore"):
        return _train(net, inputs, targets, cfg, opt)


def _train(net, inputs, targets, cfg, opt):
    x, y = _batch(inputs, targets)
    rng = np.random.default_rng(opt.seed)
    tr_idx, va_idx = split_indices(x.shape[0], opt.validation_fraction, rng)
    xt, yt = x[tr_idx], y[tr_idx]
    xv, yv = (x[va_idx], y[va_idx]) if va_idx.size else (xt, yt)

    work = net.copy()
    params = work.parameters()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]

    history = LossHistory()
    tl, parts = cost(work, xt, yt, cfg)
    vl = cost(work, xv, yv, cfg)[0] if va_idx.size else tl
    if not (math.isfinite(tl) and math.isfinite(vl)):
        raise DivergenceError(0)
    history.append(0, tl, vl, parts)
    best, best_loss, stale, step = work.copy(), vl, 0, 0

    for epoch in range(1, opt.epochs + 1):
        order = rng.permutation(xt.shape[0])
        for start in range(0, order.size, opt.batch_size):
            sel = order[start:start + opt.batch_size]
            grads = gradients(work, xt[sel], yt[sel], cfg)
            step += 1
            c1 = 1.0 - opt.beta1 ** step
            c2 = 1.0 - opt.beta2 ** step
            for i, g in enumerate(gi for pair in grads for gi in pair):
                m[i] = opt.beta1 * m[i] + (1 - opt.beta1) * g
                v[i] = opt.beta2 * v[i] + (1 - opt.beta2) * g * g
                params[i] -= opt.learning_rate * (m[i] / c1) / (np.sqrt(v[i] / c2) + opt.eps)
        tl, parts = cost(work, xt, yt, cfg)
        vl = cost(work, xv, yv, cfg)[0] if va_idx.size else tl
        if not (math.isfinite(tl) and math.isfinite(vl)):
            raise DivergenceError(epoch)
        history.append(epoch, tl, vl, parts)
        if vl < best_loss:
            best, best_loss, stale = work.copy(), vl, 0
        else:
            stale += 1
            if stale >= opt.patience:
                break
    return best, history
