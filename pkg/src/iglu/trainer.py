"""Fully connected classifier trained with hand-written backpropagation.

The hidden-layer nonlinearity is any :class:`ActivationSpec`; gradients flow
through :func:`activations.backward_x` and, for a learnable sigma or
``gelu_a``, :func:`activations.backward_param`.  Everything runs in float64
and is single-threaded, so a run is reproducible from its seeds.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from iglu import activations as act
from iglu.activations import ActivationSpec
from iglu.longtail import LabeledDataset, LongTailConfig, class_weights, generate

F64 = np.float64


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, last: "EpochStats | None"):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch
        self.last = last


@dataclass(frozen=True)
class MLPConfig:
    layer_sizes: tuple[int, ...]
    activation: ActivationSpec
    sigma_sharing: str = "per_layer"  # or "global"
    init_scheme: str = "fan_in_scaled"  # or "constant_negative_bias"
    seed: int = 0
    negative_bias: float = -10.0
    small_weight_std: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "layer_sizes", tuple(int(n) for n in self.layer_sizes))
        if len(self.layer_sizes) < 3 or min(self.layer_sizes) < 1:
            raise ValueError("need input, at least one hidden layer and output sizes, all positive")
        if self.sigma_sharing not in ("per_layer", "global"):
            raise ValueError(f"unknown sigma_sharing {self.sigma_sharing!r}")
        if self.init_scheme not in ("fan_in_scaled", "constant_negative_bias"):
            raise ValueError(f"unknown init_scheme {self.init_scheme!r}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 64
    learning_rate: float = 1e-2
    weight_decay: float = 0.0
    optimizer: str = "adamw"  # or "sgd"
    lr_schedule: str = "cosine"  # or "constant"
    loss: str = "ce"  # or "weighted_ce"
    seed: int = 0
    momentum: float = 0.9

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ValueError("learning_rate must be positive")
        if not self.weight_decay >= 0:
            raise ValueError("weight_decay must be >= 0")
        if self.optimizer not in ("sgd", "adamw"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.loss not in ("ce", "weighted_ce"):
            raise ValueError(f"unknown loss {self.loss!r}")


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    test_loss: float
    test_accuracy: float
    balanced_accuracy: float
    dead_unit_fraction: float
    sigma_values: list[float] | None = None


@dataclass
class TrainReport:
    per_epoch: list[EpochStats]
    initial: EpochStats
    model: "MLP" = field(repr=False, compare=False, default=None)
    schema: str = "iglu-train/1"

    @property
    def final(self) -> EpochStats:
        return self.per_epoch[-1]

    def to_dict(self) -> dict:
        return {
            "schema": self.schema,
            "initial": asdict(self.initial),
            "per_epoch": [asdict(e) for e in self.per_epoch],
            "final": asdict(self.final),
        }


class MLP:
    def __init__(self, config: MLPConfig, weights, biases, sigma_raw):
        self.config = config
        self.weights = weights
        self.biases = biases
        self.sigma_raw = sigma_raw

    @classmethod
    def init(cls, config: MLPConfig) -> "MLP":
        rng = np.random.default_rng([config.seed, 7])
        sizes = config.layer_sizes
        weights, biases = [], []
        n_layers = len(sizes) - 1
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            hidden = i < n_layers - 1
            if config.init_scheme == "constant_negative_bias" and hidden:
                w = rng.normal(0.0, config.small_weight_std, (fan_in, fan_out))
                b = np.full(fan_out, config.negative_bias)
            else:
                w = rng.normal(0.0, math.sqrt(2.0 / fan_in), (fan_in, fan_out))
                b = np.zeros(fan_out)
            weights.append(w)
            biases.append(b)
        spec = config.activation
        sigma_raw = None
        if spec.sigma is not None and spec.sigma.learnable_mode:
            n = n_layers - 1 if config.sigma_sharing == "per_layer" else 1
            sigma_raw = np.full(n, spec.sigma.raw)
        return cls(config, weights, biases, sigma_raw)

    @property
    def n_hidden(self) -> int:
        return len(self.weights) - 1

    def _sigma_slot(self, layer: int) -> int:
        return layer if self.config.sigma_sharing == "per_layer" else 0

    def layer_spec(self, layer: int) -> ActivationSpec:
        spec = self.config.activation
        if self.sigma_raw is None:
            return spec
        return spec.with_param(float(self.sigma_raw[self._sigma_slot(layer)]))

    def sigma_values(self) -> list[float] | None:
        if self.sigma_raw is None:
            return None
        return [float(np.logaddexp(0.0, r)) for r in self.sigma_raw]

    def parameters(self) -> list[np.ndarray]:
        params = list(self.weights) + list(self.biases)
        if self.sigma_raw is not None:
            params.append(self.sigma_raw)
        return params

    def decay_mask(self) -> list[bool]:
        mask = [True] * len(self.weights) + [False] * len(self.biases)
        if self.sigma_raw is not None:
            mask.append(False)
        return mask

    def pre_activations(self, X) -> list[np.ndarray]:
        h = np.asarray(X, dtype=F64)
        zs = []
        for l in range(self.n_hidden):
            z = h @ self.weights[l] + self.biases[l]
            zs.append(z)
            h = act.forward(self.layer_spec(l), z, F64)
        return zs

    def forward(self, X):
        h = np.asarray(X, dtype=F64)
        cache = []
        for l in range(self.n_hidden):
            z = h @ self.weights[l] + self.biases[l]
            cache.append((h, z))
            h = act.forward(self.layer_spec(l), z, F64)
        logits = h @ self.weights[-1] + self.biases[-1]
        cache.append((h, None))
        return logits, cache

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.forward(X)[0], axis=1)


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy(logits, labels, weights=None) -> float:
    """Mean cross-entropy; with class weights, sum(w_y * ce) / sum(w_y)."""
    logp = _log_softmax(logits)
    nll = -logp[np.arange(labels.size), labels]
    if weights is None:
        return float(nll.mean())
    w = weights[labels]
    return float((w * nll).sum() / w.sum())


def loss_and_grads(model: MLP, X, y, weights=None):
    """Loss and gradients aligned with ``model.parameters()``."""
    y = np.asarray(y)
    logits, cache = model.forward(X)
    logp = _log_softmax(logits)
    n = y.size
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=F64)[y]
    wsum = w.sum()
    loss = float(-(w * logp[np.arange(n), y]).sum() / wsum)
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1.0
    dlogits *= (w / wsum)[:, None]

    L = model.n_hidden
    gW = [None] * (L + 1)
    gb = [None] * (L + 1)
    gsig = None if model.sigma_raw is None else np.zeros_like(model.sigma_raw)
    h_last = cache[-1][0]
    gW[L] = h_last.T @ dlogits
    gb[L] = dlogits.sum(axis=0)
    dh = dlogits @ model.weights[L].T
    for l in range(L - 1, -1, -1):
        h_prev, z = cache[l]
        spec = model.layer_spec(l)
        if gsig is not None:
            gsig[model._sigma_slot(l)] += float((dh * act.backward_param(spec, z, F64)).sum())
        dz = dh * act.backward_x(spec, z, F64)
        gW[l] = h_prev.T @ dz
        gb[l] = dz.sum(axis=0)
        if l > 0:
            dh = dz @ model.weights[l].T
    grads = gW + gb
    if gsig is not None:
        grads.append(gsig)
    return loss, grads


def dead_unit_fraction(model: MLP, probe: LabeledDataset | np.ndarray) -> float:
    """Fraction of hidden units whose backward_x is exactly 0 on every probe row."""
    X = probe.features if isinstance(probe, LabeledDataset) else np.asarray(probe, dtype=F64)
    if X.shape[0] == 0:
        raise ValueError("probe set is empty")
    dead = total = 0
    for l, z in enumerate(model.pre_activations(X)):
        g = act.backward_x(model.layer_spec(l), z, F64)
        dead += int(np.all(g == 0.0, axis=0).sum())
        total += z.shape[1]
    return dead / total


def min_abs_gradient(model: MLP, probe: LabeledDataset) -> float:
    """Smallest |backward_x| over all hidden units and probe rows (telemetry)."""
    out = math.inf
    for l, z in enumerate(model.pre_activations(probe.features)):
        out = min(out, float(np.abs(act.backward_x(model.layer_spec(l), z, F64)).min()))
    return out


def balanced_accuracy(labels, preds, num_classes: int) -> float:
    recalls = []
    for k in range(num_classes):
        mask = labels == k
        if mask.any():
            recalls.append(float((preds[mask] == k).mean()))
    return float(np.mean(recalls))


def evaluate(model: MLP, ds: LabeledDataset, weights=None) -> tuple[float, float, float]:
    logits, _ = model.forward(ds.features)
    preds = np.argmax(logits, axis=1)
    loss = cross_entropy(logits, ds.labels, weights)
    return loss, float((preds == ds.labels).mean()), balanced_accuracy(ds.labels, preds, ds.num_classes)


class _Optimizer:
    def __init__(self, params, decay_mask, tc: TrainConfig):
        self.params = params
        self.decay_mask = decay_mask
        self.tc = tc
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, grads, lr):
        tc = self.tc
        self.t += 1
        if tc.optimizer == "sgd":
            for p, g, m, decay in zip(self.params, grads, self.m, self.decay_mask):
                if decay and tc.weight_decay:
                    g = g + tc.weight_decay * p
                m *= tc.momentum
                m += g
                p -= lr * m
            return
        b1, b2, eps = 0.9, 0.999, 1e-8
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v, decay in zip(self.params, grads, self.m, self.v, self.decay_mask):
            if decay and tc.weight_decay:
                p -= lr * tc.weight_decay * p
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


def _lr_at(tc: TrainConfig, step: int, total: int) -> float:
    if tc.lr_schedule == "constant":
        return tc.learning_rate
    return 0.5 * tc.learning_rate * (1.0 + math.cos(math.pi * step / total))


def _stats(model, epoch, train, test, weights) -> EpochStats:
    train_loss = evaluate(model, train, weights)[0]
    test_loss, acc, bacc = evaluate(model, test)
    return EpochStats(epoch=epoch, train_loss=train_loss, test_loss=test_loss,
                      test_accuracy=acc, balanced_accuracy=bacc,
                      dead_unit_fraction=dead_unit_fraction(model, train),
                      sigma_values=model.sigma_values())


def train(mlp: MLPConfig, data: tuple[LabeledDataset, LabeledDataset], tc: TrainConfig) -> TrainReport:
    train_ds, test_ds = data
    if train_ds.feature_dim != mlp.layer_sizes[0]:
        raise ValueError("feature_dim does not match the input layer")
    if train_ds.num_classes != mlp.layer_sizes[-1]:
        raise ValueError("number of classes does not match the output layer")
    model = MLP.init(mlp)
    weights = class_weights(train_ds.histogram()) if tc.loss == "weighted_ce" else None
    opt = _Optimizer(model.parameters(), model.decay_mask(), tc)
    rng = np.random.default_rng([tc.seed, 11])
    n = len(train_ds)
    steps_per_epoch = math.ceil(n / tc.batch_size)
    total = tc.epochs * steps_per_epoch
    initial = _stats(model, 0, train_ds, test_ds, weights)
    history: list[EpochStats] = []
    step = 0
    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(n)
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                for start in range(0, n, tc.batch_size):
                    idx = order[start:start + tc.batch_size]
                    loss, grads = loss_and_grads(model, train_ds.features[idx],
                                                 train_ds.labels[idx], weights)
                    if not (math.isfinite(loss) and all(np.isfinite(g).all() for g in grads)):
                        raise act.NonFiniteInputError(-1, loss)
                    opt.step(grads, _lr_at(tc, step, total))
                    step += 1
                stats = _stats(model, epoch, train_ds, test_ds, weights)
        except act.NonFiniteInputError:
            # an overflowing pre-activation is the usual first symptom
            raise TrainingDivergedError(epoch, history[-1] if history else initial) from None
        if not (math.isfinite(stats.train_loss) and math.isfinite(stats.test_loss)):
            raise TrainingDivergedError(epoch, history[-1] if history else initial)
        history.append(stats)
    return TrainReport(per_epoch=history, initial=initial, model=model)


# ---- imbalance suite ------------------------------------------------------------

@dataclass(frozen=True)
class SuiteBase:
    data: LongTailConfig = LongTailConfig(num_classes=10, n_max=200, feature_dim=16,
                                          class_separation=3.0, test_per_class=50)
    hidden: tuple[int, ...] = (64,)
    train: TrainConfig = TrainConfig(epochs=30, batch_size=64, learning_rate=3e-3,
                                     weight_decay=1e-4, loss="weighted_ce")
    model_seed: int = 0


@dataclass
class SuiteCell:
    activation: str
    ratio: float
    test_loss: float
    balanced_accuracy: float


@dataclass
class SuiteResult:
    activations: list[str]
    ratios: list[float]
    cells: list[SuiteCell]
    schema: str = "iglu-suite/1"

    def cell(self, activation: str, ratio: float) -> SuiteCell:
        for c in self.cells:
            if c.activation == activation and c.ratio == ratio:
                return c
        raise KeyError((activation, ratio))

    def observations(self) -> dict:
        """Per ratio, whether each IGLU-family row beat ReLU on balanced accuracy."""
        out = {}
        if "relu" not in self.activations:
            return out
        for r in self.ratios:
            relu_acc = self.cell("relu", r).balanced_accuracy
            out[f"{r:g}"] = {a: self.cell(a, r).balanced_accuracy > relu_acc
                             for a in self.activations if a.startswith("iglu")}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["activation"]
        for r in self.ratios:
            header += [f"{r:g}:1 loss", f"{r:g}:1 acc"]
        w.writerow(header)
        for a in self.activations:
            row = [a]
            for r in self.ratios:
                c = self.cell(a, r)
                row += [f"{c.test_loss:.6f}", f"{c.balanced_accuracy:.6f}"]
            w.writerow(row)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"schema": self.schema, "activations": self.activations, "ratios": self.ratios,
                "cells": [asdict(c) for c in self.cells], "observations": self.observations()}


def run_imbalance_suite(ratios: Sequence[float], activations: Sequence[ActivationSpec],
                        base: SuiteBase = SuiteBase()) -> SuiteResult:
    """Train on long-tailed data with weighted CE and score on the balanced test split."""
    if any(r < 1 for r in ratios):
        raise ValueError("imbalance ratios must be >= 1")
    cells = []
    labels = [spec.label for spec in activations]
    for spec, label in zip(activations, labels):
        for r in ratios:
            cfg = replace(base.data, imbalance_ratio=float(r))
            data = generate(cfg)
            mlp = MLPConfig(layer_sizes=(cfg.feature_dim, *base.hidden, cfg.num_classes),
                            activation=spec, seed=base.model_seed)
            report = train(mlp, data, base.train)
            cells.append(SuiteCell(label, float(r), report.final.test_loss,
                                   report.final.balanced_accuracy))
    return SuiteResult(labels, [float(r) for r in ratios], cells)
