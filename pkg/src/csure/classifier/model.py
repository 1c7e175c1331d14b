"""Prototype classifier: wFM conv -> C-SURE prototype distances -> small head.

Training follows the per-pass recipe: running class Frechet means are
accumulated batch by batch, SURE is refitted on them once per epoch, and the
head, the wFM weights and the mixture weights w are updated by Adam on the
cross-entropy loss.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..distributions import make_rng
from ..frechet import softmax
from .data import SignalDataset
from .layers import (
    HEAD_KEYS, Adam, PrototypeSet, UnfittedPrototypesError, WfmLayerParams, class_means,
    class_means_backward, head_backward, head_forward, init_head, prototype_layer_backward,
    prototype_layer_forward, refresh_prototypes, softmax_cross_entropy, softmax_jvp_back,
    update_running_fm, wfm_backward, wfm_forward,
)

METRICS_HEADER = ["epoch", "train_acc", "test_acc", "loss"]


class TrainingDivergedError(FloatingPointError):
    def __init__(self, epoch: int, msg: str = ""):
        super().__init__(msg or f"loss became non-finite in epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 120
    batch_size: int = 400
    lr: float = 0.03
    v: float = 1.0
    K: int = 2
    channels: int = 8
    window: int = 5
    stride: int = 2
    conv_filters: int = 8
    hidden: int = 16
    momentum: float = 0.9
    combine: str = "algebra"
    seed: int = 0

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.K, self.channels, self.window, self.stride,
               self.conv_filters, self.hidden) < 1:
            raise ValueError("sizes and counts must be >= 1")
        if not self.v >= 0:
            raise ValueError("v must be >= 0")
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.combine not in ("algebra", "literal"):
            raise ValueError(f"unknown combine mode {self.combine!r}")


@dataclass
class EpochMetrics:
    epoch: int
    train_acc: float
    test_acc: float
    loss: float


@dataclass(eq=False)
class PrototypeClassifier:
    config: TrainConfig
    n_classes: int
    length: int
    wfm: WfmLayerParams
    head: dict
    mix_z: np.ndarray  # (C, K) free mixture weights
    protos: PrototypeSet

    @property
    def mode(self) -> str:
        return "MLE" if self.config.v == 0 else "C-SURE"

    @property
    def mix_w(self) -> np.ndarray:
        return softmax(self.mix_z, axis=-1)

    @property
    def n_positions(self) -> int:
        return (self.length - self.wfm.window) // self.wfm.stride + 1

    def features(self, log_r, theta):
        return wfm_forward(log_r, theta, self.wfm)

    def train_means(self):
        """Class means as a function of the current w (fits held fixed)."""
        return class_means(self.protos, self.config.v, self.mix_w, self.config.combine)

    def distance_features(self, log_r, theta, mode: str = "eval"):
        fu, ft = self.features(log_r, theta)
        if mode == "eval":
            if not self.protos.fitted:
                raise UnfittedPrototypesError("prototypes have not been fitted")
            mu, mt = self.protos.mean_u, self.protos.mean_t
        elif mode == "train":
            mu, mt = self.train_means()
        else:
            raise ValueError(f"unknown mode {mode!r}")
        d, _ = prototype_layer_forward(fu, ft, mu, mt)
        return d

    def logits(self, log_r, theta, mode: str = "eval"):
        return head_forward(self.distance_features(log_r, theta, mode), self.head)[0]

    def predict(self, ds: SignalDataset, batch_size: int = 1024) -> np.ndarray:
        out = [np.argmax(self.logits(ds.log_r[i:i + batch_size], ds.theta[i:i + batch_size]), axis=1)
               for i in range(0, len(ds), batch_size)]
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    def params(self) -> dict:
        """Every trainable array, keyed by name (views, not copies)."""
        p = {"wfm_z": self.wfm.z, "mix_z": self.mix_z}
        p.update(self.head)
        return p

    def to_dict(self) -> dict:
        return {
            "format": "csure-classifier/1",
            "mode": self.mode,
            "config": asdict(self.config),
            "n_classes": self.n_classes,
            "length": self.length,
            "params": {k: np.asarray(a).tolist() for k, a in self.params().items()},
            "prototypes": self.protos.to_dict(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> PrototypeClassifier:
        cfg = TrainConfig(**doc["config"])
        p = {k: np.asarray(a, dtype=np.float64) for k, a in doc["params"].items()}
        wfm = WfmLayerParams(cfg.window, cfg.stride, p["wfm_z"])
        head = {k: p[k] for k in HEAD_KEYS}
        return cls(cfg, int(doc["n_classes"]), int(doc["length"]), wfm, head, p["mix_z"],
                   PrototypeSet.from_dict(doc["prototypes"]))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> PrototypeClassifier:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def init_model(config: TrainConfig, n_classes: int, length: int) -> PrototypeClassifier:
    if length < config.window:
        raise ValueError(f"signal length {length} shorter than window {config.window}")
    rng = make_rng(config.seed)
    z = rng.standard_normal((config.channels, config.window, 1))
    wfm = WfmLayerParams(config.window, config.stride, z)
    n_feat = n_classes * config.channels
    if n_feat < 3:
        raise ValueError("need at least 3 distance features for the width-3 convolution")
    head = init_head(rng, n_feat, n_classes, config.conv_filters, config.hidden)
    protos = PrototypeSet(n_classes, config.channels, config.K, config.momentum)
    return PrototypeClassifier(config, n_classes, length, wfm, head, np.zeros((n_classes, config.K)), protos)


def loss_and_grads(model: PrototypeClassifier, log_r, theta, labels):
    """Cross-entropy on a batch and gradients for every trainable array.

    Prototype statistics (snapshot means and SURE fits) are constants; the
    mixture weights enter through the class-mean formula.  Also returns the
    wFM features so the caller can update the running means.
    """
    cfg = model.config
    fu, ft = model.features(log_r, theta)
    mu, mt = model.train_means()
    d, pcache = prototype_layer_forward(fu, ft, mu, mt)
    logits, hcache = head_forward(d, model.head)
    loss, g_logits = softmax_cross_entropy(logits, labels)
    grads, g_d = head_backward(g_logits, hcache, model.head)
    g_fu, g_ft, g_mu, g_mt = prototype_layer_backward(g_d, pcache)
    grads["wfm_z"] = wfm_backward(log_r, theta, model.wfm, fu, ft, g_fu, g_ft)
    mix_w = model.mix_w
    g_w = class_means_backward(model.protos, cfg.v, mix_w, g_mu, g_mt, cfg.combine)
    grads["mix_z"] = softmax_jvp_back(mix_w, g_w)
    return loss, grads, (fu, ft)


def _prime_prototypes(model: PrototypeClassifier, ds: SignalDataset, batch_size: int):
    for i in range(0, len(ds), batch_size):
        fu, ft = model.features(ds.log_r[i:i + batch_size], ds.theta[i:i + batch_size])
        update_running_fm(model.protos, fu, ft, ds.labels[i:i + batch_size])
    refresh_prototypes(model.protos, model.config.v, model.mix_w, model.config.combine)


def accuracy(model: PrototypeClassifier, ds: SignalDataset | None) -> float:
    if ds is None or len(ds) == 0:
        return math.nan
    return float(np.mean(model.predict(ds) == ds.labels))


def train(train_ds: SignalDataset, test_ds: SignalDataset | None, config: TrainConfig,
          progress=None) -> tuple[PrototypeClassifier, list[EpochMetrics]]:
    """Fit a classifier; metrics are measured in eval mode after each refresh."""
    if len(train_ds) == 0:
        raise ValueError("empty training set")
    C = train_ds.n_classes
    counts = np.bincount(train_ds.labels, minlength=C)
    if (counts == 0).any():
        raise ValueError(f"classes without training data: {np.flatnonzero(counts == 0).tolist()}")
    model = init_model(config, C, train_ds.length)
    # each running class mean averages every (instance, position) feature point
    model.protos.n_obs = counts.astype(np.int64) * model.n_positions
    rng = make_rng(np.random.SeedSequence([config.seed, 1]))
    opt = Adam(config.lr)
    _prime_prototypes(model, train_ds, config.batch_size)
    history = []
    n = len(train_ds)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for i in range(0, n, config.batch_size):
            idx = order[i:i + config.batch_size]
            u, t, y = train_ds.log_r[idx], train_ds.theta[idx], train_ds.labels[idx]
            loss, grads, (fu, ft) = loss_and_grads(model, u, t, y)
            if not math.isfinite(loss) or not all(np.isfinite(g).all() for g in grads.values()):
                raise TrainingDivergedError(epoch)
            total += loss * idx.size
            opt.step(model.params(), grads)
            update_running_fm(model.protos, fu, ft, y)
        refresh_prototypes(model.protos, config.v, model.mix_w, config.combine)
        row = EpochMetrics(epoch, accuracy(model, train_ds), accuracy(model, test_ds), total / n)
        history.append(row)
        if progress is not None:
            progress(row)
    return model, history


def write_metrics_csv(history: list[EpochMetrics], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in history:
            w.writerow([r.epoch, f"{r.train_acc:.17g}", f"{r.test_acc:.17g}", f"{r.loss:.17g}"])


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # rows: true class, cols: predicted
    per_snr: dict = field(default_factory=dict)  # snr -> (accuracy, count)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "per_snr": [{"snr_db": s, "accuracy": a, "count": n} for s, (a, n) in sorted(self.per_snr.items())],
        }


def evaluate(model: PrototypeClassifier, ds: SignalDataset) -> EvalReport:
    pred = model.predict(ds)
    C = model.n_classes
    conf = np.zeros((C, C), dtype=np.int64)
    np.add.at(conf, (ds.labels, pred), 1)
    acc = float(np.trace(conf) / max(len(ds), 1))
    per_snr = {}
    tagged = ~np.isnan(ds.snr_db)
    for s in np.unique(ds.snr_db[tagged]):
        sel = ds.snr_db == s
        per_snr[float(s)] = (float(np.mean(pred[sel] == ds.labels[sel])), int(sel.sum()))
    return EvalReport(acc, conf, per_snr)


def logistic_baseline(train_ds: SignalDataset, test_ds: SignalDataset, epochs: int = 200,
                      lr: float = 0.05, seed: int = 0) -> float:
    """Multinomial logistic regression on flattened (re, im); returns test accuracy."""
    def flat(ds):
        r = np.exp(ds.log_r)
        return np.concatenate([r * np.cos(ds.theta), r * np.sin(ds.theta)], axis=1)

    xtr, xte = flat(train_ds), flat(test_ds)
    C = train_ds.n_classes
    rng = make_rng(seed)
    W = 0.01 * rng.standard_normal((C, xtr.shape[1]))
    b = np.zeros(C)
    opt = Adam(lr)
    for _ in range(epochs):
        loss, g = softmax_cross_entropy(xtr @ W.T + b, train_ds.labels)
        opt.step({"W": W, "b": b}, {"W": g.T @ xtr, "b": g.sum(axis=0)})
    return float(np.mean(np.argmax(xte @ W.T + b, axis=1) == test_ds.labels))
