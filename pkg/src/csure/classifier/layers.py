"""Layers of the prototype classifier with hand-written reverse passes.

Each ``*_forward`` returns its output plus a cache; the matching
``*_backward`` maps an upstream gradient to parameter (and input) gradients.
Prototype statistics are treated as constants in the reverse pass, except for
the mixture weights w, which enter through the C-SURE combination.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..frechet import fm_arrays, softmax
from ..kernels import canonical, wrapdiff
from ..shrinkage import SampleSummary, SureFit, csure_arrays, fit_sure


class UnfittedPrototypesError(RuntimeError):
    """Evaluation requested before any prototype refresh."""


# --------------------------------------------------------------------------
# wFM convolution
# --------------------------------------------------------------------------

@dataclass
class WfmLayerParams:
    window: int
    stride: int
    z: np.ndarray  # (channels_out, window, channels_in) free weights

    @property
    def channels_out(self) -> int:
        return self.z.shape[0]

    def alpha(self) -> np.ndarray:
        J, k, cin = self.z.shape
        return softmax(self.z.reshape(J, k * cin)).reshape(J, k, cin)


def _as3(x):
    x = np.asarray(x, dtype=np.float64)
    return x[..., None] if x.ndim == 2 else x


def wfm_forward(u, theta, params: WfmLayerParams):
    """Strided weighted-Frechet-mean convolution over (n, L[, C_in]) inputs.

    Returns (out_u, out_theta), each (n, T, J) with T = (L - k) // s + 1.
    """
    u, theta = _as3(u), _as3(theta)
    if u.shape[1] < params.window:
        raise ValueError(f"signal length {u.shape[1]} shorter than window {params.window}")
    out_u, out_t, _ = kernels.wfm_windows(u, theta, params.alpha(), params.stride)
    return out_u, out_t


def wfm_backward(u, theta, params: WfmLayerParams, out_u, out_t, g_u, g_t):
    """Gradient of the loss w.r.t. the free weights ``params.z``.

    On a fixed unwrapping branch the window mean is linear in the convex
    weights, so d out / d z_q = alpha_q * (x_q - out) with x_q taken on the
    branch nearest the output angle.
    """
    u, theta = _as3(u), _as3(theta)
    n, L, cin = u.shape
    J, k, _ = params.z.shape
    T = out_u.shape[1]
    idx = np.arange(T)[:, None] * params.stride + np.arange(k)[None, :]
    wu = u[:, idx, :].reshape(n, T, 1, k * cin)
    wt = theta[:, idx, :].reshape(n, T, 1, k * cin)
    alpha = params.alpha().reshape(1, 1, J, k * cin)
    ru = wu - out_u[..., None]
    rt = wrapdiff(wt - out_t[..., None])
    g = (g_u[..., None] * ru + g_t[..., None] * rt).sum(axis=(0, 1))  # (J, k*cin)
    return (alpha[0, 0] * g).reshape(J, k, cin)


# --------------------------------------------------------------------------
# C-SURE prototypes
# --------------------------------------------------------------------------

@dataclass
class PrototypeSet:
    """Per-class running Frechet means, their SURE fits and the saved means."""

    n_classes: int
    channels: int
    K: int = 2
    momentum: float = 0.9
    run_u: np.ndarray = None
    run_t: np.ndarray = None
    seen: np.ndarray = None
    n_obs: np.ndarray = None
    snap_u: np.ndarray = None
    snap_t: np.ndarray = None
    fits: list = field(default_factory=list)
    mean_u: np.ndarray = None
    mean_t: np.ndarray = None

    def __post_init__(self):
        shape = (self.n_classes, self.channels)
        if self.run_u is None:
            self.run_u = np.zeros(shape)
            self.run_t = np.zeros(shape)
        if self.seen is None:
            self.seen = np.zeros(self.n_classes, dtype=bool)
        if self.n_obs is None:
            self.n_obs = np.ones(self.n_classes, dtype=np.int64)

    @property
    def fitted(self) -> bool:
        return self.mean_u is not None and len(self.fits) == self.n_classes

    def copy(self) -> PrototypeSet:
        cp = lambda a: None if a is None else np.array(a)  # noqa: E731
        return PrototypeSet(self.n_classes, self.channels, self.K, self.momentum, cp(self.run_u),
                            cp(self.run_t), cp(self.seen), cp(self.n_obs), cp(self.snap_u),
                            cp(self.snap_t), list(self.fits), cp(self.mean_u), cp(self.mean_t))

    def to_dict(self) -> dict:
        lst = lambda a: None if a is None else np.asarray(a).tolist()  # noqa: E731
        return {
            "n_classes": self.n_classes, "channels": self.channels, "K": self.K,
            "momentum": self.momentum, "run_u": lst(self.run_u), "run_t": lst(self.run_t),
            "seen": lst(self.seen), "n_obs": lst(self.n_obs), "snap_u": lst(self.snap_u),
            "snap_t": lst(self.snap_t), "fits": [f.to_dict() for f in self.fits],
            "mean_u": lst(self.mean_u), "mean_t": lst(self.mean_t),
        }

    @classmethod
    def from_dict(cls, d: dict) -> PrototypeSet:
        arr = lambda a, dt=np.float64: None if a is None else np.asarray(a, dtype=dt)  # noqa: E731
        return cls(d["n_classes"], d["channels"], d["K"], d["momentum"], arr(d["run_u"]),
                   arr(d["run_t"]), arr(d["seen"], bool), arr(d["n_obs"], np.int64),
                   arr(d["snap_u"]), arr(d["snap_t"]), [SureFit.from_dict(f) for f in d["fits"]],
                   arr(d["mean_u"]), arr(d["mean_t"]))


def batch_class_fm(feat_u, feat_t, labels, n_classes):
    """Per-class, per-channel Frechet mean over instances and positions.

    Returns (fm_u, fm_t, present) with shapes (C, J), (C, J), (C,).
    """
    n, T, J = feat_u.shape
    fm_u = np.zeros((n_classes, J))
    fm_t = np.zeros((n_classes, J))
    present = np.zeros(n_classes, dtype=bool)
    for c in range(n_classes):
        sel = labels == c
        if not sel.any():
            continue
        pu = feat_u[sel].reshape(-1, J)
        pt = feat_t[sel].reshape(-1, J)
        fm_u[c], fm_t[c], _ = fm_arrays(pu, pt, axis=0)
        present[c] = True
    return fm_u, fm_t, present


def update_running_fm(state: PrototypeSet, feat_u, feat_t, labels) -> PrototypeSet:
    """Log-domain moving average of the per-class batch Frechet means.

    The first batch that contains a class initialises it; classes absent
    from the batch keep their state.
    """
    fm_u, fm_t, present = batch_class_fm(feat_u, feat_t, labels, state.n_classes)
    m = state.momentum
    for c in np.flatnonzero(present):
        if not state.seen[c]:
            state.run_u[c] = fm_u[c]
            state.run_t[c] = fm_t[c]
            state.seen[c] = True
        else:
            state.run_u[c] = m * state.run_u[c] + (1.0 - m) * fm_u[c]
            state.run_t[c] = canonical(state.run_t[c] + (1.0 - m) * wrapdiff(fm_t[c] - state.run_t[c]))
    return state


def refresh_prototypes(state: PrototypeSet, v: float, mix_w, combine: str = "algebra") -> PrototypeSet:
    """Refit SURE on the running means and recompute the saved class means."""
    if not state.seen.all():
        missing = np.flatnonzero(~state.seen).tolist()
        raise UnfittedPrototypesError(f"no running mean yet for classes {missing}")
    state.snap_u = state.run_u.copy()
    state.snap_t = state.run_t.copy()
    state.fits = [
        fit_sure(SampleSummary(state.snap_u[c], state.snap_t[c], int(state.n_obs[c])), v, state.K, warn=False)
        for c in range(state.n_classes)
    ]
    state.mean_u, state.mean_t = class_means(state, v, mix_w, combine)
    return state


def _fit_arrays(fit: SureFit):
    mu_u = np.array([m.log_r for m in fit.mu_hat])
    mu_t = np.array([m.theta for m in fit.mu_hat])
    return mu_u, mu_t, np.array(fit.lambda_hat)


def class_means(state: PrototypeSet, v: float, mix_w, combine: str = "algebra"):
    """C-SURE class means (C, J) from the snapshot, the fits and weights w (C, K)."""
    mix_w = np.asarray(mix_w, dtype=np.float64)
    mean_u = np.empty_like(state.snap_u)
    mean_t = np.empty_like(state.snap_t)
    for c in range(state.n_classes):
        mu_u, mu_t, lam = _fit_arrays(state.fits[c])
        mean_u[c], mean_t[c] = csure_arrays(state.snap_u[c], state.snap_t[c], mix_w[c], mu_u, mu_t,
                                            lam, v, combine)
    return mean_u, mean_t


def class_means_backward(state: PrototypeSet, v: float, mix_w, g_mu, g_mt, combine: str = "algebra"):
    """Gradient w.r.t. the mixture weights w (C, K), fits held fixed."""
    mix_w = np.asarray(mix_w, dtype=np.float64)
    gw = np.zeros_like(mix_w)
    if v == 0 and combine == "algebra":
        return gw
    for c in range(state.n_classes):
        mu_u, mu_t, lam = _fit_arrays(state.fits[c])
        coef = v / (lam + v)
        du = mu_u[:, None] - state.snap_u[c][None, :]
        dt = wrapdiff(mu_t[:, None] - state.snap_t[c][None, :])
        gw[c] = (coef[:, None] * dt * g_mt[c][None, :]).sum(axis=1)
        if combine == "algebra":
            gw[c] += (coef[:, None] * du * g_mu[c][None, :]).sum(axis=1)
        else:
            xi = state.snap_u[c][None, :] + coef[:, None] * du
            e = np.exp(mix_w[c][:, None] * xi)
            gw[c] += (xi * e / e.sum(axis=0, keepdims=True) * g_mu[c][None, :]).sum(axis=1)
    return gw


def prototype_layer_forward(feat_u, feat_t, mean_u, mean_t):
    """Minimum distance over positions to every class mean, per channel.

    Returns features (n, C*J), ordered class-major, and a cache.
    """
    dmin, arg = kernels.min_distance(feat_u, feat_t, mean_u, mean_t)
    n, C, J = dmin.shape
    return dmin.reshape(n, C * J), (feat_u, feat_t, mean_u, mean_t, dmin, arg)


def prototype_layer_backward(g_feat, cache):
    """Returns (g_feat_u, g_feat_t, g_mean_u, g_mean_t)."""
    feat_u, feat_t, mean_u, mean_t, dmin, arg = cache
    n, T, J = feat_u.shape
    C = mean_u.shape[0]
    g = g_feat.reshape(n, C, J)
    ii = np.arange(n)[:, None, None]
    jj = np.arange(J)[None, None, :]
    fu = feat_u[ii, arg, jj]
    ft = feat_t[ii, arg, jj]
    du = fu - mean_u[None]
    dt = wrapdiff(ft - mean_t[None])
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(dmin > 0, 1.0 / dmin, 0.0)
    gu = g * du * inv
    gt = g * 2.0 * dt * inv
    g_fu = np.zeros_like(feat_u)
    g_ft = np.zeros_like(feat_t)
    np.add.at(g_fu, (np.broadcast_to(ii, arg.shape), arg, np.broadcast_to(jj, arg.shape)), gu)
    np.add.at(g_ft, (np.broadcast_to(ii, arg.shape), arg, np.broadcast_to(jj, arg.shape)), gt)
    return g_fu, g_ft, -gu.sum(axis=0), -gt.sum(axis=0)


# --------------------------------------------------------------------------
# Real-valued head: Conv1d(1 -> F, width 3) -> act -> FC -> act -> FC
# --------------------------------------------------------------------------

# Leaky slope of the activations; a plain ReLU head can die under Adam at
# lr 0.03 on low-SNR data, after which no gradient reaches it again.
LEAK = 0.01


def _act(x):
    return np.where(x > 0, x, LEAK * x)


def _act_grad(x):
    return np.where(x > 0, 1.0, LEAK)


HEAD_KEYS = ("conv_w", "conv_b", "fc1_w", "fc1_b", "fc2_w", "fc2_b")


def init_head(rng, n_features: int, n_classes: int, filters: int = 8, hidden: int = 16) -> dict:
    width = n_features - 2
    return {
        "conv_w": rng.standard_normal((filters, 3)) * np.sqrt(2.0 / 3.0),
        "conv_b": np.zeros(filters),
        "fc1_w": rng.standard_normal((hidden, filters * width)) * np.sqrt(2.0 / (filters * width)),
        "fc1_b": np.zeros(hidden),
        "fc2_w": rng.standard_normal((n_classes, hidden)) * np.sqrt(1.0 / hidden),
        "fc2_b": np.zeros(n_classes),
    }


def head_forward(x, hp: dict):
    x = np.asarray(x, dtype=np.float64)
    n, D = x.shape
    win = np.stack([x[:, 0:D - 2], x[:, 1:D - 1], x[:, 2:D]], axis=-1)  # (n, D-2, 3)
    conv = np.einsum("nwk,fk->nfw", win, hp["conv_w"]) + hp["conv_b"][None, :, None]
    a1 = _act(conv)
    flat = a1.reshape(n, -1)
    h_pre = flat @ hp["fc1_w"].T + hp["fc1_b"]
    h = _act(h_pre)
    logits = h @ hp["fc2_w"].T + hp["fc2_b"]
    return logits, (win, conv, flat, h_pre, h)


def head_backward(g_logits, cache, hp: dict):
    win, conv, flat, h_pre, h = cache
    n = g_logits.shape[0]
    grads = {
        "fc2_w": g_logits.T @ h,
        "fc2_b": g_logits.sum(axis=0),
    }
    g_h = (g_logits @ hp["fc2_w"]) * _act_grad(h_pre)
    grads["fc1_w"] = g_h.T @ flat
    grads["fc1_b"] = g_h.sum(axis=0)
    g_conv = (g_h @ hp["fc1_w"]).reshape(conv.shape) * _act_grad(conv)
    grads["conv_w"] = np.einsum("nfw,nwk->fk", g_conv, win)
    grads["conv_b"] = g_conv.sum(axis=(0, 2))
    g_win = np.einsum("nfw,fk->nwk", g_conv, hp["conv_w"])
    D = win.shape[1] + 2
    g_x = np.zeros((n, D))
    for k in range(3):
        g_x[:, k:k + D - 2] += g_win[:, :, k]
    return grads, g_x


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. the logits."""
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), labels].mean()
    g = np.exp(logp)
    g[np.arange(n), labels] -= 1.0
    return float(loss), g / n


def softmax_jvp_back(w, g_w):
    """Pull a gradient on softmax outputs back to the free logits (last axis)."""
    return w * (g_w - (w * g_w).sum(axis=-1, keepdims=True))


class Adam:
    def __init__(self, lr=0.03, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = {}
        self.v = {}

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        for k, g in grads.items():
            m = self.m.get(k)
            if m is None:
                m = self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            v = self.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            mhat = m / (1 - b1**self.t)
            vhat = v / (1 - b2**self.t)
            params[k] -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
