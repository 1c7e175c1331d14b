"""Hot numeric kernels, each in a numba and a pure-numpy flavour.

The public names (``circular_mean``, ``wfm_windows``, ``sure_loss_grid``,
``min_distance``) point at the numba versions unless numba is missing or
``CSURE_DISABLE_NUMBA`` is set.  Both flavours are always importable as
``np_<name>`` / ``nb_<name>`` so they can be benchmarked and cross-checked.

Angles are in radians on (-pi, pi]; distances use the scaled angle
coordinate sqrt(2) * theta, so a squared distance is du**2 + 2 * dtheta**2.
"""
import math

import numpy as np

from ._backend import BACKEND, USE_NUMBA, njit

PI = math.pi
TWO_PI = 2.0 * math.pi

# Relative tolerance on the Frechet objective below which two candidate means
# count as a tie.
TIE_RTOL = 1e-10
# Two tied candidates closer than this (radians) are the same point.
SAME_ANGLE_ATOL = 1e-9


# --------------------------------------------------------------------------
# numpy flavour
# --------------------------------------------------------------------------

def canonical(x):
    """Map angles to (-pi, pi]; exact for inputs already inside the interval."""
    x = np.asarray(x, dtype=np.float64)
    r = x - TWO_PI * np.round(x / TWO_PI)
    r = np.where(r <= -PI, r + TWO_PI, r)
    r = np.where(r > PI, r - TWO_PI, r)
    return r


def wrapdiff(d):
    """Shorter-arc representative of an angle difference."""
    return canonical(d)


def np_circular_mean(theta, alpha):
    """Weighted Frechet mean on the circle, row-wise.

    ``theta`` and ``alpha`` have shape (B, n); weights are nonnegative with a
    positive row sum (they need not sum to one).  Returns the canonical mean
    angle per row and a boolean flag marking rows whose global minimiser is
    not unique (the smallest tied angle is returned there).
    """
    theta = np.asarray(theta, dtype=np.float64)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=np.float64), theta.shape)
    B, n = theta.shape
    order = np.argsort(theta, axis=1, kind="stable")
    ts = np.take_along_axis(theta, order, axis=1)
    a = np.take_along_axis(alpha, order, axis=1)
    A = a.sum(axis=1)
    at = a * ts
    zeros = np.zeros((B, 1))
    pa = np.concatenate([zeros, np.cumsum(a, axis=1)[:, :-1]], axis=1)
    p1 = np.concatenate([zeros, np.cumsum(at, axis=1)[:, :-1]], axis=1)
    m1 = at.sum(axis=1)[:, None]
    m2 = (at * ts).sum(axis=1)[:, None]
    # cut c shifts the c smallest angles up by 2*pi
    s1 = m1 + TWO_PI * pa
    s2 = m2 + 2.0 * TWO_PI * p1 + TWO_PI * TWO_PI * pa
    f = s2 - s1 * s1 / A[:, None]
    cand = canonical(s1 / A[:, None])
    fmin = f.min(axis=1, keepdims=True)
    tied = f <= fmin + TIE_RTOL * np.maximum(1.0, np.abs(fmin))
    chosen = np.where(tied, cand, np.inf).min(axis=1)
    sep = np.abs(wrapdiff(cand - chosen[:, None]))
    degenerate = np.any(tied & (sep > SAME_ANGLE_ATOL), axis=1)

    # Recompute on the chosen branch relative to the heaviest point so that
    # one-hot and constant inputs come back bit-exact.
    anchor = np.argmax(alpha, axis=1)
    k = np.round((chosen[:, None] - theta) / TWO_PI)
    th_a = np.take_along_axis(theta, anchor[:, None], axis=1)
    k_a = np.take_along_axis(k, anchor[:, None], axis=1)
    rel = (theta - th_a) + TWO_PI * (k - k_a)
    mean = th_a[:, 0] + (alpha * rel).sum(axis=1) / A
    return canonical(mean), degenerate


def np_wfm_windows(u, theta, alpha, stride):
    """Weighted Frechet mean over strided windows for every output channel.

    ``u``/``theta`` are (n, L, C_in) log-scale and angle inputs; ``alpha`` is
    (J, k, C_in) convex weights per output channel.  Returns out_u, out_theta
    of shape (n, T, J) with T = (L - k) // stride + 1, plus the count of
    degenerate (tied) window means.
    """
    u = np.asarray(u, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    n, L, cin = u.shape
    J, k, _ = alpha.shape
    T = (L - k) // stride + 1
    idx = np.arange(T)[:, None] * stride + np.arange(k)[None, :]
    wu = u[:, idx, :].reshape(n, T, 1, k * cin)
    wt = theta[:, idx, :].reshape(n, T, 1, k * cin)
    al = alpha.reshape(1, 1, J, k * cin)
    out_u = (wu * al).sum(axis=-1) / al.sum(axis=-1)
    th = np.broadcast_to(wt, (n, T, J, k * cin)).reshape(-1, k * cin)
    aa = np.broadcast_to(al, (n, T, J, k * cin)).reshape(-1, k * cin)
    mean, degen = np_circular_mean(th, aa)
    return out_u, mean.reshape(n, T, J), int(degen.sum())


def np_sure_loss_grid(xbar_u, xbar_t, m_u, m_t, mu_u, mu_t, lam, v, n_obs, dim):
    """SURE and realised loss of the shrinkage estimate over a (mu, lambda) grid.

    Inputs: per-dimension sample means (xbar_u, xbar_t) and truth (m_u, m_t),
    each of length p; probe centres mu_u/mu_t (length M); variances lam
    (length G).  Returns two (M, G) arrays.
    """
    p = xbar_u.shape[0]
    du = mu_u[:, None] - xbar_u[None, :]
    dt = wrapdiff(mu_t[:, None] - xbar_t[None, :])
    disp = (du * du + 2.0 * dt * dt).sum(axis=1)
    denom = lam + v
    sure = (v / denom**2)[None, :] * (
        v * disp[:, None] + p * dim * (lam * lam - v * v)[None, :] / n_obs
    )
    c = (v / denom)[None, :, None]
    eu = xbar_u[None, None, :] + c * du[:, None, :] - m_u[None, None, :]
    et = wrapdiff(xbar_t[None, None, :] + c * dt[:, None, :] - m_t[None, None, :])
    loss = (eu * eu + 2.0 * et * et).sum(axis=2)
    return sure, loss


def np_min_distance(feat_u, feat_t, proto_u, proto_t):
    """Minimum over positions of the distance to every prototype.

    feat_*: (n, T, J); proto_*: (C, J).  Returns (dmin, argmin) with shape
    (n, C, J); argmin indexes the position axis.
    """
    du = feat_u[:, :, None, :] - proto_u[None, None, :, :]
    dt = wrapdiff(feat_t[:, :, None, :] - proto_t[None, None, :, :])
    d = np.sqrt(du * du + 2.0 * dt * dt)
    arg = np.argmin(d, axis=1)
    dmin = np.take_along_axis(d, arg[:, None], axis=1)[:, 0]
    return dmin, arg


# --------------------------------------------------------------------------
# numba flavour
# --------------------------------------------------------------------------

@njit
def _nb_canonical(x):
    r = x - TWO_PI * np.round(x / TWO_PI)
    if r <= -PI:
        r += TWO_PI
    elif r > PI:
        r -= TWO_PI
    return r


@njit
def _nb_circ_sorted(theta, alpha, order, f, cand):
    """Circular mean of one row given its ascending ``order``; f/cand are scratch."""
    n = theta.shape[0]
    A = 0.0
    m1 = 0.0
    m2 = 0.0
    for i in range(n):
        a = alpha[order[i]]
        t = theta[order[i]]
        A += a
        m1 += a * t
        m2 += a * t * t
    pa = 0.0
    p1 = 0.0
    fmin = np.inf
    for c in range(n):
        s1 = m1 + TWO_PI * pa
        s2 = m2 + 2.0 * TWO_PI * p1 + TWO_PI * TWO_PI * pa
        f[c] = s2 - s1 * s1 / A
        cand[c] = _nb_canonical(s1 / A)
        if f[c] < fmin:
            fmin = f[c]
        a = alpha[order[c]]
        pa += a
        p1 += a * theta[order[c]]
    tol = TIE_RTOL * max(1.0, abs(fmin))
    chosen = np.inf
    for c in range(n):
        if f[c] <= fmin + tol and cand[c] < chosen:
            chosen = cand[c]
    degenerate = False
    for c in range(n):
        if f[c] <= fmin + tol and abs(_nb_canonical(cand[c] - chosen)) > SAME_ANGLE_ATOL:
            degenerate = True
    anchor = 0
    for i in range(n):
        if alpha[i] > alpha[anchor]:
            anchor = i
    th_a = theta[anchor]
    k_a = np.round((chosen - th_a) / TWO_PI)
    acc = 0.0
    for i in range(n):
        k = np.round((chosen - theta[i]) / TWO_PI)
        acc += alpha[i] * ((theta[i] - th_a) + TWO_PI * (k - k_a))
    return _nb_canonical(th_a + acc / A), degenerate


@njit
def _nb_circ_row(theta, alpha):
    n = theta.shape[0]
    order = np.argsort(theta, kind="mergesort")
    return _nb_circ_sorted(theta, alpha, order, np.empty(n), np.empty(n))


@njit
def _nb_circular_mean_impl(theta, alpha):
    B = theta.shape[0]
    out = np.empty(B)
    degen = np.zeros(B, dtype=np.bool_)
    for b in range(B):
        out[b], degen[b] = _nb_circ_row(theta[b], alpha[b])
    return out, degen


@njit
def _nb_wfm_impl(u, theta, alpha, stride):
    n, L, cin = u.shape
    J, k, _ = alpha.shape
    T = (L - k) // stride + 1
    m = k * cin
    out_u = np.empty((n, T, J))
    out_t = np.empty((n, T, J))
    wt = np.empty(m)
    wa = np.empty(m)
    f = np.empty(m)
    cand = np.empty(m)
    ndeg = 0
    for i in range(n):
        for t in range(T):
            q = 0
            for r in range(k):
                for ch in range(cin):
                    wt[q] = theta[i, t * stride + r, ch]
                    q += 1
            # the window's angles are shared by every output channel
            order = np.argsort(wt, kind="mergesort")
            for j in range(J):
                su = 0.0
                A = 0.0
                q = 0
                for r in range(k):
                    for ch in range(cin):
                        a = alpha[j, r, ch]
                        su += a * u[i, t * stride + r, ch]
                        A += a
                        wa[q] = a
                        q += 1
                out_u[i, t, j] = su / A
                mean, deg = _nb_circ_sorted(wt, wa, order, f, cand)
                out_t[i, t, j] = mean
                if deg:
                    ndeg += 1
    return out_u, out_t, ndeg


@njit
def _nb_sure_loss_impl(xbar_u, xbar_t, m_u, m_t, mu_u, mu_t, lam, v, n_obs, dim):
    p = xbar_u.shape[0]
    M = mu_u.shape[0]
    G = lam.shape[0]
    sure = np.empty((M, G))
    loss = np.zeros((M, G))
    du = np.empty(p)
    dt = np.empty(p)
    for a in range(M):
        disp = 0.0
        for i in range(p):
            du[i] = mu_u[a] - xbar_u[i]
            dt[i] = _nb_canonical(mu_t[a] - xbar_t[i])
            disp += du[i] * du[i] + 2.0 * dt[i] * dt[i]
        for g in range(G):
            denom = lam[g] + v
            sure[a, g] = v / (denom * denom) * (v * disp + p * dim * (lam[g] * lam[g] - v * v) / n_obs)
            c = v / denom
            acc = 0.0
            for i in range(p):
                eu = xbar_u[i] + c * du[i] - m_u[i]
                et = _nb_canonical(xbar_t[i] + c * dt[i] - m_t[i])
                acc += eu * eu + 2.0 * et * et
            loss[a, g] = acc
    return sure, loss


@njit
def _nb_min_distance_impl(feat_u, feat_t, proto_u, proto_t):
    n, T, J = feat_u.shape
    C = proto_u.shape[0]
    dmin = np.empty((n, C, J))
    arg = np.empty((n, C, J), dtype=np.int64)
    for i in range(n):
        for c in range(C):
            for j in range(J):
                best = np.inf
                bi = 0
                for t in range(T):
                    du = feat_u[i, t, j] - proto_u[c, j]
                    dt = _nb_canonical(feat_t[i, t, j] - proto_t[c, j])
                    d = math.sqrt(du * du + 2.0 * dt * dt)
                    if d < best:
                        best = d
                        bi = t
                dmin[i, c, j] = best
                arg[i, c, j] = bi
    return dmin, arg


def _f64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def nb_circular_mean(theta, alpha):
    theta = _f64(theta)
    alpha = _f64(np.broadcast_to(alpha, theta.shape))
    return _nb_circular_mean_impl(theta, alpha)


def nb_wfm_windows(u, theta, alpha, stride):
    out_u, out_t, ndeg = _nb_wfm_impl(_f64(u), _f64(theta), _f64(alpha), int(stride))
    return out_u, out_t, int(ndeg)


def nb_sure_loss_grid(xbar_u, xbar_t, m_u, m_t, mu_u, mu_t, lam, v, n_obs, dim):
    return _nb_sure_loss_impl(
        _f64(xbar_u), _f64(xbar_t), _f64(m_u), _f64(m_t), _f64(mu_u), _f64(mu_t),
        _f64(lam), float(v), float(n_obs), float(dim),
    )


def nb_min_distance(feat_u, feat_t, proto_u, proto_t):
    return _nb_min_distance_impl(_f64(feat_u), _f64(feat_t), _f64(proto_u), _f64(proto_t))


if USE_NUMBA:
    circular_mean = nb_circular_mean
    wfm_windows = nb_wfm_windows
    sure_loss_grid = nb_sure_loss_grid
    min_distance = nb_min_distance
else:
    circular_mean = np_circular_mean
    wfm_windows = np_wfm_windows
    sure_loss_grid = np_sure_loss_grid
    min_distance = np_min_distance

__all__ = [
    "BACKEND",
    "canonical",
    "wrapdiff",
    "circular_mean",
    "wfm_windows",
    "sure_loss_grid",
    "min_distance",
]
