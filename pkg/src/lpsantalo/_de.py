"""Double-exponential quadrature kernels in the log domain.

The integrators in this package reduce to one primitive: the logarithm of
``∫ exp(h(x)) dx`` over a coordinate box, evaluated for many independent
rows (one integrand per row) at once.  Each axis is split at the support
walls, at declared breakpoints and at the row's mode, so that every piece
carries at most one endpoint where the integrand is not smooth.  Finite
pieces use the tanh-sinh rule, half-infinite pieces the exp-sinh rule.  Both
rules cluster nodes double-exponentially at the endpoints, which absorbs
algebraic endpoint behaviour and exponential tails of any scale.

Levels halve the step, so the previous level's estimate comes for free from
the even-indexed nodes and serves as the error indicator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

T_MAX = 4.0
DIVERGENCE_NATS = 25.0
LOG_PI = math.log(math.pi)
LOG_HALF_PI = math.log(math.pi / 2.0)

FINITE, RIGHT_INF, LEFT_INF, EMPTY = 0, 1, 2, 3


def lse(a: np.ndarray, axis=None) -> np.ndarray:
    """``logsumexp`` that returns ``-inf`` quietly for empty mass."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return logsumexp(a, axis=axis)


def _log_expit(z):
    return -np.logaddexp(0.0, -z)


def t_grid(level: int) -> tuple[np.ndarray, float, np.ndarray]:
    """Symmetric step grid ``k h`` on ``[-T, T]`` with ``h = 2^-level``."""
    h = 2.0 ** (-level)
    N = int(math.ceil(T_MAX / h))
    k = np.arange(-N, N + 1)
    return k * h, h, (k % 2 == 0)


def piece_nodes(a, b, kind, sc, level):
    """Nodes and log weights of one piece per row.

    Parameters
    ----------
    a, b : ndarray, shape (R,)
        Piece endpoints (``a`` finite for ``RIGHT_INF``, ``b`` finite for ``LEFT_INF``).
    kind : ndarray of int, shape (R,)
    sc : ndarray, shape (R,)
        Length scale used by the half-infinite maps.
    level : int

    Returns
    -------
    x, logw : ndarray, shape (R, K)
    far : ndarray of bool, shape (R, K)
        Marks the outermost node of half-infinite pieces (divergence probe).
    """
    t, h, _ = t_grid(level)
    u = (math.pi / 2.0) * np.sinh(t)
    logcosh = np.logaddexp(t, -t) - math.log(2.0)
    a = a[:, None]
    b = b[:, None]
    sc = sc[:, None]
    kind = kind[:, None]

    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        length = b - a
        frac_lo = np.exp(_log_expit(2.0 * u))
        frac_hi = np.exp(_log_expit(-2.0 * u))
        x_fin = np.where(u <= 0, a + length * frac_lo, b - length * frac_hi)
        lw_fin = (math.log(h) + np.log(length) + LOG_PI + logcosh
                  + _log_expit(2.0 * u) + _log_expit(-2.0 * u))
        grow = sc * np.exp(u)
        lw_half = math.log(h) + np.log(sc) + u + LOG_HALF_PI + logcosh
        x_right = a + grow
        x_left = b - grow

    x = np.where(kind == FINITE, x_fin, np.where(kind == RIGHT_INF, x_right, x_left))
    logw = np.where(kind == FINITE, lw_fin, lw_half)
    empty = kind == EMPTY
    anchor = np.where(np.isfinite(a), a, b)
    x = np.where(empty, anchor, x)
    logw = np.where(empty, -np.inf, logw)
    far = np.zeros(x.shape, dtype=bool)
    far[:, -1] = True
    far &= (kind == RIGHT_INF) | (kind == LEFT_INF)
    return x, logw, far


def axis_rule(lo: float, hi: float, breaks: np.ndarray, mode: np.ndarray,
              sc_left: np.ndarray, sc_right: np.ndarray, level: int):
    """Per-row nodes for one axis, split at walls, breakpoints and the row's mode."""
    R = mode.shape[0]
    inner = np.unique(breaks[(breaks > lo) & (breaks < hi)]) if len(breaks) else np.empty(0)
    bounds = np.concatenate([[lo], inner, [hi]])
    xs, ws, fars, evens = [], [], [], []
    _, _, even = t_grid(level)
    for j in range(len(bounds) - 1):
        A, B = bounds[j], bounds[j + 1]
        m = np.clip(mode, A, B) if np.isfinite(A) or np.isfinite(B) else mode
        aA = np.full(R, A)
        bB = np.full(R, B)
        # left part [A, m]
        kind = np.where(np.isinf(A), LEFT_INF, np.where(m <= A, EMPTY, FINITE))
        x, w, f = piece_nodes(np.where(np.isinf(A), m, aA), m, kind, sc_left, level)
        xs.append(x), ws.append(w), fars.append(f), evens.append(even)
        # right part [m, B]
        kind = np.where(np.isinf(B), RIGHT_INF, np.where(m >= B, EMPTY, FINITE))
        x, w, f = piece_nodes(m, np.where(np.isinf(B), m, bB), kind, sc_right, level)
        xs.append(x), ws.append(w), fars.append(f), evens.append(even)
    X = np.concatenate(xs, axis=1)
    W = np.concatenate(ws, axis=1)
    F = np.concatenate(fars, axis=1)
    E = np.concatenate(evens)
    keep = np.any(np.isfinite(W), axis=0)
    return X[:, keep], W[:, keep], F[:, keep], E[keep]


# ---------------------------------------------------------------------------
# mode and scale search


HFun = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _safe(v):
    return np.where(np.isnan(v), -np.inf, v)


def _golden_max(hfun, X0, axis, a, b, rows, iters):
    """Vectorised golden-section maximisation of ``h`` along ``axis`` on ``[a, b]`` per row."""
    g = (math.sqrt(5.0) - 1.0) / 2.0

    def ev(t):
        X = X0.copy()
        X[:, axis] = t
        return _safe(hfun(X[:, None, :], rows)[:, 0])

    c = b - g * (b - a)
    d = a + g * (b - a)
    fc, fd = ev(c), ev(d)
    for _ in range(iters):
        left = fc >= fd
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - g * (b - a)
        new_d = a + g * (b - a)
        c_next = np.where(left, new_c, d)
        d_next = np.where(left, c, new_d)
        probe = np.where(left, c_next, d_next)
        fp = ev(probe)
        fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
        c, d = c_next, d_next
    return np.where(fc >= fd, c, d)


def find_mode(hfun: HFun, lo, hi, breaks, center, scale, rows, sweeps=None, iters=30):
    """Approximate maximiser of ``h`` per row by probing and coordinate golden search."""
    R, n = center.shape
    x = np.clip(center, lo, hi).astype(float)
    x = np.where(np.isfinite(x), x, 0.0)
    sweeps = sweeps if sweeps is not None else (1 if n == 1 else 3)
    offs = np.concatenate([[0.0], 2.0 ** np.arange(-12, 46)])
    offs = np.concatenate([-offs[:0:-1], offs])
    for _ in range(sweeps):
        for i in range(n):
            extra = [np.asarray(breaks[i], dtype=float)]
            extra += [np.array([v]) for v in (lo[i], hi[i]) if np.isfinite(v)]
            extra = np.concatenate(extra) if extra else np.empty(0)
            cand = x[:, i:i + 1] + scale[:, None] * offs[None, :]
            cand = np.concatenate([cand, np.broadcast_to(extra, (R, extra.size))], axis=1)
            cand = np.sort(np.clip(cand, lo[i], hi[i]), axis=1)
            X = np.repeat(x[:, None, :], cand.shape[1], axis=1)
            X[:, :, i] = cand
            v = _safe(hfun(X, rows))
            j = np.argmax(v, axis=1)
            if np.all(np.isneginf(v[np.arange(R), j])):
                continue
            jl = np.maximum(j - 1, 0)
            jr = np.minimum(j + 1, cand.shape[1] - 1)
            a = cand[np.arange(R), jl]
            b = cand[np.arange(R), jr]
            best = cand[np.arange(R), j]
            x_new = _golden_max(hfun, x, i, a, b, rows, iters)
            X = x.copy()
            X[:, i] = x_new
            v_new = _safe(hfun(X[:, None, :], rows)[:, 0])
            X[:, i] = best
            v_best = _safe(hfun(X[:, None, :], rows)[:, 0])
            x[:, i] = np.where(v_new >= v_best, x_new, best)
    return x


def side_scales(hfun: HFun, mode, lo, hi, scale, rows, drop=1.0):
    """Distances from the mode, per axis and side, at which ``h`` has fallen by ``drop`` nats."""
    R, n = mode.shape
    h0 = _safe(hfun(mode[:, None, :], rows)[:, 0])
    ks = 2.0 ** np.arange(-30, 46)
    out = np.empty((R, n, 2))
    for i in range(n):
        for s, sign in enumerate((-1.0, 1.0)):
            d = scale[:, None] * ks[None, :]
            X = np.repeat(mode[:, None, :], ks.size, axis=1)
            X[:, :, i] = mode[:, i:i + 1] + sign * d
            v = _safe(hfun(X, rows))
            below = v < (h0[:, None] - drop)
            idx = np.where(below.any(axis=1), np.argmax(below, axis=1), ks.size - 1)
            out[:, i, s] = d[np.arange(R), idx]
    bad = ~np.isfinite(h0)
    out[bad] = scale[bad, None, None]
    return out


# ---------------------------------------------------------------------------
# driver


@dataclass
class LogIntegral:
    """Result of a batched log-domain integration."""

    logz: np.ndarray
    err: np.ndarray
    diverged: np.ndarray
    level: np.ndarray
    mean: np.ndarray | None = None
    second: np.ndarray | None = None
    gmean: np.ndarray | None = None
    nodes: int = 0
    rule: list | None = None


def _tensor(Xs, Ws, Fs, Es):
    """Row-wise tensor product of per-axis rules."""
    R = Xs[0].shape[0]
    n = len(Xs)
    sizes = [x.shape[1] for x in Xs]
    M = int(np.prod(sizes))
    X = np.empty((R, M, n))
    logw = np.zeros((R, M))
    far = np.zeros((R, M), dtype=bool)
    even = np.ones(M, dtype=bool)
    for i in range(n):
        shape = [1] * n
        shape[i] = sizes[i]
        bshape = (R,) + tuple(sizes)
        X[:, :, i] = np.broadcast_to(Xs[i].reshape((R,) + tuple(shape)), bshape).reshape(R, M)
        logw += np.broadcast_to(Ws[i].reshape((R,) + tuple(shape)), bshape).reshape(R, M)
        far |= np.broadcast_to(Fs[i].reshape((R,) + tuple(shape)), bshape).reshape(R, M)
        even &= np.broadcast_to(Es[i].reshape(shape), tuple(sizes)).reshape(M)
    return X, logw, far, even


def integrate_log(hfun: HFun, lo, hi, breaks, *, center=None, scale=None, mode=None, scales=None,
                  rows: int | None = None, rtol: float = 1e-11, level_min: int = 3, level_max: int = 7,
                  budget: int = 400_000, moments: bool = False, gfun=None, chunk_points: int = 1_500_000,
                  mode_iters: int = 30, sweeps=None, keep_rule: bool = False) -> LogIntegral:
    """Batched ``log ∫ exp(h_r(x)) dx`` over the box ``[lo, hi]``.

    Parameters
    ----------
    hfun : callable
        ``hfun(X, rows) -> H`` with ``X`` of shape ``(r, M, n)`` and ``rows`` the
        indices of the rows being evaluated; returns log-integrand values ``(r, M)``.
    lo, hi : array_like, shape (n,)
        Support box (entries may be infinite).
    breaks : sequence of arrays
        Per-axis breakpoints where the integrand is not smooth.
    center, scale : optional
        Hints for the mode search, shape ``(R, n)`` and ``(R,)``.
    mode, scales : optional
        Skip the search and use these, shapes ``(R, n)`` and ``(R, n, 2)``.
    rows : int
        Number of rows ``R`` (inferred from ``center`` or ``mode`` otherwise).
    rtol : float
        Target for ``|log Z_l - log Z_{l-1}|``.
    budget : int
        Maximum nodes per row; refinement stops when the next level exceeds it.
    moments : bool
        Also return the normalised first and second moments.
    gfun : callable, optional
        ``gfun(X, rows) -> G`` of shape ``(r, M, k)``; its normalised mean is returned.
    keep_rule : bool
        Store, per row, the final nodes, log-integrand-plus-weight values and
        far-node flags as ``(X, C, far)`` in ``rule``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.size
    breaks = [np.asarray(b, dtype=float) for b in breaks]
    if rows is None:
        rows = (mode if mode is not None else center).shape[0]
    R = rows
    all_rows = np.arange(R)
    if mode is None:
        if center is None:
            center = np.zeros((R, n))
        if scale is None:
            scale = np.ones(R)
        center = np.broadcast_to(np.asarray(center, dtype=float), (R, n)).copy()
        scale = np.broadcast_to(np.asarray(scale, dtype=float), (R,)).copy()
        mode = find_mode(hfun, lo, hi, breaks, center, scale, all_rows, sweeps=sweeps, iters=mode_iters)
    else:
        mode = np.broadcast_to(np.asarray(mode, dtype=float), (R, n)).copy()
    if scales is None:
        if scale is None:
            scale = np.ones(R)
        scale = np.broadcast_to(np.asarray(scale, dtype=float), (R,)).copy()
        scales = side_scales(hfun, mode, lo, hi, scale, all_rows)
    else:
        scales = np.broadcast_to(np.asarray(scales, dtype=float), (R, n, 2)).copy()

    logz = np.full(R, -np.inf)
    err = np.full(R, np.inf)
    div = np.zeros(R, dtype=bool)
    lev = np.zeros(R, dtype=int)
    mean = np.zeros((R, n)) if moments else None
    second = np.zeros((R, n, n)) if moments else None
    gmean = None
    kept = [None] * R if keep_rule else None
    pending = all_rows
    level = level_min
    nodes_used = 0
    while pending.size:
        sizes = []
        parts = []
        for i in range(n):
            parts.append(axis_rule(lo[i], hi[i], breaks[i], mode[pending, i],
                                   scales[pending, i, 0], scales[pending, i, 1], level))
            sizes.append(parts[-1][0].shape[1])
        M = int(np.prod(sizes))
        nodes_used = max(nodes_used, M)
        last = level >= level_max or M * (2 ** n) > budget
        step = max(1, chunk_points // max(M, 1))
        done = np.zeros(pending.size, dtype=bool)
        for s in range(0, pending.size, step):
            sl = slice(s, s + step)
            rws = pending[sl]
            X, logw, far, even = _tensor([p[0][sl] for p in parts], [p[1][sl] for p in parts],
                                         [p[2][sl] for p in parts], [p[3] for p in parts])
            H = _safe(hfun(X, rws))
            with np.errstate(invalid="ignore"):
                C = np.where(np.isneginf(logw), -np.inf, logw + H)
            C = np.where(np.isnan(C), -np.inf, C)
            z = lse(C, axis=1)
            zprev = n * math.log(2.0) + lse(C[:, even], axis=1)
            with np.errstate(invalid="ignore"):
                e = np.abs(z - zprev)
            e = np.where(np.isfinite(e), e, np.where(np.isneginf(z) & np.isneginf(zprev), 0.0, np.inf))
            zfar = lse(np.where(far, C, -np.inf), axis=1)
            with np.errstate(invalid="ignore"):
                d = np.isposinf(z) | (np.isfinite(z) & (zfar - z > -DIVERGENCE_NATS))
            ok = (e <= rtol) | d | last
            idx = rws[ok]
            logz[idx] = np.where(d[ok], np.inf, z[ok])
            err[idx] = e[ok]
            div[idx] = d[ok]
            lev[idx] = level
            done[s:s + step] = ok
            if keep_rule:
                for j in np.nonzero(ok)[0]:
                    live = np.isfinite(C[j])
                    kept[rws[j]] = (X[j][live], C[j][live], far[j][live])
            if ok.any() and (moments or gfun is not None):
                Wn = np.exp(C[ok] - z[ok, None])
                Wn = np.where(np.isfinite(Wn), Wn, 0.0)
                Xo = X[ok]
                if moments:
                    mean[idx] = np.einsum("rm,rmi->ri", Wn, Xo)
                    second[idx] = np.einsum("rm,rmi,rmj->rij", Wn, Xo, Xo)
                if gfun is not None:
                    G = np.asarray(gfun(Xo, idx), dtype=float)
                    if gmean is None:
                        gmean = np.zeros((R,) + G.shape[2:])
                    G = np.where(Wn.reshape(Wn.shape + (1,) * (G.ndim - 2)) > 0, G, 0.0)
                    gmean[idx] = np.einsum("rm,rm...->r...", Wn, G)
        pending = pending[~done]
        level += 1
    return LogIntegral(logz=logz, err=err, diverged=div, level=lev, mean=mean, second=second,
                       gmean=gmean, nodes=nodes_used, rule=kept)


def gauss_legendre(m: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(m)


def gauss_hermite_prob(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for expectations under the standard normal law."""
    x, w = np.polynomial.hermite_e.hermegauss(m)
    return x, w / math.sqrt(2.0 * math.pi)
