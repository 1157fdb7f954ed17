"""Integrals against ``e^{-f}``: volumes, moments and tilted integrals.

All integrals are computed as logarithms.  The central primitive is
:func:`log_tilted`, which returns, for a batch of tilt vectors ``y``,

    log ∫ exp(p⟨x, y⟩ − c f(x) + extra(x)) dx,

optionally together with the normalised first and second moments of the
corresponding probability measure.  Volumes, barycenters, transforms and the
flow all reduce to it.

Four schemes are available.  The default, :class:`Adaptive1D`, is a tensor
double-exponential rule split at walls, kinks and the integrand's mode, refined
until successive levels agree.  :class:`TensorGaussLegendre` integrates over a
truncated box, :class:`GaussHermite` uses a Gaussian reference measure, and
:class:`QuasiMonteCarlo` uses scrambled Sobol points with a Gaussian proposal.
Indicator functions of bodies are always integrated over their reference body
through an affine map, and grid functions use composite Gauss–Legendre rules
over their cells.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import special
from scipy.stats import qmc

from . import _de
from . import functions as F
from .errors import DegenerateError, DimensionError, DivergenceError, DomainError
from .functions import FunctionHandle, GridSampled, affine_lower_bound

__all__ = [
    "Adaptive1D",
    "GaussHermite",
    "MomentSummary",
    "QuadratureSpec",
    "QuasiMonteCarlo",
    "TensorGaussLegendre",
    "TiltedResult",
    "auto_radius",
    "barycenter",
    "covariance",
    "log_tilted",
    "log_volume",
    "moment",
    "volume",
    "weighted_integral",
]

LOG_TINY = math.log(1e-300)


# ---------------------------------------------------------------------------
# specification


@dataclass(frozen=True)
class TensorGaussLegendre:
    """Composite Gauss–Legendre rule on a truncated box, split at kinks and walls."""

    nodes_per_axis: int = 128

    def __post_init__(self):
        if self.nodes_per_axis < 4:
            raise DomainError("nodes_per_axis must be at least 4")


@dataclass(frozen=True)
class GaussHermite:
    """Gauss–Hermite rule around the function's mode hint."""

    nodes_per_axis: int = 64

    def __post_init__(self):
        if self.nodes_per_axis < 4:
            raise DomainError("nodes_per_axis must be at least 4")


@dataclass(frozen=True)
class Adaptive1D:
    """Adaptive tensor double-exponential rule; ``max_subdivisions`` caps the refinement level."""

    max_subdivisions: int = 7

    def __post_init__(self):
        if self.max_subdivisions < 4:
            raise DomainError("max_subdivisions must be at least 4")


@dataclass(frozen=True)
class QuasiMonteCarlo:
    """Scrambled Sobol points pushed through a Gaussian proposal."""

    sample_count: int = 2**16
    proposal_scale: float = 1.0

    def __post_init__(self):
        if self.sample_count < 4:
            raise DomainError("sample_count must be at least 4")
        if not self.proposal_scale > 0:
            raise DomainError("proposal_scale must be positive")


SCHEMES = {
    "adaptive": Adaptive1D,
    "tensor-gauss-legendre": TensorGaussLegendre,
    "gauss-hermite": GaussHermite,
    "qmc": QuasiMonteCarlo,
}


@dataclass(frozen=True)
class QuadratureSpec:
    """How integrals against ``e^{-f}`` are computed.

    Parameters
    ----------
    scheme : scheme object or None
        ``None`` picks :class:`Adaptive1D` for ``n <= 3`` and
        :class:`QuasiMonteCarlo` beyond.
    truncation_radius : float or "auto"
        Box half-width for the truncated schemes; ``"auto"`` derives it from
        an affine lower bound of ``f``.  The adaptive scheme never truncates.
    target_rel_tol : float
        Relative tolerance, in ``(0, 1e-2]``.
    seed : int
        Scrambling seed of the quasi-Monte Carlo scheme.
    """

    scheme: object = None
    truncation_radius: float | str = "auto"
    target_rel_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.target_rel_tol <= 1e-2):
            raise DomainError("target_rel_tol must lie in (0, 1e-2]")
        r = self.truncation_radius
        if not (r == "auto" or (isinstance(r, (int, float)) and r > 0)):
            raise DomainError("truncation_radius must be positive or 'auto'")

    def scheme_for(self, dim: int):
        if self.scheme is not None:
            return self.scheme
        return Adaptive1D() if dim <= 3 else QuasiMonteCarlo()

    def with_tol(self, tol: float) -> "QuadratureSpec":
        return QuadratureSpec(self.scheme, self.truncation_radius, tol, self.seed)

    @classmethod
    def from_config(cls, cfg: Mapping[str, object]) -> "QuadratureSpec":
        """Build from the keys ``quad.scheme``, ``quad.nodes``, ``quad.radius``, ``quad.rtol``, ``quad.seed``."""
        name = str(cfg.get("quad.scheme", "auto")).strip().lower()
        nodes = cfg.get("quad.nodes")
        scheme = None
        if name != "auto":
            if name not in SCHEMES:
                raise DomainError(f"unknown quadrature scheme {name!r}; expected one of {sorted(SCHEMES)} or 'auto'")
            kls = SCHEMES[name]
            if nodes is None:
                scheme = kls()
            elif kls is Adaptive1D:
                scheme = kls(max_subdivisions=int(nodes))
            elif kls is QuasiMonteCarlo:
                scheme = kls(sample_count=int(nodes))
            else:
                scheme = kls(nodes_per_axis=int(nodes))
        radius = cfg.get("quad.radius", "auto")
        if radius != "auto":
            radius = float(radius)
        return cls(scheme=scheme, truncation_radius=radius,
                   target_rel_tol=float(cfg.get("quad.rtol", 1e-10)), seed=int(cfg.get("quad.seed", 0)))


DEFAULT_SPEC = QuadratureSpec()


def _spec(spec):
    return DEFAULT_SPEC if spec is None else spec


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class MomentSummary:
    """Volume and normalised moments of a measure ``e^{-f} dx``.

    ``second_moments`` holds ``E[x xᵀ]``, so ``covariance`` equals
    ``second_moments - barycenter barycenterᵀ``.
    """

    volume: float
    barycenter: np.ndarray
    second_moments: np.ndarray
    covariance: np.ndarray

    def to_dict(self) -> dict:
        return {
            "volume": self.volume,
            "barycenter": self.barycenter.tolist(),
            "second_moments": self.second_moments.tolist(),
            "covariance": self.covariance.tolist(),
        }


@dataclass
class TiltedResult:
    """Batched output of :func:`log_tilted` (one entry per tilt row)."""

    logz: np.ndarray
    err: np.ndarray
    diverged: np.ndarray
    mean: np.ndarray | None = None
    second: np.ndarray | None = None
    gmean: np.ndarray | None = None
    rule: list | None = None


ExtraFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# reference bodies


def _ref_box(ref: str, n: int):
    if ref == "simplex":
        return np.zeros(n), np.ones(n)
    return -np.ones(n), np.ones(n)


def _ref_map(ref: str, S: np.ndarray):
    """Map reference-box coordinates ``S`` onto the reference body; returns ``(U, log Jacobian)``."""
    if ref == "cube":
        return S, np.zeros(S.shape[:-1])
    U = np.empty_like(S)
    logj = np.zeros(S.shape[:-1])
    rem = np.ones(S.shape[:-1])
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(S.shape[-1]):
            if ref == "ball":
                r = np.sqrt(np.maximum(rem, 0.0))
                U[..., k] = r * S[..., k]
                logj = logj + np.log(r)
                rem = rem - U[..., k] ** 2
            else:
                r = np.maximum(rem, 0.0)
                U[..., k] = r * S[..., k]
                logj = logj + np.log(r)
                rem = rem - U[..., k]
    return U, logj


# ---------------------------------------------------------------------------
# scheme kernels


def _tilt(X, Y, rows, p):
    if p == 0:
        return 0.0
    return p * np.einsum("rmi,ri->rm", X, Y[rows])


def _f_term(f, X, coef):
    n = X.shape[-1]
    fx = f.batch(X.reshape(-1, n)).reshape(X.shape[:-1])
    with np.errstate(invalid="ignore"):
        return np.where(np.isposinf(fx), -np.inf, -coef * fx)


def _moment_gfun(n, xmap=None):
    def g(X, rows):
        Z = X if xmap is None else xmap(X)
        outer = np.einsum("rmi,rmj->rmij", Z, Z).reshape(Z.shape[:2] + (n * n,))
        return np.concatenate([Z, outer], axis=-1)

    return g


def _split_gmean(gm, n):
    return gm[:, :n], gm[:, n:].reshape(-1, n, n)


def _de_generic(f, Y, p, coef, spec, extra, extra_breaks, moments, gfun, keep_rule, center, scale, mode=None):
    n = f.dim
    R = Y.shape[0]
    lo, hi = f.support_box()
    breaks = list(f.breakpoints())
    if extra_breaks is not None:
        breaks = [np.concatenate([b, np.asarray(e, dtype=float)]) for b, e in zip(breaks, extra_breaks)]

    def hfun(X, rows):
        h = _f_term(f, X, coef) + _tilt(X, Y, rows, p)
        if extra is not None:
            h = h + extra(X, rows)
        return h

    scheme = spec.scheme_for(n)
    level_max = scheme.max_subdivisions if isinstance(scheme, Adaptive1D) else 7
    if mode is None and extra is None and center is None and hasattr(f, "tilt_mode"):
        mode = f.tilt_mode(Y, p, coef)
    if center is None:
        center = np.broadcast_to(f.mode_hint(), (R, n))
    if scale is None:
        scale = np.full(R, float(f.scale_hint()))
    res = _de.integrate_log(hfun, lo, hi, breaks, center=center, scale=scale, mode=mode, rows=R,
                            rtol=spec.target_rel_tol, level_max=level_max, moments=moments,
                            gfun=gfun, keep_rule=keep_rule, budget=600_000 if n <= 2 else 2_000_000)
    return TiltedResult(res.logz, res.err, res.diverged, res.mean, res.second, res.gmean, res.rule)


def _de_body(f, Y, p, coef, spec, extra, moments, gfun, keep_rule):
    body = f.body()
    n = f.dim
    R = Y.shape[0]
    lo, hi = _ref_box(body.ref, n)
    A, c = body.A, body.c
    logdet = math.log(abs(float(np.linalg.det(A))))

    def to_x(S):
        U, logj = _ref_map(body.ref, S)
        return U @ A.T + c, logj

    def hfun(S, rows):
        X, logj = to_x(S)
        h = logj + _tilt(X, Y, rows, p)
        if extra is not None:
            h = h + extra(X, rows)
        return h

    g = None
    if moments or gfun is not None:
        def g(S, rows):
            X, _ = to_x(S)
            parts = []
            if moments:
                parts.append(_moment_gfun(n)(X, rows))
            if gfun is not None:
                parts.append(np.asarray(gfun(X, rows), dtype=float).reshape(X.shape[:2] + (-1,)))
            return np.concatenate(parts, axis=-1)

    scheme = spec.scheme_for(n)
    level_max = scheme.max_subdivisions if isinstance(scheme, Adaptive1D) else 7
    center = np.broadcast_to(0.5 * (lo + hi) if body.ref != "simplex" else np.full(n, 1.0 / (n + 1)), (R, n))
    res = _de.integrate_log(hfun, lo, hi, [np.empty(0)] * n, center=center, scale=np.full(R, 0.25), rows=R,
                            rtol=spec.target_rel_tol, level_max=level_max, gfun=g, keep_rule=keep_rule,
                            budget=600_000 if n <= 2 else 2_000_000)
    out = TiltedResult(res.logz + logdet, res.err, res.diverged, rule=res.rule)
    if g is not None:
        gm = res.gmean
        k = 0
        if moments:
            out.mean, out.second = _split_gmean(gm[:, : n + n * n], n)
            k = n + n * n
        if gfun is not None:
            out.gmean = gm[:, k:]
    if keep_rule and res.rule is not None:
        rule = []
        for S, C, far in res.rule:
            X, _ = to_x(S)
            rule.append((X, C + logdet, far))
        out.rule = rule
    return out


def _fixed_rule_eval(X, logw, f, Y, p, coef, extra, moments, gfun, chunk=2_000_000):
    """Apply a row-independent rule ``(X, logw)`` to every tilt row."""
    n = X.shape[1]
    R = Y.shape[0]
    fterm = _f_term(f, X[None], coef)[0] + logw
    keep = np.isfinite(fterm)
    X, fterm = X[keep], fterm[keep]
    M = X.shape[0]
    logz = np.full(R, -np.inf)
    mean = np.zeros((R, n)) if moments else None
    second = np.zeros((R, n, n)) if moments else None
    gmean = None
    step = max(1, chunk // max(M, 1))
    for s in range(0, R, step):
        rows = np.arange(s, min(R, s + step))
        Xb = np.broadcast_to(X, (rows.size, M, n))
        C = fterm[None, :] + (p * (Y[rows] @ X.T) if p else 0.0)
        if extra is not None:
            C = C + extra(Xb, rows)
        C = np.where(np.isnan(C), -np.inf, C)
        z = _de.lse(C, axis=1)
        logz[rows] = z
        if moments or gfun is not None:
            W = np.exp(C - z[:, None])
            W = np.where(np.isfinite(W), W, 0.0)
            if moments:
                mean[rows] = W @ X
                second[rows] = np.einsum("rm,mi,mj->rij", W, X, X)
            if gfun is not None:
                G = np.asarray(gfun(Xb, rows), dtype=float)
                if gmean is None:
                    gmean = np.zeros((R,) + G.shape[2:])
                gmean[rows] = np.einsum("rm,rm...->r...", W, G)
    return TiltedResult(logz, np.zeros(R), np.zeros(R, dtype=bool), mean, second, gmean)


def _grid_rule(f: GridSampled, k: int = 8):
    """Composite Gauss–Legendre nodes over the cells of a grid function."""
    t, w = np.polynomial.legendre.leggauss(k)
    xs, ws = [], []
    for ax in f.grid.axes():
        a, b = ax[:-1], ax[1:]
        half = 0.5 * (b - a)
        xs.append((0.5 * (a + b))[:, None] + half[:, None] * t[None, :])
        ws.append(half[:, None] * w[None, :])
    mesh = np.meshgrid(*[x.ravel() for x in xs], indexing="ij")
    wmesh = np.meshgrid(*[np.log(w.ravel()) for w in ws], indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=-1)
    logw = np.sum(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    return X, logw


def _gl_axis(lo, hi, breaks, m):
    inner = np.unique(breaks[(breaks > lo) & (breaks < hi)]) if len(breaks) else np.empty(0)
    bounds = np.concatenate([[lo], inner, [hi]])
    t, w = np.polynomial.legendre.leggauss(m)
    xs, ws = [], []
    for a, b in zip(bounds[:-1], bounds[1:]):
        xs.append(0.5 * (a + b) + 0.5 * (b - a) * t)
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(xs), np.concatenate(ws)


def _tensor_rule(axes):
    mesh = np.meshgrid(*[a[0] for a in axes], indexing="ij")
    wmesh = np.meshgrid(*[np.log(a[1]) for a in axes], indexing="ij")
    X = np.stack([m.ravel() for m in mesh], axis=-1)
    logw = np.sum(np.stack([m.ravel() for m in wmesh], axis=-1), axis=-1)
    return X, logw


def _tgl_rule(f, radius, m):
    lo, hi = f.support_box()
    axes = []
    for i, br in enumerate(f.breakpoints()):
        a = max(lo[i], -radius)
        b = min(hi[i], radius)
        if not a < b:
            raise DomainError("truncation box misses the support of f")
        axes.append(_gl_axis(a, b, np.asarray(br, dtype=float), m))
    return _tensor_rule(axes)


def _gh_rule(f, m):
    n = f.dim
    z, w = _de.gauss_hermite_prob(m)
    sig = float(f.scale_hint())
    mu = np.asarray(f.mode_hint(), dtype=float)
    Z, logw = _tensor_rule([(z, w)] * n)
    logw = logw + 0.5 * np.sum(Z * Z, axis=1) + 0.5 * n * math.log(2 * math.pi * sig * sig)
    return mu + sig * Z, logw


def _qmc_rule(f, count, scale, seed, mu=None, chol=None):
    n = f.dim
    k = max(2, int(round(math.log2(count))))
    S = qmc.Sobol(d=n, scramble=True, seed=seed).random_base2(k)
    Z = special.ndtri(np.clip(S, 1e-16, 1 - 1e-16))
    if mu is None:
        mu = np.asarray(f.mode_hint(), dtype=float)
    if chol is None:
        chol = float(f.scale_hint()) * np.eye(n)
    L = scale * chol
    logdet = float(np.sum(np.log(np.abs(np.diag(L)))))
    logw = 0.5 * np.sum(Z * Z, axis=1) + 0.5 * n * math.log(2 * math.pi) + logdet - k * math.log(2.0)
    return mu + Z @ L.T, logw


def _qmc_proposal(f, seed):
    """Mean and Cholesky factor of the Gaussian proposal, from a wide pilot run."""
    n = f.dim
    X, logw = _qmc_rule(f, 2**12, 3.0, seed + 7919)
    fx = f.batch(X)
    C = np.where(np.isfinite(fx), logw - fx, -np.inf)
    W = np.exp(C - _de.lse(C))
    mu = W @ X
    cov = (X - mu).T @ ((X - mu) * W[:, None])
    cov = 0.5 * (cov + cov.T) + 1e-12 * np.eye(n)
    return mu, 1.5 * np.linalg.cholesky(cov)


def _tail_radius(alpha, log_scale, n, target):
    """Smallest doubling ``R`` with ``e^{log_scale} |S^{n-1}| Γ(n, αR) / α^n`` below ``e^{target}``."""
    log_surface = math.log(2.0) + (n / 2.0) * math.log(math.pi) - math.lgamma(n / 2.0)

    def log_tail(R):
        return (log_scale + log_surface - n * math.log(alpha)
                + math.log(max(special.gammaincc(n, alpha * R), 1e-300)) + math.lgamma(n))

    R = 1.0
    while log_tail(R) > target and R < 1e8:
        R *= 2.0
    return R


def _sublevel_radius(f: FunctionHandle, p: float, ynorm: float, coef: float, target: float) -> float | None:
    """Radius from a high sublevel set ``{f <= β + L}`` around a minimiser ``c``.

    If that set lies in the ball of radius ``ρ`` about ``c``, convexity along
    rays gives ``f(x) >= β + L|x - c|/ρ`` outside it, a much steeper minorant
    than the global affine bound when ``L`` is large.
    """
    n = f.dim
    try:
        c, beta = F._minimizer(f)
        start = f.scale_hint()
        level = 30.0
        for _ in range(8):
            rho = 2.0 * max(F._radial_extent(f, c, u, beta + level, start) for u in F._directions(n))
            alpha = coef * level / rho - p * ynorm
            if alpha > 0:
                break
            level *= 4.0
        else:
            return None
    except DomainError:
        return None
    log_scale = p * ynorm * float(np.linalg.norm(c)) - coef * beta
    return max(rho, _tail_radius(alpha, log_scale, n, target)) + float(np.linalg.norm(c))


def auto_radius(f: FunctionHandle, p: float, ynorm: float, coef: float, rtol: float,
                log_estimate: float | None = None) -> float:
    """Box half-width ``R`` with analytic tail mass below ``rtol`` times the estimate.

    With ``f(x) >= a|x| + b`` the integrand ``exp(p⟨x,y⟩ - c f(x))`` is bounded
    by ``exp(-(c a - p|y|)|x| - c b)``, whose mass outside the ball of radius
    ``R`` is ``e^{-cb} |S^{n-1}| Γ(n, αR) / α^n`` with ``α = c a - p|y|``.  The
    minorant is taken from a high sublevel set when that set can be measured,
    and from :func:`~lpsantalo.functions.affine_lower_bound` otherwise; the
    smaller radius wins.
    """
    n = f.dim
    target = math.log(rtol) + (log_estimate if log_estimate is not None else 0.0)
    radii = []
    tight = _sublevel_radius(f, p, ynorm, coef, target)
    if tight is not None:
        radii.append(tight)
    lb = affine_lower_bound(f)
    alpha = coef * lb.a - p * ynorm
    if alpha > 0:
        radii.append(_tail_radius(alpha, -coef * lb.b, n, target))
    if not radii:
        raise DivergenceError("affine lower bound does not control the tilt")
    return min(radii)


def _truncated(f, Y, p, coef, spec, scheme, extra, moments, gfun):
    R = spec.truncation_radius
    ynorm = float(np.max(np.linalg.norm(Y, axis=1))) if p else 0.0
    if R == "auto":
        try:
            R = auto_radius(f, p, ynorm, coef, spec.target_rel_tol)
        except DivergenceError:
            R = 8.0 * float(f.scale_hint()) + float(np.linalg.norm(f.mode_hint()))

    def run(radius, m):
        X, logw = _tgl_rule(f, radius, m)
        return _fixed_rule_eval(X, logw, f, Y, p, coef, extra, moments, gfun)

    m = scheme.nodes_per_axis
    res = run(R, m)
    vals = [res.logz]
    growth = 0
    diverged = np.zeros(Y.shape[0], dtype=bool)
    for _ in range(3):
        lo, hi = f.support_box()
        if np.all(np.abs(lo) <= R) and np.all(np.abs(hi) <= R):
            break
        nxt = run(2.0 * R, m)
        with np.errstate(invalid="ignore"):
            inc = nxt.logz - vals[-1] > math.log(1.01)
        if not np.any(inc):
            break
        growth += 1
        diverged = inc if growth == 1 else diverged & inc
        R *= 2.0
        res = nxt
        vals.append(nxt.logz)
    if growth < 3:
        diverged[:] = False
    coarse = run(R, max(4, m // 2))
    with np.errstate(invalid="ignore"):
        res.err = np.abs(res.logz - coarse.logz)
    res.diverged = diverged
    res.logz = np.where(diverged, np.inf, res.logz)
    return res


def _fixed(f, Y, p, coef, spec, scheme, extra, moments, gfun):
    if isinstance(scheme, GaussHermite):
        fine = _gh_rule(f, scheme.nodes_per_axis)
        coarse = _gh_rule(f, max(4, scheme.nodes_per_axis // 2))
    else:
        mu, chol = _qmc_proposal(f, spec.seed)
        fine = _qmc_rule(f, scheme.sample_count, scheme.proposal_scale, spec.seed, mu, chol)
        coarse = _qmc_rule(f, max(4, scheme.sample_count // 2), scheme.proposal_scale, spec.seed + 1, mu, chol)
    res = _fixed_rule_eval(*fine, f, Y, p, coef, extra, moments, gfun)
    c = _fixed_rule_eval(*coarse, f, Y, p, coef, extra, False, None)
    with np.errstate(invalid="ignore"):
        res.err = np.abs(res.logz - c.logz)
    return res


def log_tilted(f: FunctionHandle, Y=None, p: float = 0.0, coef: float = 1.0, spec: QuadratureSpec | None = None, *,
               extra: ExtraFn | None = None, extra_breaks=None, moments: bool = False, gfun=None,
               keep_rule: bool = False, use_body: bool = True, center=None, scale=None) -> TiltedResult:
    """``log ∫ exp(p⟨x, y⟩ − coef·f(x) + extra(x)) dx`` for each row ``y`` of ``Y``.

    Parameters
    ----------
    f : FunctionHandle
    Y : array_like, shape (R, n), optional
        Tilt rows; a single zero row when omitted.
    p, coef : float
        Tilt multiplier and the multiplier of ``f``.
    spec : QuadratureSpec, optional
    extra : callable, optional
        Additional log-weight ``extra(X, rows)`` with ``X`` of shape ``(r, M, n)``.
    extra_breaks : sequence of arrays, optional
        Per-axis breakpoints of ``extra``.
    moments : bool
        Also return the normalised mean and second moment per row.
    gfun : callable, optional
        ``gfun(X, rows) -> (r, M, k)``; its normalised mean is returned as ``gmean``.
    keep_rule : bool
        Keep the final adaptive nodes (adaptive and body paths only).
    use_body : bool
        Integrate indicator functions over their reference body (default).
        ``False`` forces the generic path on the bounding box.
    center, scale : optional
        Mode-search hints for the adaptive scheme.

    Returns
    -------
    TiltedResult
        ``logz`` is ``+inf`` where divergence was detected.
    """
    spec = _spec(spec)
    n = f.dim
    Y = np.zeros((1, n)) if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    if Y.shape[1] != n:
        raise DimensionError(f"tilt rows have dimension {Y.shape[1]}, expected {n}")
    scheme = spec.scheme_for(n)
    if use_body and f.body() is not None:
        return _de_body(f, Y, p, coef, spec, extra, moments, gfun, keep_rule)
    lin = f.linear_structure()
    if lin is not None:
        return _linear_change(lin, Y, p, coef, spec, extra, moments, gfun, keep_rule, use_body, center, scale)
    if isinstance(f, GridSampled) and extra_breaks is None:
        X, logw = _grid_rule(f)
        return _fixed_rule_eval(X, logw, f, Y, p, coef, extra, moments, gfun)
    if isinstance(scheme, Adaptive1D):
        return _de_generic(f, Y, p, coef, spec, extra, extra_breaks, moments, gfun, keep_rule, center, scale)
    if isinstance(scheme, TensorGaussLegendre):
        return _truncated(f, Y, p, coef, spec, scheme, extra, moments, gfun)
    return _fixed(f, Y, p, coef, spec, scheme, extra, moments, gfun)


def _linear_change(lin, Y, p, coef, spec, extra, moments, gfun, keep_rule, use_body, center, scale):
    """Integrate ``f(x) = g(M x)`` in ``u = M x``, where ``⟨x, y⟩ = ⟨u, M^{-T} y⟩`` and ``dx = du/|det M|``."""
    g, M = lin
    Minv = np.linalg.inv(M)
    logdet = math.log(abs(float(np.linalg.det(M))))

    def to_x(U):
        return U @ Minv.T

    ex = None if extra is None else (lambda U, rows: extra(to_x(U), rows))
    gf = None if gfun is None else (lambda U, rows: gfun(to_x(U), rows))
    res = log_tilted(g, Y @ Minv, p, coef, spec, extra=ex, moments=moments, gfun=gf, keep_rule=keep_rule,
                     use_body=use_body, center=None if center is None else np.asarray(center) @ M.T, scale=scale)
    res.logz = res.logz - logdet
    if moments:
        res.mean = res.mean @ Minv.T
        res.second = np.einsum("ij,rjk,lk->ril", Minv, res.second, Minv)
    if keep_rule and res.rule is not None:
        res.rule = [None if r is None else (to_x(r[0]), r[1] - logdet, r[2]) for r in res.rule]
    return res


# ---------------------------------------------------------------------------
# public operations


def log_volume(f: FunctionHandle, spec: QuadratureSpec | None = None, method: str = "auto") -> float:
    """``log V(f)``; ``inf`` on divergence and ``-inf`` when the integral vanishes.

    ``method`` is ``"auto"`` (exact body volume for indicators, quadrature
    otherwise), ``"body"`` (quadrature over the reference body) or
    ``"generic"`` (quadrature over the bounding box, ignoring body structure).
    """
    if method not in ("auto", "body", "generic"):
        raise DomainError(f"unknown volume method {method!r}")
    if method == "auto" and f.is_indicator:
        return math.log(f.body().volume())
    res = log_tilted(f, None, 0.0, 1.0, spec, use_body=method != "generic")
    if res.diverged[0]:
        return math.inf
    z = float(res.logz[0])
    return -math.inf if z < LOG_TINY else z


def volume(f: FunctionHandle, spec: QuadratureSpec | None = None, method: str = "auto") -> float:
    """``V(f) = ∫ e^{-f}``.

    Indicator functions use the exact body volume under ``method="auto"``;
    see :func:`log_volume` for the alternatives.  Returns ``inf`` when the
    integral is detected to diverge and ``0.0`` when it falls below ``1e-300``.
    """
    lv = log_volume(f, spec, method)
    return math.exp(lv) if np.isfinite(lv) else (math.inf if lv > 0 else 0.0)


def _checked_moments(f, spec) -> TiltedResult:
    res = log_tilted(f, None, 0.0, 1.0, spec, moments=True)
    if res.diverged[0] or not np.isfinite(res.logz[0]):
        raise DivergenceError("V(f) is infinite")
    if res.logz[0] < LOG_TINY:
        raise DegenerateError("V(f) vanishes")
    return res


def covariance(f: FunctionHandle, spec: QuadratureSpec | None = None) -> MomentSummary:
    """Volume, barycenter, second moments and covariance of ``e^{-f}``."""
    res = _checked_moments(f, spec)
    b = res.mean[0]
    S = 0.5 * (res.second[0] + res.second[0].T)
    return MomentSummary(math.exp(float(res.logz[0])), b, S, S - np.outer(b, b))


def barycenter(f: FunctionHandle, spec: QuadratureSpec | None = None) -> np.ndarray:
    """Barycenter ``b(f) = ∫ x e^{-f} / V(f)``."""
    return _checked_moments(f, spec).mean[0]


def moment(f: FunctionHandle, t: float, spec: QuadratureSpec | None = None) -> float:
    """``∫ |x|^t e^{-f(x)} dx`` for ``t > 0``.

    Raises
    ------
    DivergenceError
        If the integral is detected to be infinite.
    """
    if not t > 0:
        raise DomainError("moment order must be positive")
    n = f.dim

    def extra(X, rows):
        with np.errstate(divide="ignore"):
            return t * np.log(np.linalg.norm(X, axis=-1))

    res = log_tilted(f, None, 0.0, 1.0, spec, extra=extra, extra_breaks=[np.zeros(1)] * n)
    if res.diverged[0]:
        raise DivergenceError("moment integral diverges")
    return math.exp(float(res.logz[0]))


def _call_g(g, X):
    """Evaluate a user integrand on ``(r, M, n)`` nodes; falls back to pointwise calls."""
    n = X.shape[-1]
    flat = X.reshape(-1, n)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out = np.asarray(g(flat), dtype=float)
        if out.shape == (flat.shape[0],):
            return out.reshape(X.shape[:-1])
    except Exception:
        pass
    arg = flat[:, 0] if n == 1 else flat
    out = np.array([float(g(v)) for v in arg])
    return out.reshape(X.shape[:-1])


def weighted_integral(g: Callable, f: FunctionHandle, spec: QuadratureSpec | None = None) -> float:
    """``∫ g(x) e^{-f(x)} dx``.

    ``g`` should accept an ``(m, n)`` array and return ``m`` values; scalar
    callables are applied pointwise.  A one-signed ``g`` is integrated in the
    log domain with its own adaptive rule.  When ``g`` changes sign the log of
    each part is singular at the zeros of ``g``, so the integral is instead
    ``V(f)`` times the mean of ``g`` under the adaptive rule of ``e^{-f}``.
    Values of ``g`` that overflow to ``±inf`` are clipped at the largest
    float, which only matters where the weight ``e^{-f}`` is already negligible.
    """
    big = np.finfo(float).max

    def values(X):
        with np.errstate(over="ignore", invalid="ignore"):
            return np.clip(_call_g(g, X), -big, big)

    parts = []
    for sign in (1.0, -1.0):
        def extra(X, rows, sign=sign):
            v = sign * values(X)
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(v > 0, np.log(np.where(v > 0, v, 1.0)), -np.inf)

        res = log_tilted(f, None, 0.0, 1.0, spec, extra=extra)
        if res.diverged[0]:
            raise DivergenceError("weighted integral diverges")
        parts.append(float(res.logz[0]))
    pos = math.exp(parts[0]) if np.isfinite(parts[0]) else 0.0
    neg = math.exp(parts[1]) if np.isfinite(parts[1]) else 0.0
    if pos == 0.0 or neg == 0.0:
        return pos - neg
    res = log_tilted(f, None, 0.0, 1.0, spec, gfun=lambda X, rows: values(X)[..., None])
    if res.diverged[0]:
        raise DivergenceError("V(f) is infinite")
    return math.exp(float(res.logz[0])) * float(res.gmean[0, 0])
