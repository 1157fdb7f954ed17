"""The L^p-Legendre transform and the objects derived from it.

For ``p > 0`` and ``f`` with ``0 < V(f) < inf``,

    f^{*,p}(y) = (1/p) log( ∫ e^{p⟨x,y⟩ − (p+1) f(x)} dx / V(f) ).

A :class:`TransformHandle` is itself a :class:`~lpsantalo.functions.FunctionHandle`,
so it can be integrated, translated and fed back into every other routine.
It evaluates through a closed form when the base function has one and through
log-domain quadrature otherwise.  ``p = inf`` is the classical Legendre
transform, evaluated as a supremum over a search grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import integrate, specfun
from .errors import DimensionError, DivergenceError, DomainError, UnsupportedError
from .functions import FunctionHandle, GridSampled, GridSpec, _as_points, _restore, affine_lower_bound
from .integrate import MomentSummary, QuadratureSpec

__all__ = [
    "TiltedMeasure",
    "TransformHandle",
    "discover_domain_1d",
    "fischer_info",
    "finite_domain_radius",
    "legendre",
    "lp_support",
    "lp_transform",
    "simplex_aux_sum",
    "simplex_support",
    "tilted_measure",
    "tilted_moments",
    "transform_gradient",
    "transform_hessian",
]

PATHS = ("auto", "closed", "quadrature")


def _check_p(p):
    if not (p > 0):
        raise DomainError("p must be positive")


def _points(f: FunctionHandle, y) -> tuple[np.ndarray, tuple[int, ...]]:
    return _as_points(y, f.dim)


def default_search_grid(f: FunctionHandle, count: int | None = None) -> GridSpec:
    """A cube grid covering the region where ``f`` is within reach of its minimum."""
    n = f.dim
    lo, hi = f.support_box()
    if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
        a, b = lo, hi
    else:
        try:
            lb = affine_lower_bound(f)
            L = 4.0 * (abs(lb.b) + 10.0) / lb.a
        except DomainError:
            L = 50.0 * float(f.scale_hint())
        a = np.where(np.isfinite(lo), lo, -L)
        b = np.where(np.isfinite(hi), hi, L)
    count = count or {1: 20001, 2: 801}.get(n, 61)
    return GridSpec(tuple(a), tuple(b), (count,) * n, budget=10**7)


def legendre(f: FunctionHandle, y, search_grid: GridSpec | None = None):
    """Classical Legendre transform ``f^*(y) = sup_x ⟨x, y⟩ − f(x)`` over a grid.

    The result approximates ``f^*`` from below.  ``y`` may be a single point
    or an array of points.
    """
    grid = search_grid or default_search_grid(f)
    pts = grid.points()
    if pts.shape[0] == 0:
        raise DomainError("empty search grid")
    fx = f.batch(pts)
    keep = np.isfinite(fx)
    if not keep.any():
        raise DomainError("f is +inf on the whole search grid")
    pts, fx = pts[keep], fx[keep]
    Y, batch = _points(f, y)
    out = np.empty(Y.shape[0])
    step = max(1, 4_000_000 // pts.shape[0])
    for s in range(0, Y.shape[0], step):
        out[s:s + step] = np.max(Y[s:s + step] @ pts.T - fx[None, :], axis=1)
    return _restore(out, batch)


def discover_domain_1d(f: FunctionHandle, p: float, spec: QuadratureSpec | None = None,
                       bits: int = 45) -> tuple[np.ndarray, np.ndarray]:
    """Endpoints of ``{f^{*,p} < inf}`` for a one-dimensional ``f`` by bisection on the divergence signal."""
    if f.dim != 1:
        raise DimensionError("domain discovery is one-dimensional")

    def finite(v):
        r = integrate.log_tilted(f, np.array([[v]]), p, p + 1.0, spec)
        return bool(np.isfinite(r.logz[0]) and not r.diverged[0])

    ends = []
    for sign in (-1.0, 1.0):
        lo, hi = 0.0, None
        step = 0.125
        while step < 1e9:
            if finite(sign * step):
                lo = step
                step *= 2.0
            else:
                hi = step
                break
        if hi is None:
            ends.append(sign * np.inf)
            continue
        for _ in range(bits):
            mid = 0.5 * (lo + hi)
            if finite(sign * mid):
                lo = mid
            else:
                hi = mid
        ends.append(sign * hi)
    return np.array([ends[0]]), np.array([ends[1]])


@dataclass(frozen=True, eq=False, repr=False)
class TransformHandle(FunctionHandle):
    """Lazily evaluated ``f^{*,p}`` with cached ``V(f)``.

    Attributes
    ----------
    base : FunctionHandle
    p : float
        A positive real or ``math.inf``.
    log_v_base : float
        ``log V(base)``.
    path : str
        ``"closed"``, ``"quadrature"`` or ``"legendre"`` (``p = inf``).
    spec : QuadratureSpec
    domain : tuple of arrays or None
        Coordinate box equal to the interior of the domain when known.
    finite_radius_hint : float or None
        Radius of a ball inside the domain.
    search_grid : GridSpec or None
        Grid used by the ``legendre`` path.
    """

    base: FunctionHandle = None
    p: float = 1.0
    log_v_base: float = 0.0
    path: str = "quadrature"
    spec: QuadratureSpec = None
    domain: tuple | None = None
    finite_radius_hint: float | None = None
    search_grid: GridSpec | None = None
    kind: str = field(default="transform", init=False)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def v_base(self) -> float:
        return math.exp(self.log_v_base)

    def _eval(self, Y):
        Y = np.asarray(Y, dtype=float)
        if self.path == "legendre":
            vals = np.atleast_1d(legendre(self.base, Y, self.search_grid)).astype(float)
            if self.domain is not None:
                lo, hi = self.domain
                vals = np.where(np.any((Y < lo) | (Y > hi), axis=1), np.inf, vals)
            return vals
        out = np.full(Y.shape[0], np.inf)
        inside = np.ones(Y.shape[0], dtype=bool)
        if self.domain is not None:
            lo, hi = self.domain
            inside = np.all((Y > lo) & (Y < hi), axis=1)
        if not inside.any():
            return out
        Yi = Y[inside]
        if self.path == "closed":
            out[inside] = self.base.transform_closed(Yi, self.p)
            return out
        res = integrate.log_tilted(self.base, Yi, self.p, self.p + 1.0, self.spec)
        vals = (res.logz - self.log_v_base) / self.p
        out[inside] = np.where(res.diverged | np.isnan(vals), np.inf, vals)
        return out

    def tilted(self, Y, moments=True) -> integrate.TiltedResult:
        """Tilted integrals ``∫ e^{p⟨x,y⟩-(p+1)f}`` with moments, one row per ``y``."""
        if self.path == "legendre":
            raise UnsupportedError("tilted measures need a finite p")
        return integrate.log_tilted(self.base, np.atleast_2d(Y), self.p, self.p + 1.0, self.spec, moments=moments)

    def _grad(self, Y):
        res = self.tilted(Y)
        if np.any(res.diverged):
            raise DivergenceError("gradient requested outside the transform domain")
        return res.mean

    @property
    def has_gradient(self):
        return self.path != "legendre"

    def support_box(self):
        if self.domain is None:
            return super().support_box()
        return self.domain[0].copy(), self.domain[1].copy()

    def dual_box(self, p):
        return None

    def mode_hint(self):
        if self.domain is None:
            return np.zeros(self.dim)
        lo, hi = self.domain
        with np.errstate(invalid="ignore"):
            fallback = np.where(np.isfinite(lo) & np.isfinite(hi), 0.5 * (lo + hi),
                                np.where(np.isfinite(lo), lo + 1.0, hi - 1.0))
        return np.where((lo < 0) & (hi > 0), 0.0, fallback)

    def scale_hint(self):
        return 1.0 / max(float(self.base.scale_hint()), 1e-12)

    def linear_structure(self):
        # (A^* f)^{*,p}(y) = f^{*,p}(A^{-T} y)
        lin = self.base.linear_structure()
        if lin is None or self.path == "legendre":
            return None
        g, A = lin
        return _inner_transform(g, self.p, self.spec, self.path), np.linalg.inv(A).T

    def __repr__(self):
        return f"TransformHandle({self.base!r}, p={self.p}, path={self.path!r})"


@lru_cache(maxsize=32)
def _inner_transform(g, p, spec, path):
    return lp_transform(g, p, spec, path=path)


def lp_transform(f: FunctionHandle, p: float, spec: QuadratureSpec | None = None, path: str = "auto",
                 search_grid: GridSpec | None = None, discover: bool = True) -> TransformHandle:
    """The L^p-Legendre transform ``f^{*,p}`` as an evaluable handle.

    Parameters
    ----------
    f : FunctionHandle
    p : float
        Positive, or ``math.inf`` for the classical transform.
    spec : QuadratureSpec, optional
    path : {"auto", "closed", "quadrature"}
        ``"auto"`` uses a closed form when ``f`` provides one.
    search_grid : GridSpec, optional
        Only for ``p = inf``.
    discover : bool
        For one-dimensional ``f`` without a known domain, locate the domain
        endpoints numerically so that later integrals see the walls.

    Raises
    ------
    DomainError
        If ``p <= 0`` or ``V(f)`` is not finite and positive.
    """
    _check_p(p)
    if path not in PATHS:
        raise DomainError(f"unknown transform path {path!r}")
    spec = spec or integrate.DEFAULT_SPEC
    logv = integrate.log_volume(f, spec)
    if not np.isfinite(logv):
        raise DomainError("V(f) must be finite and positive")
    if math.isinf(p):
        # closed limiting domain; a huge finite p stands in for the limit of the box formulas
        box = f.dual_box(1e300)
        dom = None if box is None else (np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float))
        return TransformHandle(base=f, p=p, log_v_base=logv, path="legendre", spec=spec, domain=dom,
                               search_grid=search_grid or default_search_grid(f))
    if path == "closed" and not f.has_closed_transform:
        raise UnsupportedError(f"{f.kind} has no closed-form transform")
    use = "closed" if (path == "closed" or (path == "auto" and f.has_closed_transform)) else "quadrature"
    box = f.dual_box(p)
    if box is None and f.dim == 1 and discover and use == "quadrature":
        box = discover_domain_1d(f, p, spec)
    domain = None if box is None else (np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float))
    return TransformHandle(base=f, p=float(p), log_v_base=logv, path=use, spec=spec, domain=domain)


def lp_support(K: FunctionHandle, p: float, y, spec: QuadratureSpec | None = None, path: str = "quadrature"):
    """L^p-support function ``h_{p,K}(y) = (1/p) log(∫_K e^{p⟨x,y⟩} dx / |K|)`` of an indicator handle."""
    if not K.is_indicator:
        raise DomainError("lp_support needs an indicator function of a body")
    return lp_transform(K, p, spec, path=path)(y)


def simplex_support(y, p: float) -> float:
    """L^p-support function of the standard simplex ``{x >= 0, Σ x <= 1}``.

    Stable for coincident and zero coordinates; see
    :func:`lpsantalo.specfun.log_simplex_average`.
    """
    _check_p(p)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return specfun.log_simplex_average(p * y) / p


def simplex_aux_sum(y) -> float:
    """``Σ_i 1 / ∏_{j≠i} (y_i − y_j)`` for distinct ``y``; zero whenever ``len(y) >= 2``."""
    y = np.asarray(y, dtype=float)
    total = 0.0
    for i in range(y.size):
        d = y[i] - np.delete(y, i)
        if np.any(d == 0):
            raise DomainError("coordinates must be distinct")
        total += 1.0 / float(np.prod(d))
    return total


# ---------------------------------------------------------------------------
# tilted measures


@dataclass(frozen=True)
class TiltedMeasure:
    """The probability measure ``∝ e^{p⟨x,y⟩ − (p+1) f(x)} dx``.

    ``log_normalization`` equals ``p f^{*,p}(y) + log V(f)``.
    """

    base: FunctionHandle
    p: float
    y: np.ndarray
    log_normalization: float
    mean: np.ndarray
    second_moments: np.ndarray

    @property
    def covariance(self) -> np.ndarray:
        return self.second_moments - np.outer(self.mean, self.mean)

    def summary(self) -> MomentSummary:
        return MomentSummary(math.exp(self.log_normalization), self.mean, self.second_moments, self.covariance)


def tilted_measure(f: FunctionHandle, p: float, y, spec: QuadratureSpec | None = None) -> TiltedMeasure:
    _check_p(p)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if y.shape != (f.dim,):
        raise DimensionError(f"y has shape {y.shape}, expected ({f.dim},)")
    res = integrate.log_tilted(f, y[None, :], p, p + 1.0, spec, moments=True)
    if res.diverged[0] or not np.isfinite(res.logz[0]):
        raise DivergenceError("y lies outside the domain of the transform")
    S = 0.5 * (res.second[0] + res.second[0].T)
    return TiltedMeasure(f, float(p), y, float(res.logz[0]), res.mean[0], S)


def tilted_moments(f: FunctionHandle, p: float, y, spec: QuadratureSpec | None = None) -> MomentSummary:
    """Moments of the tilted probability measure at ``y``; ``volume`` is its normalisation."""
    return tilted_measure(f, p, y, spec).summary()


def transform_gradient(f: FunctionHandle, p: float, y, spec: QuadratureSpec | None = None) -> np.ndarray:
    """``D f^{*,p}(y)``, the mean of the tilted measure."""
    return tilted_measure(f, p, y, spec).mean


def transform_hessian(f: FunctionHandle, p: float, y, spec: QuadratureSpec | None = None) -> np.ndarray:
    """``D² f^{*,p}(y) = p · Cov`` of the tilted measure."""
    return p * tilted_measure(f, p, y, spec).covariance


def fischer_info(f: FunctionHandle, p: float, y, spec: QuadratureSpec | None = None) -> float:
    """Fischer information of the tilted measure, ``E|p y − (p+1) D f|²``.

    Raises
    ------
    UnsupportedError
        For indicators, functions without an evaluable gradient, and functions
        with a finite support wall (the density jumps there, so the information
        is infinite).  Grid functions are accepted; their boundary is treated
        as negligible.
    """
    _check_p(p)
    if f.is_indicator or not f.has_gradient:
        raise UnsupportedError(f"Fischer information needs a gradient; {f.kind} has none")
    lo, hi = f.support_box()
    if not isinstance(f, GridSampled) and (np.any(np.isfinite(lo)) or np.any(np.isfinite(hi))):
        raise UnsupportedError("Fischer information is infinite for densities with a jump at a support wall")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n = f.dim

    def g(X, rows):
        G = f._grad(X.reshape(-1, n)).reshape(X.shape)
        score = p * y - (p + 1.0) * G
        return np.sum(score * score, axis=-1)[..., None]

    res = integrate.log_tilted(f, y[None, :], p, p + 1.0, spec, gfun=g)
    if res.diverged[0]:
        raise DivergenceError("y lies outside the domain of the transform")
    return float(res.gmean[0, 0])


def finite_domain_radius(f: FunctionHandle, p: float) -> float:
    """Radius ``a (p+1)/p`` of a ball inside ``{f^{*,p} < inf}``, with ``a`` from an affine lower bound."""
    _check_p(p)
    return affine_lower_bound(f).a * (p + 1.0) / p
