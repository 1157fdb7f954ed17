"""The Ornstein–Uhlenbeck flow on convex functions and its diagnostics.

The flow ``φ_t`` is never stepped in time.  Every state comes from the
exact solution

    φ_t(x) = −log ∫ e^{−|x − e^{−t} y|² / (2β)} e^{−φ_0(y)} dy / (2πβ)^{n/2},
    β = 1 − e^{−2t},

integrated in ``y`` with the Gaussian kernel kept as a single squared
difference, so no large terms cancel for large ``|x|``.  In one dimension
each state is tabulated once on sinh-spaced nodes (values and exact
derivatives) and read through a cubic Hermite interpolant, which keeps the
nested integrals of Mahler and Santaló computations affordable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from . import integrate, santalo, transform
from .errors import DivergenceError, DomainError
from .functions import FunctionHandle
from .integrate import QuadratureSpec

__all__ = [
    "FlowDiagnostics",
    "FlowFunction",
    "InequalityReport",
    "dual_integrals",
    "inequality_suite",
    "legendre_evolution_residual",
    "legendre_evolution_terms",
    "mahler_evolution",
    "monotonicity_experiment",
    "mpbound_slack",
    "ou_evolve",
]

T_IDENTITY = 1e-3
FD_STEP = 1e-3
TABLE_STEP = 0.01
TABLE_REACH = 1e6


def _direct(phi0: FunctionHandle, t: float, X: np.ndarray, spec: QuadratureSpec, grad: bool):
    """Values (and gradients) of ``φ_t`` at the rows of ``X`` by quadrature in ``y``."""
    n = phi0.dim
    a = math.exp(-t)
    beta = -math.expm1(-2.0 * t)

    def kernel(Yq, rows):
        d = X[rows][:, None, :] - a * Yq
        return -np.sum(d * d, axis=-1) / (2.0 * beta)

    gfun = None
    if grad:
        def gfun(Yq, rows):
            return X[rows][:, None, :] - a * Yq

    lo, hi = phi0.support_box()
    center = np.clip(X / a, lo, hi)
    center = np.where(np.isfinite(center), center, 0.0)
    scale = np.full(X.shape[0], min(float(phi0.scale_hint()), math.sqrt(beta) / a))
    res = integrate.log_tilted(phi0, X, 0.0, 1.0, spec, extra=kernel, gfun=gfun, center=center, scale=scale)
    vals = 0.5 * n * math.log(2.0 * math.pi * beta) - res.logz
    vals = np.where(res.diverged | np.isnan(vals), np.nan, vals)
    G = res.gmean / beta if grad else None
    return vals, G


class FlowFunction(FunctionHandle):
    """``φ_t`` for a fixed ``t ≥ T_IDENTITY``, evaluated from the exact solution.

    Attributes
    ----------
    base : FunctionHandle
        The initial datum ``φ_0``.
    t : float
    spec : QuadratureSpec
        Quadrature used for the convolution integral.
    tabulated : bool
        Whether evaluation goes through the one-dimensional table.
    """

    kind = "flow"

    def __init__(self, base: FunctionHandle, t: float, spec: QuadratureSpec | None = None, table: bool | None = None):
        if not t >= T_IDENTITY:
            raise DomainError(f"FlowFunction needs t >= {T_IDENTITY}")
        self.base = base
        self.t = float(t)
        self.spec = spec or integrate.DEFAULT_SPEC
        self.dim = base.dim
        a = math.exp(-self.t)
        beta = -math.expm1(-2.0 * self.t)
        mom = integrate.covariance(base, self.spec)
        self.center = a * mom.barycenter
        self.width = math.sqrt(a * a * float(np.trace(mom.covariance)) / self.dim + beta)
        self._spline = None
        self._monotone = None
        if table is None:
            table = self.dim == 1
        if table:
            if self.dim != 1:
                raise DomainError("tabulated flows are one-dimensional")
            self._build_table()

    @property
    def tabulated(self) -> bool:
        return self._spline is not None

    def _build_table(self):
        S = math.asinh(TABLE_REACH)
        s = np.linspace(-S, S, 2 * int(math.ceil(S / TABLE_STEP)) + 1)
        x = self.center[0] + self.width * np.sinh(s)
        v, g = _direct(self.base, self.t, x[:, None], self.spec, grad=True)
        g = g[:, 0]
        ok = np.isfinite(v) & np.isfinite(g)
        # keep the contiguous finite block around the center
        mid = len(x) // 2
        if not ok[mid]:
            raise DivergenceError("flow table failed at its center")
        lo_i = mid
        while lo_i > 0 and ok[lo_i - 1]:
            lo_i -= 1
        hi_i = mid
        while hi_i < len(x) - 1 and ok[hi_i + 1]:
            hi_i += 1
        x, v, g = x[lo_i:hi_i + 1], v[lo_i:hi_i + 1], g[lo_i:hi_i + 1]
        self._x, self._v, self._g = x, v, g
        self._spline = CubicHermiteSpline(x, v, g, extrapolate=False)

    def _table_eval(self, x, nu):
        lo, hi = self._x[0], self._x[-1]
        out = self._spline(np.clip(x, lo, hi), nu)
        left, right = x < lo, x > hi
        if nu == 0:
            out = np.where(left, self._v[0] + self._g[0] * (x - lo), out)
            out = np.where(right, self._v[-1] + self._g[-1] * (x - hi), out)
        else:
            out = np.where(left, self._g[0], np.where(right, self._g[-1], out))
        return out

    def _eval(self, X):
        if self._spline is not None:
            return self._table_eval(X[:, 0], 0)
        v, _ = _direct(self.base, self.t, X, self.spec, grad=False)
        return np.where(np.isnan(v), np.inf, v)

    def _grad(self, X):
        if self._spline is not None:
            return self._table_eval(X[:, 0], 1)[:, None]
        _, G = _direct(self.base, self.t, X, self.spec, grad=True)
        return G

    @property
    def has_gradient(self):
        return True

    def tilt_mode(self, Y, p, coef):
        """Maximisers of ``p⟨x, y⟩ − coef·φ_t(x)`` from the tabulated derivative, or ``None``."""
        if self._spline is None or coef <= 0 or self._monotone is False:
            return None
        if self._monotone is None:
            self._monotone = bool(np.all(np.diff(self._g) >= 0))
            if not self._monotone:
                return None
        target = p * np.asarray(Y, dtype=float)[:, 0] / coef
        return np.interp(target, self._g, self._x)[:, None]

    def dual_box(self, p):
        box = self.base.dual_box(p)
        if box is None:
            return None
        e = math.exp(self.t)
        return np.asarray(box[0], dtype=float) * e, np.asarray(box[1], dtype=float) * e

    def mode_hint(self):
        return self.center.copy()

    def scale_hint(self):
        return self.width

    def __repr__(self):
        return f"FlowFunction({self.base!r}, t={self.t})"


def ou_evolve(phi0: FunctionHandle, t: float, spec: QuadratureSpec | None = None,
              table: bool | None = None) -> FunctionHandle:
    """The state ``φ_t`` of the Ornstein–Uhlenbeck flow started at ``φ_0``.

    For ``t < 1e-3`` the initial datum itself is returned.  ``table`` forces
    or disables tabulation (default: tabulate in one dimension).

    Raises
    ------
    DomainError
        If ``t < 0`` or ``V(φ_0)`` is not finite and positive.
    """
    if not t >= 0:
        raise DomainError("flow time must be nonnegative")
    if t < T_IDENTITY:
        return phi0
    return _cached_state(phi0, float(t), spec or integrate.DEFAULT_SPEC, table)


@lru_cache(maxsize=64)
def _cached_state(phi0, t, spec, table):
    if not np.isfinite(integrate.log_volume(phi0, spec)):
        raise DomainError("V(φ_0) must be finite and positive")
    return FlowFunction(phi0, t, spec, table)


# ---------------------------------------------------------------------------
# evolution of the transform


def _time_derivative(fun, t, h):
    if t - 2.0 * h >= T_IDENTITY:
        # fourth-order central stencil
        return (8.0 * (fun(t + h) - fun(t - h)) - (fun(t + 2.0 * h) - fun(t - 2.0 * h))) / (12.0 * h)
    if t - h >= T_IDENTITY:
        return (fun(t + h) - fun(t - h)) / (2.0 * h)
    # one-sided second-order difference near the initial time
    return (-3.0 * fun(t) + 4.0 * fun(t + h) - fun(t + 2.0 * h)) / (2.0 * h)


def legendre_evolution_terms(phi0: FunctionHandle, p: float, t: float, y, spec: QuadratureSpec | None = None,
                             h: float = FD_STEP) -> dict:
    """Both sides of the evolution equation of ``φ_t^{*,p}(y)``.

    Returns a dict with ``lhs`` (central difference in ``t``), ``rhs``
    (``p/(p+1)|y|² − ⟨y, Dφ^{*,p}⟩ − I/(p+1) + n``), the gradient, the Fischer
    information ``I`` and the absolute ``residual``.
    """
    spec = spec or integrate.DEFAULT_SPEC
    y = np.atleast_1d(np.asarray(y, dtype=float))
    n = phi0.dim

    def value(s):
        T = transform.lp_transform(ou_evolve(phi0, s, spec), p, spec, path="quadrature")
        v = float(T(y))
        if not np.isfinite(v):
            raise DivergenceError("probe lies outside the transform domain")
        return v

    lhs = _time_derivative(value, t, h)
    phi = ou_evolve(phi0, t, spec)
    grad = transform.transform_gradient(phi, p, y, spec)
    info = transform.fischer_info(phi, p, y, spec)
    rhs = p / (p + 1.0) * float(y @ y) - float(y @ grad) - info / (p + 1.0) + n
    return {"lhs": lhs, "rhs": rhs, "gradient": grad, "fischer": info, "residual": abs(lhs - rhs)}


def legendre_evolution_residual(phi0: FunctionHandle, p: float, t: float, y, spec: QuadratureSpec | None = None,
                                h: float = FD_STEP) -> float:
    """``|∂_t φ^{*,p}(t, y) − RHS|`` with the time derivative by finite differences."""
    return legendre_evolution_terms(phi0, p, t, y, spec, h)["residual"]


# ---------------------------------------------------------------------------
# integrated quantities over the dual density


@dataclass
class DualIntegrals:
    """Averages over the probability density ``e^{−φ^{*,p}} / V(φ^{*,p})``."""

    log_v_dual: float
    barycenter: np.ndarray
    trace_cov: float
    fischer_mean: float
    inv_hessian_trace_mean: float


def _batched_tilted(phi, Yflat, p, spec):
    """Fischer information and ``tr(D²φ^{*,p})^{-1}`` of the tilted measures at ``Yflat``."""
    n = phi.dim

    def score(X, rows):
        G = phi._grad(X.reshape(-1, n)).reshape(X.shape)
        s = p * Yflat[rows][:, None, :] - (p + 1.0) * G
        return np.sum(s * s, axis=-1)[..., None]

    res = integrate.log_tilted(phi, Yflat, p, p + 1.0, spec, moments=True, gfun=score)
    cov = res.second - np.einsum("ri,rj->rij", res.mean, res.mean)
    cov = 0.5 * (cov + np.transpose(cov, (0, 2, 1)))
    with np.errstate(divide="ignore", invalid="ignore"):
        if n == 1:
            inv_tr = 1.0 / (p * cov[:, 0, 0])
        else:
            inv_tr = np.trace(np.linalg.pinv(p * cov), axis1=1, axis2=2)
    bad = res.diverged | ~np.isfinite(res.gmean[:, 0]) | ~np.isfinite(inv_tr)
    return np.where(bad, 0.0, res.gmean[:, 0]), np.where(bad, 0.0, inv_tr)


def dual_integrals(phi: FunctionHandle, p: float, spec: QuadratureSpec | None = None,
                   transform_handle=None) -> DualIntegrals:
    """Barycenter, covariance trace, mean Fischer information and mean inverse-Hessian trace of ``φ^{*,p}``."""
    spec = spec or integrate.DEFAULT_SPEC
    T = transform_handle or transform.lp_transform(phi, p, spec, path="quadrature")
    n = phi.dim

    def g(Yq, rows):
        shp = Yq.shape
        info, inv_tr = _batched_tilted(phi, Yq.reshape(-1, n), p, spec)
        return np.stack([info, inv_tr], axis=-1).reshape(shp[:2] + (2,))

    res = integrate.log_tilted(T, None, 0.0, 1.0, spec, moments=True, gfun=g)
    if res.diverged[0]:
        raise DivergenceError("V(φ^{*,p}) is infinite")
    b = res.mean[0]
    S = res.second[0]
    return DualIntegrals(float(res.logz[0]), b,
                         float(np.trace(S) - b @ b), float(res.gmean[0, 0]), float(res.gmean[0, 1]))


# ---------------------------------------------------------------------------
# Mahler evolution


@dataclass
class FlowDiagnostics:
    """Diagnostics of the flow at time ``t``.

    Fields that were not requested are ``None``.  ``g`` is the Mahler integral
    at the Santaló point, ``mpbound_slack = dMdt_fd + p/(p+1) M_p |b|²``.
    """

    t: float
    V: float
    Mp: float
    sp: list
    b_norm: float
    g: float | None = None
    dMdt_fd: float | None = None
    dMdt_rhs: float | None = None
    mpbound_rhs: float | None = None
    mpbound_slack: float | None = None
    legendre_residuals: list = field(default_factory=list)
    cramer_rao_slack: float | None = None
    brascamp_lieb_slack: float | None = None

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["sp"] = [float(v) for v in self.sp]
        return d


def _mahler_at(phi0, p, s, spec):
    return transform_mahler(ou_evolve(phi0, s, spec), p, spec)


def transform_mahler(phi: FunctionHandle, p: float, spec: QuadratureSpec) -> float:
    from .mahler import mahler

    return mahler(phi, p, spec, method="quadrature").value


def mahler_evolution(phi0: FunctionHandle, p: float, t: float, spec: QuadratureSpec | None = None,
                     h: float = FD_STEP, probes=None, santalo_point: bool = True) -> FlowDiagnostics:
    """Compare ``∂_t M_p(φ_t)`` by finite differences with the evolution formula.

    ``dMdt_rhs = (p M/(p+1)) ((1/p) ∫ I e^{−φ^{*,p}}/V(φ^{*,p}) − tr Cov(φ^{*,p}) − |b(φ^{*,p})|²)``.
    """
    spec = spec or integrate.DEFAULT_SPEC
    phi = ou_evolve(phi0, t, spec)
    T = transform.lp_transform(phi, p, spec, path="quadrature")
    di = dual_integrals(phi, p, spec, T)
    M = math.exp(T.log_v_base + di.log_v_dual)
    b2 = float(di.barycenter @ di.barycenter)
    rhs = p * M / (p + 1.0) * (di.fischer_mean / p - di.trace_cov - b2)
    fd = _time_derivative(lambda s: _mahler_at(phi0, p, s, spec), t, h)
    bound = -p / (p + 1.0) * M * b2
    diag = FlowDiagnostics(t, math.exp(T.log_v_base), M, [], math.sqrt(b2), dMdt_fd=fd, dMdt_rhs=rhs,
                           mpbound_rhs=bound, mpbound_slack=fd - bound,
                           brascamp_lieb_slack=di.fischer_mean / p - di.trace_cov)
    if santalo_point:
        sres = santalo.santalo_point(phi, p, spec, transform_handle=T)
        diag.sp, diag.g = sres.point.tolist(), sres.mahler_at_point
    for y in probes or []:
        diag.legendre_residuals.append(legendre_evolution_residual(phi0, p, t, y, spec, h))
    return diag


def mpbound_slack(phi0: FunctionHandle, p: float, t: float, spec: QuadratureSpec | None = None,
                  h: float = FD_STEP) -> float:
    """``∂_t M_p(φ_t) + p/(p+1) M_p |b(φ_t^{*,p})|²``, which the theory says is nonnegative."""
    spec = spec or integrate.DEFAULT_SPEC
    phi = ou_evolve(phi0, t, spec)
    T = transform.lp_transform(phi, p, spec, path="quadrature")
    res = integrate.log_tilted(T, None, 0.0, 1.0, spec, moments=True)
    if res.diverged[0]:
        raise DivergenceError("V(φ^{*,p}) is infinite")
    M = math.exp(T.log_v_base + float(res.logz[0]))
    b = res.mean[0]
    fd = _time_derivative(lambda s: _mahler_at(phi0, p, s, spec), t, h)
    return fd + p / (p + 1.0) * M * float(b @ b)


def monotonicity_experiment(phi0: FunctionHandle, p: float, t_grid, spec: QuadratureSpec | None = None,
                            warm_start: bool = True, full: bool = False, probes=None) -> list[FlowDiagnostics]:
    """Record ``g(t) = M_p(T_{s_p(φ_t)} φ_t)`` along ``t_grid``.

    Each state is recentred at its Santaló point, warm-started from the
    previous point.  ``full`` also fills the derivative diagnostics.

    Raises
    ------
    DomainError
        If ``t_grid`` is empty, not increasing or does not start at 0.
    """
    spec = spec or integrate.DEFAULT_SPEC
    ts = [float(t) for t in t_grid]
    if not ts or ts[0] != 0.0 or any(b <= a for a, b in zip(ts, ts[1:])):
        raise DomainError("t_grid must be increasing and start at 0")
    out = []
    x0 = None
    for t in ts:
        phi = ou_evolve(phi0, t, spec)
        T = transform.lp_transform(phi, p, spec, path="quadrature" if t > 0 else "auto")
        res = integrate.log_tilted(T, None, 0.0, 1.0, spec, moments=True)
        if res.diverged[0]:
            raise DivergenceError(f"V(φ_t^{{*,p}}) is infinite at t={t}")
        M = math.exp(T.log_v_base + float(res.logz[0]))
        start = x0 if (warm_start and x0 is not None) else None
        sres = santalo.santalo_point(phi, p, spec, x0=start, transform_handle=T)
        if warm_start:
            x0 = sres.point
        b = res.mean[0]
        if full and t > 0:
            diag = mahler_evolution(phi0, p, t, spec, probes=probes, santalo_point=False)
            diag.sp, diag.g = sres.point.tolist(), sres.mahler_at_point
        else:
            diag = FlowDiagnostics(t, math.exp(T.log_v_base), M, sres.point.tolist(), float(np.linalg.norm(b)),
                                   g=sres.mahler_at_point)
        out.append(diag)
    return out


# ---------------------------------------------------------------------------
# inequality checks


@dataclass
class InequalityReport:
    """Slacks of the information inequalities at ``t``.

    ``cramer_rao`` holds ``I − p tr(D²φ^{*,p}(y))^{-1}`` per probe.
    ``brascamp_lieb`` is ``∫ tr(D²φ^{*,p})^{-1} dμ − tr Cov(φ^{*,p})`` and
    ``trace_information`` is ``(1/p) ∫ I dμ − tr Cov(φ^{*,p})``, both over
    ``dμ = e^{−φ^{*,p}}/V(φ^{*,p})``.  ``*_relative`` divide by the larger side.
    The integrated fields are ``None`` when they were not requested.
    """

    t: float
    probes: list
    cramer_rao: list
    cramer_rao_relative: list
    brascamp_lieb: float | None
    brascamp_lieb_relative: float | None
    trace_information: float | None
    trace_information_relative: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def min_relative_slack(self) -> float:
        vals = [self.brascamp_lieb_relative, self.trace_information_relative] + list(self.cramer_rao_relative)
        return min(v for v in vals if v is not None)


def inequality_suite(phi0: FunctionHandle, p: float, t: float, probe_ys, spec: QuadratureSpec | None = None,
                     integrated: bool = True) -> InequalityReport:
    """Cramér–Rao slacks at the probes and the integrated Brascamp–Lieb slacks for ``φ_t``.

    The integrated slacks nest one n-dimensional integral inside another,
    so in two or more dimensions they are slow; ``integrated=False`` skips them.
    """
    spec = spec or integrate.DEFAULT_SPEC
    phi = ou_evolve(phi0, t, spec)
    n = phi.dim
    Y = np.atleast_2d(np.asarray(probe_ys, dtype=float)).reshape(-1, n)
    info, inv_tr = _batched_tilted(phi, Y, p, spec)
    cr = info - p * inv_tr
    if not integrated:
        return InequalityReport(t, Y.tolist(), cr.tolist(), (cr / np.maximum(info, 1e-300)).tolist(),
                                None, None, None, None)
    di = dual_integrals(phi, p, spec)
    bl = di.inv_hessian_trace_mean - di.trace_cov
    ti = di.fischer_mean / p - di.trace_cov
    return InequalityReport(
        t, Y.tolist(), cr.tolist(), (cr / np.maximum(info, 1e-300)).tolist(),
        bl, bl / max(di.inv_hessian_trace_mean, 1e-300),
        ti, ti / max(di.fischer_mean / p, 1e-300),
    )
