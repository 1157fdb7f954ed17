"""L^p-Mahler integrals ``M_p(f) = V(f) V(f^{*,p})`` and related quantities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import integrate, transform
from .errors import DivergenceError, DomainError, UnsupportedError
from .functions import FunctionHandle, IndicatorCube
from .integrate import QuadratureSpec

__all__ = [
    "MahlerReport",
    "ScanRecord",
    "conjecture_scan",
    "log_mahler_closed",
    "mahler",
    "mahler_body",
    "mahler_closed",
    "nakamura_tsuji_quotient",
]


@dataclass(frozen=True)
class MahlerReport:
    """Outcome of a Mahler-integral computation.

    ``value`` is ``inf`` exactly when the dual-volume integral was detected to
    diverge.  ``anomaly`` is set when the dual volume numerically vanishes,
    which convex inputs never produce.
    """

    value: float
    method: str
    v_f: float
    v_dual: float
    tolerance: float
    log_value: float
    anomaly: str | None = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "log_value": self.log_value,
            "method": self.method,
            "v_f": self.v_f,
            "v_dual": self.v_dual,
            "tolerance": self.tolerance,
            "anomaly": self.anomaly,
        }


_KIND_ALIASES = {
    "l1": "l1",
    "quadratic": "quadratic",
    "functional_simplex": "functional_simplex",
    "funcsimplex": "functional_simplex",
}


def log_mahler_closed(kind: str, n: int, p: float) -> float:
    """Logarithm of :func:`mahler_closed`."""
    key = _KIND_ALIASES.get(kind)
    if key is None:
        raise DomainError(f"no closed Mahler value for kind {kind!r}")
    if n < 1 or not p > 0:
        raise DomainError("need n >= 1 and p > 0")
    if math.isinf(p):
        one = {"l1": math.log(4.0), "quadratic": math.log(2.0 * math.pi), "functional_simplex": 1.0}[key]
        return n * one
    if key == "l1":
        one = ((1.0 + 1.0 / p) * math.log(p + 1.0) - math.log(p) + math.log(2.0) + 0.5 * math.log(math.pi)
               + math.lgamma(1.0 + 1.0 / p) - math.lgamma(1.5 + 1.0 / p))
    elif key == "quadratic":
        one = math.log(2.0 * math.pi) + 0.5 * (((1.0 + p) / p) * math.log1p(p) - math.log(p))
    else:
        one = 1.0 + 1.0 / p + math.log(p) / p + math.lgamma(1.0 + 1.0 / p)
    return n * one


def mahler_closed(kind: str, n: int, p: float) -> float:
    """Exact ``M_p`` of the closed-form family on ``R^n``.

    ``kind`` is ``"l1"``, ``"quadratic"`` or ``"functional_simplex"``.  The
    value is a product of ``n`` identical one-dimensional factors.
    """
    return math.exp(log_mahler_closed(kind, n, p))


def _closed_kind(f: FunctionHandle) -> str | None:
    k = _KIND_ALIASES.get(f.kind)
    return k


def mahler(f: FunctionHandle, p: float, spec: QuadratureSpec | None = None, method: str = "auto",
           transform_handle: transform.TransformHandle | None = None) -> MahlerReport:
    """``M_p(f) = V(f) V(f^{*,p})``.

    Parameters
    ----------
    method : {"auto", "quadrature", "closed_form"}
        ``"auto"`` integrates the dual volume numerically, using a closed-form
        transform inside when one exists.  ``"quadrature"`` computes the
        transform by quadrature as well.  ``"closed_form"`` returns the exact
        value for the closed-form family.
    transform_handle : TransformHandle, optional
        Reuse an existing ``f^{*,p}``.
    """
    spec = spec or integrate.DEFAULT_SPEC
    if method == "closed_form":
        kind = _closed_kind(f)
        if kind is None:
            raise UnsupportedError(f"no closed Mahler value for {f.kind}")
        lv = log_mahler_closed(kind, f.dim, p)
        vf = f.volume_closed()
        return MahlerReport(math.exp(lv), "closed_form", vf, math.exp(lv) / vf, 0.0, lv)
    if method not in ("auto", "quadrature"):
        raise DomainError(f"unknown Mahler method {method!r}")
    T = transform_handle or transform.lp_transform(f, p, spec, path="auto" if method == "auto" else "quadrature")
    res = integrate.log_tilted(T, None, 0.0, 1.0, spec)
    logv = T.log_v_base
    tol = float(res.err[0]) + spec.target_rel_tol
    if res.diverged[0] or res.logz[0] == math.inf:
        return MahlerReport(math.inf, "quadrature", math.exp(logv), math.inf, tol, math.inf)
    lz = float(res.logz[0])
    if lz < integrate.LOG_TINY:
        return MahlerReport(0.0, "quadrature", math.exp(logv), 0.0, tol, -math.inf,
                            anomaly="dual volume vanishes numerically")
    return MahlerReport(math.exp(logv + lz), "quadrature", math.exp(logv), math.exp(lz), tol, logv + lz)


def mahler_body(K: FunctionHandle, p: float, spec: QuadratureSpec | None = None,
                method: str = "auto") -> MahlerReport:
    """``M_p(K) = |K| ∫ e^{-h_{p,K}}`` for an indicator handle."""
    if not K.is_indicator:
        raise DomainError("mahler_body needs an indicator function of a body")
    return mahler(K, p, spec, method=method)


class _ScaledLaplace(FunctionHandle):
    """``y -> c · log ∫ exp(⟨x, y⟩ − φ(x)/a) dx`` as an integrable handle."""

    kind = "laplace"

    def __init__(self, phi: FunctionHandle, a: float, c: float, spec, domain):
        self.phi, self.a, self.c, self.spec, self.domain = phi, a, c, spec, domain
        self.dim = phi.dim

    def _eval(self, Y):
        out = np.full(Y.shape[0], np.inf)
        lo, hi = self.domain
        inside = np.all((Y > lo) & (Y < hi), axis=1)
        if inside.any():
            r = integrate.log_tilted(self.phi, Y[inside], 1.0, 1.0 / self.a, self.spec)
            out[inside] = np.where(r.diverged, np.inf, self.c * r.logz)
        return out

    def support_box(self):
        return self.domain[0].copy(), self.domain[1].copy()


def nakamura_tsuji_quotient(phi: FunctionHandle, a: float, spec: QuadratureSpec | None = None,
                            method: str = "auto") -> tuple[float, float]:
    """Both sides of ``‖F‖_{L^a} / ‖LF‖_{L^{a/(a-1)}} = p^{np} M_p(φ)^p``.

    Here ``F = e^{-φ/a}``, ``LF`` is its Laplace transform and ``p = (1-a)/a``.
    The left side comes from two dedicated integrals: ``∫ F^a = V(φ)`` and
    ``∫ (LF)^{a/(a-1)}`` (a negative exponent), both in the log domain.  The
    right side uses :func:`mahler`.
    """
    if not (0 < a < 1):
        raise DomainError("a must lie in (0, 1)")
    spec = spec or integrate.DEFAULT_SPEC
    n = phi.dim
    p = (1.0 - a) / a
    q = a / (a - 1.0)
    logv = integrate.log_volume(phi, spec)
    if not np.isfinite(logv):
        raise DivergenceError("V(φ) is not finite and positive")
    box = phi.dual_box(p)
    if box is None:
        box = (np.full(n, -np.inf), np.full(n, np.inf))
    domain = (p * np.asarray(box[0], dtype=float), p * np.asarray(box[1], dtype=float))
    G = _ScaledLaplace(phi, a, -q, spec, domain)
    r = integrate.log_tilted(G, None, 0.0, 1.0, spec)
    if r.diverged[0] or not np.isfinite(r.logz[0]):
        raise DivergenceError("the negative-exponent norm diverges")
    log_lhs = logv / a - float(r.logz[0]) / q
    rep = mahler(phi, p, spec, method=method)
    if not np.isfinite(rep.log_value):
        raise DivergenceError("M_p(φ) is infinite")
    log_rhs = n * p * math.log(p) + p * rep.log_value
    return math.exp(log_lhs), math.exp(log_rhs)


@dataclass(frozen=True)
class ScanRecord:
    """One function's entry in a conjecture scan."""

    name: str
    dim: int
    mahler: float
    mahler_inf: float
    santalo_point: list
    lower_bound: float
    upper_bound: float
    cube_value: float
    lower_margin: float
    upper_margin: float
    cube_margin: float
    violation: bool
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def conjecture_scan(family, p: float, spec: QuadratureSpec | None = None, rtol: float = 1e-6,
                    names=None) -> list[ScanRecord]:
    """Margins of each function against the conjectured and proven bounds.

    For every ``φ`` in ``family`` the record holds ``M_p(φ)``,
    ``inf_x M_p(T_x φ)`` (at the Santaló point), the functional-simplex lower
    bound, the quadratic upper bound and the cube value.  Margins are
    relative: ``lower_margin = M_p/lower - 1``, ``upper_margin = 1 - inf/upper``
    and ``cube_margin = M_p/cube - 1``.  ``violation`` flags a negative lower or
    upper margin beyond ``rtol``.  The cube margin is informational only.
    """
    from . import santalo

    family = list(family)
    if not family:
        raise DomainError("empty family")
    names = names or [repr(f) for f in family]
    cube_1d = mahler(IndicatorCube(1), p, spec).log_value
    out = []
    for name, f in zip(names, family):
        n = f.dim
        rep = mahler(f, p, spec)
        sres = santalo.santalo_point(f, p, spec)
        lower = mahler_closed("functional_simplex", n, p)
        upper = mahler_closed("quadratic", n, p)
        cube = math.exp(n * cube_1d)
        lm = rep.value / lower - 1.0
        um = 1.0 - sres.mahler_at_point / upper
        notes = []
        if lm < -rtol:
            notes.append("below the functional-simplex value")
        if um < -rtol:
            notes.append("Santaló infimum above the quadratic value")
        out.append(ScanRecord(name, n, rep.value, sres.mahler_at_point, sres.point.tolist(), lower, upper, cube,
                              lm, um, rep.value / cube - 1.0, bool(notes), notes))
    return out
