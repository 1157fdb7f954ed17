"""L^p-Santaló points: the minimiser of ``x -> M_p(T_x φ)``.

Translating ``φ`` only multiplies the dual density by ``e^{⟨x,y⟩}``, since
``(T_x φ)^{*,p}(y) = φ^{*,p}(y) − ⟨x, y⟩`` and ``V(T_x φ) = V(φ)``.  Hence

    M_p(T_x φ) = V(φ) ∫ e^{⟨x,y⟩ − φ^{*,p}(y)} dy,

whose gradient is ``M_p · b((T_x φ)^{*,p})`` and whose Hessian is
``V(φ) ∫ y yᵀ e^{⟨x,y⟩ − φ^{*,p}(y)} dy``.  The solver builds an adaptive
rule in ``y`` once per outer round, runs damped Newton on the exactly
reweighted rule, and rebuilds the rule at the new point until the freshly
integrated barycenter vanishes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _de, integrate, transform
from .errors import ConvergenceError, DivergenceError, DomainError
from .functions import FunctionHandle
from .integrate import QuadratureSpec

__all__ = ["SantaloResult", "mahler_inf", "mahler_translated", "santalo_point"]

HESSIAN_REG = 1e-10


@dataclass
class SantaloResult:
    """Output of :func:`santalo_point`.

    ``trace`` lists ``(x, M_p(T_x φ), |D_x M_p|)`` at every freshly integrated point.
    """

    point: np.ndarray
    mahler_at_point: float
    residual: float
    iterations: int
    converged: bool
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "point": self.point.tolist(),
            "mahler_at_point": self.mahler_at_point,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "trace": [{"x": x.tolist(), "mahler": m, "grad_norm": g} for x, m, g in self.trace],
        }


@dataclass
class _Eval:
    x: np.ndarray
    logm: float
    mean: np.ndarray
    second: np.ndarray
    rule: tuple


def _integrate_at(T, x, spec, center=None) -> _Eval:
    res = integrate.log_tilted(T, x[None, :], 1.0, 1.0, spec, moments=True, keep_rule=True,
                               center=None if center is None else center[None, :])
    if res.diverged[0] or not np.isfinite(res.logz[0]):
        raise DivergenceError("M_p(T_x φ) is infinite at the current point")
    S = 0.5 * (res.second[0] + res.second[0].T)
    return _Eval(x.copy(), T.log_v_base + float(res.logz[0]), res.mean[0], S, res.rule[0])


def _reweighted(rule, x_ref, x):
    Y, C, far = rule
    Cx = C + Y @ (x - x_ref)
    z = _de.lse(Cx)
    zfar = _de.lse(np.where(far, Cx, -np.inf))
    if not np.isfinite(z) or zfar - z > -_de.DIVERGENCE_NATS:
        return math.inf, None, None
    W = np.exp(Cx - z)
    return z, W @ Y, np.einsum("m,mi,mj->ij", W, Y, Y)


def mahler_translated(f: FunctionHandle, p: float, x, spec: QuadratureSpec | None = None,
                      transform_handle=None) -> float:
    """``M_p(T_x f)`` through the translation rule."""
    spec = spec or integrate.DEFAULT_SPEC
    T = transform_handle or transform.lp_transform(f, p, spec)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    res = integrate.log_tilted(T, x[None, :], 1.0, 1.0, spec)
    if res.diverged[0]:
        return math.inf
    return math.exp(T.log_v_base + float(res.logz[0]))


def santalo_point(f: FunctionHandle, p: float, spec: QuadratureSpec | None = None, tol: float = 1e-9,
                  max_iter: int = 40, x0=None, transform_handle=None) -> SantaloResult:
    """Damped Newton minimisation of ``g(x) = M_p(T_x φ)``.

    Parameters
    ----------
    f : FunctionHandle
    p : float
    spec : QuadratureSpec, optional
    tol : float
        Convergence threshold on the residual ``|b((T_x φ)^{*,p})|``.
    max_iter : int
        Cap on the total number of Newton steps.
    x0 : array_like, optional
        Starting point; the barycenter of ``e^{-f}`` by default.
    transform_handle : TransformHandle, optional
        Reuse an existing ``f^{*,p}``.

    Raises
    ------
    DomainError
        If ``M_p(T_{x0} φ)`` is infinite.
    ConvergenceError
        If the residual is still above ``tol`` after ``max_iter`` steps.
    """
    spec = spec or integrate.DEFAULT_SPEC
    T = transform_handle or transform.lp_transform(f, p, spec)
    n = f.dim
    x = integrate.barycenter(f, spec) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    try:
        cur = _integrate_at(T, x, spec)
    except DivergenceError as exc:
        raise DomainError("starting point is not interior to the domain of f") from exc
    trace = [(cur.x.copy(), math.exp(cur.logm), math.exp(cur.logm) * float(np.linalg.norm(cur.mean)))]
    steps = 0
    while True:
        residual = float(np.linalg.norm(cur.mean))
        if residual < tol:
            return SantaloResult(cur.x, math.exp(cur.logm), residual, steps, True, trace)
        if steps >= max_iter:
            raise ConvergenceError(f"Santaló solver stopped at residual {residual:.3e} after {steps} steps")
        # Newton on the rule frozen at cur.x
        x_ref = cur.x
        xk, logz, mean, second = cur.x.copy(), cur.logm - T.log_v_base, cur.mean, cur.second
        inner = 0
        while steps < max_iter:
            H = second + HESSIAN_REG * np.trace(second) / n * np.eye(n)
            try:
                d = -np.linalg.solve(H, mean)
            except np.linalg.LinAlgError:
                d = -mean
            alpha = 1.0
            accepted = False
            for _ in range(60):
                cand = xk + alpha * d
                z, m_c, s_c = _reweighted(cur.rule, x_ref, cand)
                if np.isfinite(z) and z < logz:
                    accepted = True
                    break
                alpha *= 0.5
            steps += 1
            inner += 1
            if not accepted:
                break
            step = float(np.linalg.norm(cand - xk))
            xk, logz, mean, second = cand, z, m_c, s_c
            if np.linalg.norm(mean) < 0.1 * tol or step < 1e-15 * (1.0 + float(np.linalg.norm(xk))) or inner >= 8:
                break
        if np.array_equal(xk, cur.x):
            # the frozen rule cannot improve further; accept the fresh point as final
            return SantaloResult(cur.x, math.exp(cur.logm), residual, steps, residual < tol, trace)
        cur = _integrate_at(T, xk, spec)
        trace.append((cur.x.copy(), math.exp(cur.logm), math.exp(cur.logm) * float(np.linalg.norm(cur.mean))))


def mahler_inf(f: FunctionHandle, p: float, spec: QuadratureSpec | None = None, **kw) -> float:
    """``inf_x M_p(T_x φ)``, attained at the Santaló point."""
    return santalo_point(f, p, spec, **kw).mahler_at_point
