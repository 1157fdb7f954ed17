"""Property suite behind ``lpsantalo verify``.

Each check is a small numerical experiment with an explicit oracle and a
tolerance.  Checks are grouped by module; ``quick`` skips the flow
experiments that build many flow states.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import flow, functions as F, integrate, mahler, santalo, specfun, transform
from .integrate import QuadratureSpec

__all__ = ["CheckResult", "CHECKS", "run_suite"]


@dataclass
class CheckResult:
    name: str
    module: str
    passed: bool
    detail: str
    seconds: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


# -- functions ----------------------------------------------------------------

def _functions_translation(spec):
    f = F.translate(F.L1Norm(2), [0.3, -0.2])
    y = np.array([[0.4, 0.1], [-0.8, 0.5]])
    lhs = f.transform_closed(y, 1.0)
    rhs = F.L1Norm(2).transform_closed(y, 1.0) - y @ np.array([0.3, -0.2])
    err = float(np.max(np.abs(lhs - rhs)))
    return err < 1e-13, f"translated transform error {err:.1e}"


def _functions_extended(spec):
    f = F.FunctionalSimplex(2)
    v = f(np.array([[-2.0, 0.0], [0.0, 0.0]]))
    return bool(np.isposinf(v[0]) and v[1] == 0.0), "value +inf outside the domain and finite inside"


def _functions_affine(spec):
    lb = F.affine_lower_bound(F.L1Norm(1))
    xs = np.linspace(-20, 20, 401)
    gap = float(np.min(F.L1Norm(1)(xs[:, None]) - lb(xs[:, None])))
    return gap >= -1e-12, f"min f - (a|x| - b) = {gap:.2e}"


# -- integrate ------------------------------------------------------------------

def _integrate_volumes(spec):
    errs = [
        _rel(integrate.volume(F.Quadratic(2), spec), 2 * math.pi),
        _rel(integrate.volume(F.L1Norm(3), spec), 8.0),
        _rel(integrate.volume(F.FunctionalSimplex(1), spec), math.e),
        _rel(integrate.volume(F.IndicatorBall(3), spec), 4 * math.pi / 3),
    ]
    return max(errs) < 1e-8, f"max relative volume error {max(errs):.1e}"


def _integrate_barycenter(spec):
    b = integrate.barycenter(F.translate(F.FunctionalSimplex(1), [0.5]), spec)
    return abs(b[0] + 0.5) < 1e-9, f"barycenter {b[0]:.12f} (exact -0.5)"


# -- specfun ------------------------------------------------------------------

def _specfun_identity(spec):
    worst = 0.0
    for n in range(1, 10):
        for a in (0.5, 1.0, 5.0, 20.0):
            lhs, rhs = specfun.beta_bessel_identity(n, a)
            worst = max(worst, _rel(lhs, rhs))
    return worst < 1e-9, f"worst relative error {worst:.1e}"


def _specfun_gaunt(spec):
    nus = np.arange(0.0, 10.01, 0.5)
    rs = np.logspace(-3, 3, 25)
    vals = np.concatenate([specfun.gaunt_product(nu, rs) for nu in nus])
    lo, hi = float(vals.min()), float(vals.max())
    return 0.5 < lo and hi <= 1.0, f"range [{lo:.6f}, {hi:.6f}]"


def _specfun_kint(spec):
    worst = max(_rel(specfun.kint_numeric(n, m), specfun.kint_exact(n, m)) for n in (1, 3, 5, 7) for m in (0, 1, 2))
    return worst < 1e-8, f"worst relative error {worst:.1e}"


def _specfun_ball(spec):
    errs = [_rel(specfun.mahler_ball(1, 1.0), math.pi**2)]
    return max(errs) < 1e-10, f"M_1([-1,1]) relative error {errs[0]:.1e}"


# -- transform ----------------------------------------------------------------

def _transform_closed(spec):
    worst = 0.0
    for f in (F.L1Norm(1), F.Quadratic(1), F.FunctionalSimplex(1)):
        for p in (0.5, 1.0, 2.0):
            T = transform.lp_transform(f, p, spec, path="quadrature")
            hi = 0.9 * (p + 1) / p
            ys = np.linspace(-hi, hi, 9)[:, None]
            worst = max(worst, float(np.max(np.abs(T.batch(ys) - f.transform_closed(ys, p)))))
    return worst < 1e-8, f"max |quadrature - closed| {worst:.1e}"


def _transform_monotone(spec):
    ys = np.linspace(-0.9, 0.9, 7)[:, None]
    worst = 0.0
    for f in (F.L1Norm(1), F.FunctionalSimplex(1), F.IndicatorCube(1)):
        vals = [transform.lp_transform(f, p, spec).batch(ys) for p in (0.5, 1.0, 2.0, 4.0, 10.0)]
        worst = max(worst, max(float(np.max(a - b)) for a, b in zip(vals, vals[1:])))
    return worst <= 1e-10, f"largest decrease in p {worst:.1e}"


def _transform_hessian(spec):
    H = transform.transform_hessian(F.Quadratic(1), 2.0, [0.3], spec)
    exact = 2.0 / 3.0
    return abs(H[0, 0] - exact) < 1e-8, f"D² q^(*,2) = {H[0, 0]:.12f} (exact {exact:.12f})"


# -- mahler ---------------------------------------------------------------------

def _mahler_closed(spec):
    cases = [(F.Quadratic(1), 4 * math.pi), (F.L1Norm(1), 32 / 3), (F.FunctionalSimplex(1), math.e**2)]
    worst = max(_rel(mahler.mahler(f, 1.0, spec, method="quadrature").value, v) for f, v in cases)
    return worst < 1e-6, f"worst relative error {worst:.1e}"


def _mahler_tensor(spec):
    f, g = F.L1Norm(1), F.FunctionalSimplex(1)
    worst = 0.0
    for p in (1.0, 2.0):
        a = mahler.mahler(F.tensor(f, g), p, spec).value
        b = mahler.mahler(f, p, spec).value * mahler.mahler(g, p, spec).value
        worst = max(worst, _rel(a, b))
    return worst < 1e-4, f"relative defect {worst:.1e}"


def _mahler_antimonotone(spec):
    worst = -math.inf
    for f in (F.Quadratic(1), F.L1Norm(1), F.IndicatorCube(1)):
        vals = [mahler.mahler(f, p, spec).value for p in (0.5, 1.0, 2.0, 4.0, 10.0)]
        worst = max(worst, max((b - a) / a for a, b in zip(vals, vals[1:])))
    return worst <= 1e-9, f"largest relative increase in p {worst:.1e}"


def _mahler_laplace(spec):
    worst = 0.0
    for f in (F.Quadratic(1), F.L1Norm(1)):
        for a in (1 / 3, 1 / 2, 2 / 3):
            lhs, rhs = mahler.nakamura_tsuji_quotient(f, a, spec)
            worst = max(worst, _rel(lhs, rhs))
    return worst < 1e-5, f"worst relative mismatch {worst:.1e}"


# -- santalo --------------------------------------------------------------------

def _santalo_even(spec):
    pts = [abs(santalo.santalo_point(f, 1.0, spec).point[0])
           for f in (F.Quadratic(1), F.L1Norm(1), F.IndicatorCube(1))]
    return max(pts) < 1e-8, f"max |s_p| {max(pts):.1e}"


def _santalo_equivariant(spec):
    f = F.FunctionalSimplex(1)
    s0 = santalo.santalo_point(f, 2.0, spec).point[0]
    s1 = santalo.santalo_point(F.translate(f, [0.7]), 2.0, spec).point[0]
    err = abs(s1 + 0.7 - s0)
    return err < 2e-8, f"|s(T_a f) + a - s(f)| = {err:.1e}"


def _santalo_bound(spec):
    worst = -math.inf
    for f in (F.FunctionalSimplex(1), F.L1Norm(1), F.IndicatorCube(1), F.translate(F.FunctionalSimplex(1), [0.4])):
        for p in (1.0, 2.0):
            m = santalo.mahler_inf(f, p, spec)
            worst = max(worst, m / mahler.mahler_closed("quadratic", 1, p) - 1.0)
    return worst <= 1e-6, f"max relative excess over the quadratic value {worst:.1e}"


# -- flow -----------------------------------------------------------------------

def _flow_fixed_point(spec):
    xs = np.linspace(-6, 6, 101)[:, None]
    err = float(np.max(np.abs(flow.ou_evolve(F.Quadratic(1), 0.7, spec)(xs) - 0.5 * xs[:, 0] ** 2)))
    return err < 1e-8, f"sup error {err:.1e}"


def _flow_volume(spec):
    worst = max(_rel(integrate.volume(flow.ou_evolve(F.FunctionalSimplex(1), t, spec), spec), math.e)
                for t in (0.1, 1.0, 3.0))
    return worst < 1e-6, f"max relative drift {worst:.1e}"


def _flow_limit(spec):
    xs = np.linspace(-5, 5, 101)[:, None]
    phi = flow.ou_evolve(F.L1Norm(1), 10.0, spec)
    target = 0.5 * xs[:, 0] ** 2 - math.log(2.0 / math.sqrt(2 * math.pi))
    err = float(np.max(np.abs(phi(xs) - target)))
    return err < 1e-4, f"sup error {err:.1e}"


def _flow_legendre(spec):
    r = flow.legendre_evolution_residual(F.translate(F.Quadratic(1), [1.0]), 1.0, 0.5, [0.4], spec)
    return r < 1e-3, f"residual {r:.1e}"


def _flow_mahler(spec):
    d = flow.mahler_evolution(F.FunctionalSimplex(1), 1.0, 0.5, spec, santalo_point=False)
    gap = abs(d.dMdt_fd - d.dMdt_rhs) / (1 + abs(d.dMdt_rhs))
    return gap < 1e-3 and d.mpbound_slack >= -1e-6, f"derivative gap {gap:.1e}, bound slack {d.mpbound_slack:.2e}"


def _flow_monotone(spec):
    out = flow.monotonicity_experiment(F.FunctionalSimplex(1), 1.0, [0.0, 0.25, 0.5, 1.0, 2.0], spec)
    g = [d.g for d in out]
    steps = min(b - a for a, b in zip(g, g[1:]))
    ok = steps >= -1e-6 * g[0] and g[-1] <= 4 * math.pi * (1 + 1e-6)
    return ok, f"g from {g[0]:.6f} to {g[-1]:.6f}, smallest step {steps:.1e}"


def _flow_inequalities(spec):
    rep = flow.inequality_suite(F.translate(F.Quadratic(1), [0.6]), 1.0, 0.4, [-0.5, 0.0, 0.8], spec)
    s = rep.min_relative_slack()
    return s >= -1e-6, f"smallest relative slack {s:.1e}"


def _flow_nonconvex(spec):
    grid = F.GridSpec.cube(1, 12.0, 2401)
    f = F.GridSampled.sample(lambda X: np.abs(X[:, 0]) + 0.3 * np.sin(X[:, 0]), grid)
    out = flow.monotonicity_experiment(f, 1.0, [0.0, 0.5, 1.0, 2.0], spec)
    g = [d.g for d in out]
    steps = min(b - a for a, b in zip(g, g[1:]))
    return steps >= -1e-6 * g[0], f"g from {g[0]:.6f} to {g[-1]:.6f}, smallest step {steps:.1e}"


# -- cli ------------------------------------------------------------------------

def _cli_determinism(spec):
    from .cli import dumps_json

    rep = mahler.mahler(F.L1Norm(1), 1.0, spec).to_dict()
    a, b = dumps_json(rep), dumps_json(mahler.mahler(F.L1Norm(1), 1.0, spec).to_dict())
    import json

    back = json.loads(a)
    return a == b and abs(back["value"] - rep["value"]) == 0.0, "identical bytes and exact round trip"


CHECKS: list[tuple[str, str, bool, Callable]] = [
    ("functions.translation-rule", "functions", True, _functions_translation),
    ("functions.extended-values", "functions", True, _functions_extended),
    ("functions.affine-lower-bound", "functions", True, _functions_affine),
    ("integrate.volumes", "integrate", True, _integrate_volumes),
    ("integrate.barycenter", "integrate", True, _integrate_barycenter),
    ("specfun.beta-bessel-identity", "specfun", True, _specfun_identity),
    ("specfun.gaunt-range", "specfun", True, _specfun_gaunt),
    ("specfun.k-integral", "specfun", True, _specfun_kint),
    ("specfun.interval-mahler", "specfun", True, _specfun_ball),
    ("transform.closed-forms", "transform", True, _transform_closed),
    ("transform.monotone-in-p", "transform", True, _transform_monotone),
    ("transform.hessian-covariance", "transform", True, _transform_hessian),
    ("mahler.closed-values", "mahler", True, _mahler_closed),
    ("mahler.tensoriality", "mahler", True, _mahler_tensor),
    ("mahler.antimonotone-in-p", "mahler", True, _mahler_antimonotone),
    ("mahler.laplace-norm-identity", "mahler", True, _mahler_laplace),
    ("santalo.even-functions", "santalo", True, _santalo_even),
    ("santalo.equivariance", "santalo", True, _santalo_equivariant),
    ("santalo.quadratic-upper-bound", "santalo", True, _santalo_bound),
    ("flow.gaussian-fixed-point", "flow", True, _flow_fixed_point),
    ("flow.volume-conservation", "flow", True, _flow_volume),
    ("flow.long-time-limit", "flow", True, _flow_limit),
    ("flow.transform-evolution", "flow", False, _flow_legendre),
    ("flow.mahler-evolution", "flow", False, _flow_mahler),
    ("flow.santalo-monotonicity", "flow", False, _flow_monotone),
    ("flow.information-inequalities", "flow", False, _flow_inequalities),
    ("flow.nonconvex-monotonicity", "flow", False, _flow_nonconvex),
    ("cli.deterministic-json", "cli", True, _cli_determinism),
]


def run_suite(suite: str = "all", spec: QuadratureSpec | None = None) -> list[CheckResult]:
    """Run ``all``, ``quick`` or one module's checks; exceptions count as failures."""
    spec = spec or integrate.DEFAULT_SPEC
    modules = {m for _, m, _, _ in CHECKS}
    if suite not in ("all", "quick") and suite not in modules:
        from .cli import UsageError

        raise UsageError(f"unknown suite {suite!r}; expected all, quick or one of {sorted(modules)}")
    out = []
    for name, module, quick, fn in CHECKS:
        if suite == "quick" and not quick or suite not in ("all", "quick") and module != suite:
            continue
        t0 = time.perf_counter()
        try:
            ok, detail = fn(spec)
        except Exception as exc:  # a crash is a failed check, reported by name
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, module, bool(ok), detail, round(time.perf_counter() - t0, 3)))
    return out
