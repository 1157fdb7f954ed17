import math

import numpy as np
import pytest

from lpsantalo import functions as F, mahler, specfun
from lpsantalo.errors import DomainError, UnsupportedError


@pytest.mark.parametrize("kind,f", [("l1", F.L1Norm(1)), ("quadratic", F.Quadratic(1)),
                                    ("funcsimplex", F.FunctionalSimplex(1))])
@pytest.mark.parametrize("p", [0.5, 1.0, 3.0])
def test_closed_value_matches_quadrature(kind, f, p):
    exact = mahler.mahler_closed(kind, 1, p)
    assert mahler.mahler(f, p, method="quadrature").value == pytest.approx(exact, rel=1e-9)
    assert mahler.mahler(f, p, method="closed_form").value == pytest.approx(exact, rel=1e-14)


def test_closed_values_at_p_one():
    assert mahler.mahler_closed("quadratic", 1, 1.0) == pytest.approx(4 * math.pi)
    assert mahler.mahler_closed("l1", 1, 1.0) == pytest.approx(32 / 3)
    assert mahler.mahler_closed("functional_simplex", 1, 1.0) == pytest.approx(math.e**2)


def test_closed_values_at_infinity():
    assert mahler.mahler_closed("quadratic", 2, math.inf) == pytest.approx((2 * math.pi) ** 2)
    assert mahler.mahler_closed("l1", 1, math.inf) == 4.0


def test_closed_form_errors():
    with pytest.raises(DomainError):
        mahler.mahler_closed("cube", 1, 1.0)
    with pytest.raises(DomainError):
        mahler.mahler_closed("l1", 0, 1.0)
    with pytest.raises(UnsupportedError):
        mahler.mahler(F.IndicatorCube(1), 1.0, method="closed_form")
    with pytest.raises(DomainError):
        mahler.mahler(F.L1Norm(1), 1.0, method="monte-carlo")


def test_product_structure_of_closed_values():
    for kind in ("l1", "quadratic", "funcsimplex"):
        assert mahler.mahler_closed(kind, 3, 2.0) == pytest.approx(mahler.mahler_closed(kind, 1, 2.0) ** 3)


def test_tensoriality():
    f, g = F.L1Norm(1), F.Quadratic(1)
    m = mahler.mahler(F.tensor(f, g), 2.0).value
    assert m == pytest.approx(mahler.mahler(f, 2.0).value * mahler.mahler(g, 2.0).value, rel=1e-8)


def test_affine_invariance():
    A = np.array([[2.0, 1.0], [0.0, 0.5]])
    base = F.L1Norm(2)
    assert mahler.mahler(F.pullback(base, A), 1.0).value == pytest.approx(mahler.mahler(base, 1.0).value, rel=1e-7)


def test_ball_value():
    assert mahler.mahler_body(F.IndicatorBall(2), 1.0).value == pytest.approx(specfun.mahler_ball(2, 1.0), rel=1e-8)
    with pytest.raises(DomainError):
        mahler.mahler_body(F.L1Norm(1), 1.0)


def test_anti_monotone_in_p():
    vals = [mahler.mahler(F.IndicatorCube(1), p).value for p in (0.5, 1.0, 2.0, 4.0)]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_report_serialises():
    d = mahler.mahler(F.L1Norm(1), 1.0).to_dict()
    assert set(d) == {"value", "log_value", "method", "v_f", "v_dual", "tolerance", "anomaly"}
    assert d["v_f"] * d["v_dual"] == pytest.approx(d["value"])


@pytest.mark.parametrize("a", [1 / 3, 1 / 2, 2 / 3])
def test_laplace_norm_identity(a):
    for f in (F.Quadratic(1), F.L1Norm(1)):
        lhs, rhs = mahler.nakamura_tsuji_quotient(f, a)
        assert lhs == pytest.approx(rhs, rel=1e-8)


def test_laplace_norm_identity_rejects_bad_exponent():
    with pytest.raises(DomainError):
        mahler.nakamura_tsuji_quotient(F.Quadratic(1), 1.5)


def test_conjecture_scan():
    recs = mahler.conjecture_scan([F.L1Norm(1), F.IndicatorCube(1)], 1.0, names=["l1", "cube"])
    assert [r.name for r in recs] == ["l1", "cube"]
    for r in recs:
        assert not r.violation
        assert r.lower_margin >= 0 and r.upper_margin >= 0
        assert r.mahler_inf <= r.mahler * (1 + 1e-9)
    assert recs[1].cube_margin == pytest.approx(0.0, abs=1e-8)
