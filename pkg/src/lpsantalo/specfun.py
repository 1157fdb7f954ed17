"""Gamma and modified Bessel machinery, the ball's L^p-support function and ball asymptotics.

Bessel functions are evaluated in the log domain.  The ascending series of
``I_nu`` has only positive terms, so it is summed with a running maximum well
past the classical cutoff; the large-argument Hankel expansion takes over
beyond ``asymptotic_cutoff``.  ``K_nu`` follows Temme's series (``x < 2``) and
Steed's continued fraction (``x >= 2``) for the fractional order, then the
stable forward recurrence.

References for the formulas implemented here: Abramowitz & Stegun §9.6-9.7 and
Temme, J. Comput. Phys. 19 (1975).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from . import _de
from .errors import DomainError

__all__ = [
    "BesselPolicy",
    "ball_support",
    "beta_bessel_identity",
    "bessel_i",
    "bessel_i_log",
    "bessel_k",
    "bessel_k_log",
    "gaunt_bracket",
    "gaunt_product",
    "kint_exact",
    "kint_numeric",
    "log_gamma",
    "log_mahler_ball",
    "log_simplex_average",
    "mahler_ball",
    "p1_asymptotic",
]

EULER_GAMMA = 0.5772156649015329


@dataclass(frozen=True)
class BesselPolicy:
    """Switch points for the Bessel evaluation strategy.

    Attributes
    ----------
    series_cutoff : float
        Below this argument the ascending series is the reference definition.
    asymptotic_cutoff : float
        At and above this argument the Hankel expansion is used.  In between
        the positive-term series is still summed, in the log domain.
    max_terms : int
        Cap on the number of series terms.
    """

    series_cutoff: float = 10.0
    asymptotic_cutoff: float = 500.0
    max_terms: int = 6000

    def __post_init__(self):
        if not (0 < self.series_cutoff < self.asymptotic_cutoff):
            raise DomainError("need 0 < series_cutoff < asymptotic_cutoff")
        if self.max_terms < 10:
            raise DomainError("max_terms must be at least 10")


DEFAULT_POLICY = BesselPolicy()


def log_gamma(x):
    """``log Γ(x)`` for ``x > 0``."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("log_gamma needs x > 0")
    out = special.gammaln(arr)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# I_nu


def _log_i_series_normalized(nu: float, x: np.ndarray, max_terms: int) -> np.ndarray:
    """``log Σ_m (x²/4)^m Γ(ν+1) / (m! Γ(m+ν+1))``, equal to 0 at ``x = 0``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    if not np.any(pos):
        return out
    xp = x[pos]
    M = int(min(max_terms, math.ceil(float(np.max(xp)) / 2.0 + 12.0 * math.sqrt(float(np.max(xp)) + 1.0) + 40)))
    m = np.arange(1, M + 1, dtype=float)
    steps = 2.0 * np.log(xp[:, None] / 2.0) - np.log(m)[None, :] - np.log(m + nu)[None, :]
    logs = np.concatenate([np.zeros((xp.size, 1)), np.cumsum(steps, axis=1)], axis=1)
    out[pos] = _de.lse(logs, axis=1)
    return out


def _log_i_hankel(nu: float, x: np.ndarray) -> np.ndarray:
    """Large-argument expansion ``I_ν(x) ≈ e^x / sqrt(2πx) Σ (-1)^k a_k(ν) / x^k``."""
    x = np.asarray(x, dtype=float)
    mu = 4.0 * nu * nu
    total = np.ones_like(x)
    term = np.ones_like(x)
    for k in range(1, 60):
        nxt = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * x)
        if np.all(np.abs(nxt) > np.abs(term)):
            break
        term = nxt
        total = total + term
        if np.all(np.abs(term) < 1e-17 * np.abs(total)):
            break
    return x - 0.5 * np.log(2.0 * math.pi * x) + np.log(total)


def bessel_i_log(nu: float, x, policy: BesselPolicy = DEFAULT_POLICY):
    """``log I_ν(x)`` for ``ν >= -1/2`` and ``x >= 0`` (``-inf`` at ``x = 0`` when ``ν > 0``)."""
    if nu < -0.5:
        raise DomainError("order must be at least -1/2")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError("bessel_i needs x >= 0")
    flat = arr.ravel()
    out = np.empty_like(flat)
    big = flat >= max(policy.asymptotic_cutoff, nu * nu)
    small = ~big
    if np.any(small):
        xs = flat[small]
        with np.errstate(divide="ignore"):
            lead = np.where(xs > 0, nu * np.log(xs / 2.0), 0.0 if nu == 0 else -np.inf)
        out[small] = lead - special.gammaln(nu + 1.0) + _log_i_series_normalized(nu, xs, policy.max_terms)
        if nu == 0:
            out[small] = np.where(xs > 0, out[small], 0.0)
    if np.any(big):
        out[big] = _log_i_hankel(nu, flat[big])
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def bessel_i(nu: float, x, policy: BesselPolicy = DEFAULT_POLICY):
    """Modified Bessel function of the first kind ``I_ν(x)``.

    Overflows to ``inf`` past ``x ≈ 700``; use :func:`bessel_i_log` there.
    """
    with np.errstate(over="ignore"):
        out = np.exp(bessel_i_log(nu, x, policy))
    return float(out) if np.ndim(out) == 0 else out


def log_bessel_i_normalized(nu: float, x, policy: BesselPolicy = DEFAULT_POLICY):
    """``log(Γ(ν+1) (2/x)^ν I_ν(x))``, continuous with value 0 at ``x = 0``."""
    arr = np.abs(np.asarray(x, dtype=float))
    flat = arr.ravel()
    out = np.empty_like(flat)
    big = flat >= max(policy.asymptotic_cutoff, nu * nu)
    if np.any(~big):
        out[~big] = _log_i_series_normalized(nu, flat[~big], policy.max_terms)
    if np.any(big):
        xb = flat[big]
        out[big] = _log_i_hankel(nu, xb) - nu * np.log(xb / 2.0) + special.gammaln(nu + 1.0)
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# K_nu


_RGAMMA_ODD = (0.5772156649015329, -0.0420026350340952, -0.0421977345555443, 0.0072189432466630)


def _temme_gammas(mu: float) -> tuple[float, float, float, float]:
    """``gam1, gam2, 1/Γ(1+μ), 1/Γ(1-μ)`` for ``|μ| <= 1/2``."""
    gampl = 1.0 / math.gamma(1.0 + mu)
    gammi = 1.0 / math.gamma(1.0 - mu)
    if abs(mu) < 1e-3:
        mu2 = mu * mu
        c1, c3, c5, c7 = _RGAMMA_ODD
        gam1 = -(c1 + c3 * mu2 + c5 * mu2 * mu2 + c7 * mu2 * mu2 * mu2)
    else:
        gam1 = (gammi - gampl) / (2.0 * mu)
    gam2 = 0.5 * (gammi + gampl)
    return gam1, gam2, gampl, gammi


def _k_fractional_scaled(mu: float, x: float) -> tuple[float, float]:
    """``e^x K_μ(x)`` and ``e^x K_{μ+1}(x)`` for ``|μ| <= 1/2``."""
    eps = 1e-17
    if x < 2.0:
        x2 = 0.5 * x
        pimu = math.pi * mu
        fact = 1.0 if abs(pimu) < eps else pimu / math.sin(pimu)
        d = -math.log(x2)
        e = mu * d
        fact2 = 1.0 if abs(e) < eps else math.sinh(e) / e
        gam1, gam2, gampl, gammi = _temme_gammas(mu)
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        total = ff
        e = math.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        d = x2 * x2
        total1 = p
        for i in range(1, 500):
            ff = (i * ff + p + q) / (i * i - mu * mu)
            c *= d / i
            p /= i - mu
            q /= i + mu
            delta = c * ff
            total += delta
            total1 += c * (p - i * ff)
            if abs(delta) < abs(total) * eps:
                break
        scale = math.exp(x)
        return total * scale, total1 * (2.0 / x) * scale
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = delh = d
    q1, q2 = 0.0, 1.0
    a1 = 0.25 - mu * mu
    q = c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(1, 100000):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q += c * qnew
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        dels = q * delh
        s += dels
        if abs(dels / s) < eps:
            break
    h = a1 * h
    kmu = math.sqrt(math.pi / (2.0 * x)) / s
    k1 = kmu * (mu + x + 0.5 - h) / x
    return kmu, k1


def _bessel_k_log_scalar(nu: float, x: float) -> float:
    nl = int(nu + 0.5)
    mu = nu - nl
    kmu, k1 = _k_fractional_scaled(mu, x)
    offset = x  # values carry a factor e^x
    for i in range(1, nl + 1):
        kmu, k1 = k1, (mu + i) * (2.0 / x) * k1 + kmu
        if abs(k1) > 1e250:
            kmu /= 1e250
            k1 /= 1e250
            offset -= 250.0 * math.log(10.0)
    return math.log(kmu) - offset


def bessel_k_log(nu: float, x):
    """``log K_ν(x)`` for ``ν >= 0`` and ``x > 0``."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("bessel_k needs x > 0")
    nu = abs(float(nu))
    out = np.array([_bessel_k_log_scalar(nu, float(v)) for v in arr.ravel()]).reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


def bessel_k(nu: float, x):
    """Modified Bessel function of the second kind ``K_ν(x)``."""
    out = np.exp(bessel_k_log(nu, x))
    return float(out) if np.ndim(out) == 0 else out


def gaunt_product(nu: float, r):
    """``r K_{ν+1}(r) I_ν(r)``, evaluated through logarithms.

    The product lies in ``(1/2, 1]``: it tends to 1 as ``r -> 0`` and decreases
    to 1/2 as ``r -> inf``.
    """
    if nu < -0.5:
        raise DomainError("order must be at least -1/2")
    arr = np.asarray(r, dtype=float)
    if np.any(arr < 0):
        raise DomainError("gaunt_product needs r >= 0")
    flat = arr.ravel()
    out = np.ones_like(flat)
    pos = flat > 0
    if np.any(pos):
        rp = flat[pos]
        out[pos] = np.exp(np.log(rp) + bessel_k_log(nu + 1.0, rp) + bessel_i_log(nu, rp))
    out = out.reshape(arr.shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# ball


def ball_support(n: int, p: float, rho):
    """L^p-support function of the Euclidean unit ball at ``|y| = rho``.

    ``h_{p,B}(y) = (1/p) log(Γ(1+n/2) (2/(p|y|))^{n/2} I_{n/2}(p|y|))``, with value 0 at the origin.
    """
    if p <= 0:
        raise DomainError("p must be positive")
    return log_bessel_i_normalized(n / 2.0, p * np.asarray(rho, dtype=float)) / p


def _radial_log_integral(logf, rtol=1e-13, scale=1.0):
    res = _de.integrate_log(lambda X, rows: logf(X[..., 0]), [0.0], [np.inf], [np.empty(0)],
                            center=np.array([[scale]]), scale=np.array([scale]), rtol=rtol,
                            level_max=9)
    if res.diverged[0]:
        raise DomainError("radial integral diverged")
    return float(res.logz[0]), float(res.err[0])


def log_mahler_ball(n: int, p: float, rtol: float = 1e-13) -> float:
    """``log M_p(B_2^n)`` from the one-dimensional radial representation."""
    if n < 1 or p <= 0:
        raise DomainError("need n >= 1 and p > 0")
    nu = n / 2.0
    power = n + n / (2.0 * p) - 1.0

    def logf(r):
        with np.errstate(divide="ignore"):
            lr = np.log(np.where(r > 0, r, 1.0))
            val = power * lr - bessel_i_log(nu, np.maximum(r, 0.0)) / p
        return np.where(r > 0, val, -np.inf)

    logj, _ = _radial_log_integral(logf, rtol=rtol, scale=max(1.0, float(n) * p))
    pref = (math.log(n) + n * math.log(math.pi) - (n / (2.0 * p)) * math.log(2.0)
            - n * math.log(p) - (2.0 + 1.0 / p) * math.lgamma(1.0 + nu))
    return pref + logj


def mahler_ball(n: int, p: float, spec=None) -> float:
    """``M_p(B_2^n)`` via the radial Bessel integral.

    ``spec`` may be a :class:`~lpsantalo.integrate.QuadratureSpec`; only its
    relative tolerance is used.
    """
    rtol = 1e-13 if spec is None else min(1e-8, spec.target_rel_tol)
    return math.exp(log_mahler_ball(n, p, rtol=rtol))


def beta_bessel_identity(n: int, a: float) -> tuple[float, float]:
    """Both sides of ``∫_{-1}^1 (1-x²)^{(n-1)/2} e^{ax} dx = √π Γ((n+1)/2) (2/a)^{n/2} I_{n/2}(a)``.

    The left side is a double-exponential quadrature, the right side uses :func:`bessel_i_log`.
    """
    if n < 1 or a <= 0:
        raise DomainError("need n >= 1 and a > 0")
    k = (n - 1) / 2.0

    def logf(X, rows):
        x = X[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return k * (np.log1p(-x) + np.log1p(x)) + a * x

    res = _de.integrate_log(logf, [-1.0], [1.0], [np.empty(0)], rows=1, center=np.array([[0.0]]),
                            rtol=1e-14, level_max=9)
    lhs = math.exp(float(res.logz[0]))
    rhs = math.exp(0.5 * math.log(math.pi) + math.lgamma((n + 1) / 2.0)
                   + (n / 2.0) * math.log(2.0 / a) + bessel_i_log(n / 2.0, a))
    return lhs, rhs


# ---------------------------------------------------------------------------
# p = 1 asymptotics


def _check_odd(n):
    if n < 1 or n % 2 == 0:
        raise DomainError("n must be an odd positive integer")


def kint_exact_log(n: int, m: int) -> float:
    """``log ∫_0^∞ t^{2m+n/2+1} K_{n/2+1}(t) dt`` for odd ``n``."""
    _check_odd(n)
    if m < 0:
        raise DomainError("m must be non-negative")
    h = (n + 1) // 2
    return (0.5 * math.log(math.pi) + math.lgamma(h + 1.0) + (n / 2.0) * math.log(2.0)
            + math.lgamma(m + h + 1.0) + math.lgamma(2 * m + 1.0)
            - math.lgamma(m + 1.0) - math.lgamma(h + 1.0))


def kint_exact(n: int, m: int) -> float:
    """Closed form of ``∫_0^∞ t^{2m+n/2+1} K_{n/2+1}(t) dt`` for odd ``n``."""
    return math.exp(kint_exact_log(n, m))


def kint_numeric(n: int, m: int, rtol: float = 1e-13) -> float:
    """Quadrature of ``∫_0^∞ t^{2m+n/2+1} K_{n/2+1}(t) dt`` (any ``n >= 1``)."""
    power = 2 * m + n / 2.0 + 1.0
    nu = n / 2.0 + 1.0

    def logf(t):
        tt = np.where(t > 0, t, 1.0)
        val = power * np.log(tt) + bessel_k_log(nu, tt)
        return np.where(t > 0, val, -np.inf)

    logj, _ = _radial_log_integral(logf, rtol=rtol, scale=max(1.0, power))
    return math.exp(logj)


def p1_asymptotic(n: int) -> float:
    """``log ∫_0^∞ t^{n+n/2} K_{n/2+1}(t) dt`` for odd ``n`` (the ``m = (n-1)/2`` case)."""
    _check_odd(n)
    return kint_exact_log(n, (n - 1) // 2)


def gaunt_bracket(n: int, rtol: float = 1e-13) -> tuple[float, float]:
    """``(J_K, J_I)`` with ``J_I = ∫ r^{n+n/2-1} / I_{n/2}(r) dr`` and ``J_K`` exact.

    The Gaunt bounds imply ``J_K <= J_I < 2 J_K``.
    """
    _check_odd(n)
    nu = n / 2.0
    power = n + n / 2.0 - 1.0

    def logf(r):
        rr = np.where(r > 0, r, 1.0)
        val = power * np.log(rr) - bessel_i_log(nu, rr)
        return np.where(r > 0, val, -np.inf)

    logj, _ = _radial_log_integral(logf, rtol=rtol, scale=float(n))
    return math.exp(p1_asymptotic(n)), math.exp(logj)


# ---------------------------------------------------------------------------
# divided differences of exp (simplex support)


def _dd_exp_direct(z: np.ndarray) -> float:
    """Divided difference of ``exp`` at the nodes ``z`` by the explicit formula, in logs."""
    n = z.size
    logs, signs = [], []
    for k in range(n):
        diff = z[k] - np.delete(z, k)
        logs.append(z[k] - np.sum(np.log(np.abs(diff))))
        signs.append(np.prod(np.sign(diff)))
    logs = np.array(logs)
    signs = np.array(signs)
    m = np.max(logs)
    s = float(np.sum(signs * np.exp(logs - m)))
    if s <= 0:
        return float("nan")
    return m + math.log(s)


def _dd_exp_matrix(z: np.ndarray) -> float:
    """Divided difference of ``exp`` as a corner entry of ``expm`` of a bidiagonal matrix."""
    shift = float(np.max(z))
    n = z.size
    J = np.diag(z - shift) + np.diag(np.ones(n - 1), 1)
    E = linalg.expm(J)
    return shift + math.log(E[0, n - 1])


def log_simplex_average(z, gap: float = 1e-4) -> float:
    """``log(n! ∫_Δ e^{⟨x,z⟩} dx)`` on ``Δ = {x >= 0, Σx <= 1}``.

    Equals ``log(n! · exp[0, z_1, …, z_n])``, the divided difference of ``exp``.
    The explicit partial-fraction formula is used when all pairwise gaps of the
    nodes exceed ``gap·(1 + |z|)``; otherwise the divided difference is read off
    the matrix exponential of a bidiagonal matrix, which has no cancellation.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    nodes = np.concatenate([[0.0], z])
    n = z.size
    d = np.abs(nodes[:, None] - nodes[None, :])
    d[np.diag_indices_from(d)] = np.inf
    thresh = gap * (1.0 + float(np.linalg.norm(z)))
    val = float("nan")
    if np.min(d) > thresh:
        val = _dd_exp_direct(nodes)
    if not np.isfinite(val):
        val = _dd_exp_matrix(nodes)
    return math.lgamma(n + 1.0) + val
