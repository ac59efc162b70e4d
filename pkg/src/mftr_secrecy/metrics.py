"""Partial-secrecy metrics: GSOP, AFE and AILR.

Every metric is built on the CDF of the capacity ratio
Phi = (1 + Psi_B)/(1 + Psi_E).  Exact values use the double gamma-mixture
series truncated at the caches' T; approximate values replace Phi by
Psi_B/Psi_E (high-SNR surrogate); the asymptote keeps only the leading
Bob term as gamma_B -> infinity.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, linalg
from scipy import special as sc

from .mftr import LinkConfig, SeriesCache, build_cache, eve_eq_pdf, mrc_snr_cdf
from .special import (
    log_kummer_1f1_terminating,
    real_beta_term,
)

__all__ = [
    "AUTO",
    "AutoT",
    "Caches",
    "MetricResult",
    "QuadratureError",
    "SecrecyScenario",
    "afe_approx",
    "afe_exact",
    "ailr_approx",
    "ailr_exact",
    "asymptote_prefactor",
    "asymptote_terms",
    "delta_theta",
    "gsop_approx",
    "gsop_asymptotic",
    "gsop_exact",
    "gsop_expansion",
    "link_cache",
    "phi_cdf_approx",
    "phi_cdf_exact",
    "sop_product_integral",
    "truncation_gap",
]

log = logging.getLogger(__name__)

METHODS = ("exact", "approx", "asymptotic", "monte_carlo")


class QuadratureError(ArithmeticError):
    """Adaptive quadrature missed its tolerance."""

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3g})")
        self.achieved = achieved


@dataclass(frozen=True)
class SecrecyScenario:
    bob: LinkConfig
    eve: LinkConfig
    rs: float = 1.0
    theta: float = 1.0

    def __post_init__(self):
        if not self.rs > 0:
            raise ValueError(f"rs must be > 0, got {self.rs}")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")

    def with_(self, **changes) -> "SecrecyScenario":
        return replace(self, **changes)


@dataclass(frozen=True)
class MetricResult:
    value: float
    method: str
    T_used: int | None = None
    error_estimate: float | None = None
    note: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method tag {self.method!r}")

    def __float__(self):
        return float(self.value)


@dataclass(frozen=True)
class AutoT:
    """Adaptive truncation: double T from ``start`` until the discarded
    mixture mass is at most ``tol``, stopping at ``cap``."""

    tol: float = 1e-10
    start: int = 50
    cap: int = 1024

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if not 1 <= self.start <= self.cap:
            raise ValueError("need 1 <= start <= cap")


AUTO = AutoT()


def link_cache(link: LinkConfig, T=AUTO) -> SeriesCache:
    """Series cache at a fixed T, or the first doubling-schedule T meeting an AutoT."""
    if not isinstance(T, AutoT):
        return build_cache(link, int(T))
    t = T.start
    while True:
        cache = build_cache(link, t)
        if 1.0 - cache.phi.sum() <= T.tol / 2:
            return cache
        if t >= T.cap:
            log.warning("%s: mixture mass short by %.3g at T=%d", link, 1.0 - cache.phi.sum(), t)
            return cache
        t = min(2 * t, T.cap)


@dataclass(frozen=True)
class Caches:
    bob: SeriesCache
    eve: SeriesCache

    @classmethod
    def build(cls, sc_: SecrecyScenario, T=AUTO) -> "Caches":
        return cls(link_cache(sc_.bob, T), link_cache(sc_.eve, T))

    @property
    def T(self) -> int:
        return max(self.bob.T, self.eve.T)


def _caches(sc_: SecrecyScenario, caches: Caches | None, T) -> Caches:
    return caches if caches is not None else Caches.build(sc_, T)


def delta_theta(sc_: SecrecyScenario, caches: Caches) -> float:
    """rho_B / (2^{theta Rs} rho_E), formed in the log domain."""
    return math.exp(
        math.log(caches.bob.rho) - sc_.theta * sc_.rs * math.log(2.0) - math.log(caches.eve.rho)
    )


# --- exact CDF of Phi -------------------------------------------------------
#
# Conditioned on the mixture components (i, j), the event Psi_B <= z(1+Psi_E)-1
# is {N >= nu_i} with N = Poisson((z-1)/rho_B) + NegBin(nu_j, y),
# y = z rho_E/(rho_B + z rho_E).  Summing the survival function directly keeps
# every term positive, so tiny probabilities survive without cancellation.


def _brackets(caches: Caches, lam: float, y: float) -> np.ndarray:
    """P(Poisson(lam) + NegBin(nu_j, y) >= nu_i) on the (i, j) grid."""
    cb, ce = caches.bob, caches.eve
    nu_i = cb.nu
    n_max = int(nu_i[-1])
    m = np.arange(n_max, dtype=float)
    nj = ce.nu.astype(float)
    # s[m, j] = P(NegBin > m) = I_y(m+1, nu_j)
    s = sc.betainc(m[:, None] + 1.0, nj[None, :], y)
    if lam == 0.0:
        return s[nu_i - 1, :]
    pois = np.exp(m * math.log(lam) - lam - sc.gammaln(m + 1.0))
    # rows nu_i - 1 of the truncated convolution pois * s[:, j], as one product
    conv = linalg.toeplitz(pois, np.zeros(n_max))[nu_i - 1]
    out = conv @ s
    out += sc.gammainc(nu_i.astype(float), lam)[:, None]
    return np.clip(out, 0.0, 1.0)


def _exact_brackets(caches: Caches, z: float) -> np.ndarray:
    rb, re = caches.bob.rho, caches.eve.rho
    y = z * re / (rb + z * re)
    return _brackets(caches, (z - 1.0) / rb, y)


def _combine(caches: Caches, brackets: np.ndarray) -> float:
    return float(caches.bob.phi @ brackets @ caches.eve.phi)


def truncation_gap(caches: Caches, brackets: np.ndarray | None = None) -> float:
    """Hard bound on what a truncated probability misses from the full series.

    Conditional probabilities decrease in Bob's index and increase in Eve's,
    so dropped Bob components weigh at most the last bracket row and dropped
    Eve components at most one.  Without brackets both weigh one.
    """
    sb, se = float(caches.bob.phi.sum()), float(caches.eve.phi.sum())
    bob_w = 1.0 if brackets is None else float(brackets[-1] @ caches.eve.phi)
    return max(0.0, 1.0 - sb) * bob_w + max(0.0, 1.0 - se)


def phi_cdf_exact(sc_: SecrecyScenario, caches: Caches | None = None, z: float = 1.0, T=AUTO) -> float:
    """F_Phi(z) by the double series, z >= 1."""
    if z < 1.0:
        raise ValueError(f"phi_cdf_exact is evaluated on z >= 1, got {z}")
    caches = _caches(sc_, caches, T)
    if math.isinf(z):
        return float(caches.bob.phi.sum() * caches.eve.phi.sum())
    return _combine(caches, _exact_brackets(caches, z))


def gsop_exact(sc_: SecrecyScenario, caches: Caches | None = None, *, T=AUTO) -> MetricResult:
    """GSOP = F_Phi(2^{theta Rs}); error_estimate bounds the truncation loss."""
    caches = _caches(sc_, caches, T)
    br = _exact_brackets(caches, 2.0 ** (sc_.theta * sc_.rs))
    return MetricResult(_combine(caches, br), "exact", caches.T, truncation_gap(caches, br))


def gsop_expansion(sc_: SecrecyScenario, caches: Caches | None = None, T=AUTO) -> float:
    """GSOP from the finite 1F1 expansion written in delta_theta form.

    Same double series as :func:`gsop_exact`, arranged as
    1 - sum_{a < nu_i} (...) 1F1(-a; 1-a-nu_j; x).  It cancels badly once the
    GSOP drops below ~1e-12 and is kept as an independent cross-check.
    """
    caches = _caches(sc_, caches, T)
    cb, ce = caches.bob, caches.eve
    d = delta_theta(sc_, caches)
    n_a = int(cb.nu[-1])
    a = np.arange(n_a, dtype=float)[:, None]
    nj = ce.nu.astype(float)[None, :]
    arg = max((d + 1.0) * (1.0 / (d * ce.rho) - 1.0 / cb.rho), 0.0)
    log_g = (
        nj * math.log(d)
        - sc.gammaln(nj)
        + (1.0 / cb.rho - 1.0 / (d * ce.rho))
        + sc.gammaln(a + nj)
        - sc.gammaln(a + 1.0)
        - (a + nj) * math.log1p(d)
        + log_kummer_1f1_terminating(a, 1.0 - a - nj, arg)
    )
    head = np.cumsum(np.exp(log_g), axis=0)[cb.nu - 1, :]
    return _combine(caches, 1.0 - head)


# --- Phi_A = Psi_B/Psi_E surrogate -----------------------------------------


def phi_cdf_approx(sc_: SecrecyScenario, caches: Caches | None = None, z: float = 1.0, T=AUTO) -> float:
    """CDF of Psi_B/Psi_E at z > 0."""
    if not z > 0:
        raise ValueError(f"phi_cdf_approx needs z > 0, got {z}")
    caches = _caches(sc_, caches, T)
    rb, re = caches.bob.rho, caches.eve.rho
    return _combine(caches, _brackets(caches, 0.0, z * re / (rb + z * re)))


def gsop_approx(sc_: SecrecyScenario, caches: Caches | None = None, *, T=AUTO) -> MetricResult:
    caches = _caches(sc_, caches, T)
    rb, re = caches.bob.rho, caches.eve.rho
    z = 2.0 ** (sc_.theta * sc_.rs)
    br = _brackets(caches, 0.0, z * re / (rb + z * re))
    return MetricResult(_combine(caches, br), "approx", caches.T, truncation_gap(caches, br))


# --- high-SNR asymptote ----------------------------------------------------


def asymptote_prefactor(sc_: SecrecyScenario, bob_phi0: float | None = None) -> float:
    """Index-free factor of the asymptote, excluding gamma_B^{-mu_B L_B}."""
    p = sc_.bob.params
    n = sc_.bob.shape0
    phi0 = bob_phi0 if bob_phi0 is not None else float(build_cache(sc_.bob, 0).phi[0])
    rho_e = sc_.eve.gamma_bar / (sc_.eve.params.mu * (sc_.eve.params.K + 1.0))
    base = rho_e * p.mu * (p.K + 1.0) * 2.0 ** (sc_.theta * sc_.rs)
    return phi0 * math.exp(n * math.log(base) - math.lgamma(n) - math.log(n))


def asymptote_terms(sc_: SecrecyScenario, eve_cache: SeriesCache) -> np.ndarray:
    """Summands a_j = phi_{j,E} (nu_{j,E})_n 1F1(-n; 1-n-nu_{j,E}; x), n = mu_B L_B.

    x = (z - 1)/(z rho_E) with z = 2^{theta Rs}; this is the value that the
    defining integral of the leading Bob term produces.
    """
    n = sc_.bob.shape0
    z = 2.0 ** (sc_.theta * sc_.rs)
    nj = eve_cache.nu.astype(float)
    x = (z - 1.0) / (z * eve_cache.rho)
    log_poch = sc.gammaln(nj + n) - sc.gammaln(nj)
    log_f = log_kummer_1f1_terminating(np.full(nj.shape, float(n)), 1.0 - n - nj, x)
    return eve_cache.phi * np.exp(log_poch + log_f)


def gsop_asymptotic(sc_: SecrecyScenario, eve_cache: SeriesCache | None = None, *, T=AUTO) -> MetricResult:
    """G_c * gamma_B^{-G_d} with diversity order G_d = mu_B L_B."""
    eve_cache = eve_cache if eve_cache is not None else link_cache(sc_.eve, T)
    n = sc_.bob.shape0
    gc = asymptote_prefactor(sc_) * float(np.sum(asymptote_terms(sc_, eve_cache)))
    return MetricResult(gc * sc_.bob.gamma_bar ** (-n), "asymptotic", eve_cache.T)


# --- AFE / AILR ------------------------------------------------------------


def _log_integral(sc_: SecrecyScenario, caches: Caches, epsabs: float, limit: int) -> tuple[float, float]:
    """∫_1^{2^Rs} F_Phi(z)/z dz on the log axis t = ln z."""
    memo: dict[float, float] = {}

    def f(t):
        v = memo.get(t)
        if v is None:
            v = memo[t] = _combine(caches, _exact_brackets(caches, math.exp(t)))
        return v

    upper = sc_.rs * math.log(2.0)
    val, err, info = integrate.quad(f, 0.0, upper, epsabs=epsabs, epsrel=0.0, limit=limit, full_output=1)[:3]
    if err > max(epsabs, 1e-12) * 10:
        raise QuadratureError("F_Phi(z)/z integral did not converge", err)
    return val, err


@dataclass(frozen=True)
class Quadrature:
    epsabs: float = 1e-9
    limit: int = 200


def afe_exact(
    sc_: SecrecyScenario, caches: Caches | None = None, quad: Quadrature = Quadrature(), *, T=AUTO
) -> MetricResult:
    caches = _caches(sc_, caches, T)
    integral, err = _log_integral(sc_, caches, quad.epsabs, quad.limit)
    scale = sc_.rs * math.log(2.0)
    return MetricResult(1.0 - integral / scale, "exact", caches.T, err / scale)


def ailr_exact(
    sc_: SecrecyScenario, caches: Caches | None = None, quad: Quadrature = Quadrature(), *, T=AUTO
) -> MetricResult:
    afe = afe_exact(sc_, caches, quad, T=T)
    return MetricResult((1.0 - afe.value) * sc_.rs, "exact", afe.T_used, afe.error_estimate * sc_.rs)


def _afe_approx_brackets(sc_: SecrecyScenario, caches: Caches) -> np.ndarray:
    """Per-component (1/ln 2^Rs) ∫_1^{2^Rs} (1 - F_A(z))/z dz.

    Row a of the summand is the real-beta term difference; for a >= 1 it is
    a difference of regularized incomplete betas divided by a.
    """
    cb, ce = caches.bob, caches.eve
    u1 = cb.rho / ce.rho
    u2 = cb.rho / (2.0**sc_.rs * ce.rho)
    w1, w2 = u1 / (1.0 + u1), u2 / (1.0 + u2)
    n_a = int(cb.nu[-1])
    nj = ce.nu.astype(float)
    g = np.empty((n_a, len(nj)))
    g[0] = [real_beta_term(u1, v, 1.0 - v) - real_beta_term(u2, v, 1.0 - v) for v in nj]
    if n_a > 1:
        a = np.arange(1, n_a, dtype=float)[:, None]
        g[1:] = (sc.betainc(nj[None, :], a, w1) - sc.betainc(nj[None, :], a, w2)) / a
    return np.cumsum(g, axis=0)[cb.nu - 1, :] / (sc_.rs * math.log(2.0))


def afe_approx(sc_: SecrecyScenario, caches: Caches | None = None, *, T=AUTO) -> MetricResult:
    caches = _caches(sc_, caches, T)
    value = _combine(caches, _afe_approx_brackets(sc_, caches))
    return MetricResult(value, "approx", caches.T)


def ailr_approx(sc_: SecrecyScenario, caches: Caches | None = None, *, T=AUTO) -> MetricResult:
    afe = afe_approx(sc_, caches, T=T)
    return MetricResult((1.0 - afe.value) * sc_.rs, "approx", afe.T_used)


# --- SOP as an area ----------------------------------------------------------


def sop_product_integral(
    sc_: SecrecyScenario, caches: Caches | None = None, quad: Quadrature = Quadrature(epsabs=1e-11), *, T=AUTO
) -> MetricResult:
    """∫ F_{Psi_B}((y+1)2^Rs - 1) f_{Psi_E}(y) dy, the classical SOP (theta = 1)."""
    caches = _caches(sc_, caches, T)
    z = 2.0**sc_.rs

    def f(y):
        return mrc_snr_cdf(sc_.bob, caches.bob, (y + 1.0) * z - 1.0) * float(
            eve_eq_pdf(sc_.eve, caches.eve, 0.0, y)
        )

    # split at the bulk of Eve's density to help the adaptive rule
    scale = caches.eve.rho * (caches.eve.shape0 + caches.eve.T)
    pieces = [(0.0, scale), (scale, np.inf)]
    total, err = 0.0, 0.0
    for lo, hi in pieces:
        v, e, info = integrate.quad(f, lo, hi, epsabs=quad.epsabs, epsrel=1e-12, limit=quad.limit, full_output=1)[:3]
        total += v
        err += e
    if err > 1e-8:
        raise QuadratureError("SOP product integral did not converge", err)
    return MetricResult(total, "exact", caches.T, err)
