"""MFTR fading parameters and the MRC output-SNR distribution.

The per-branch SNR of an MFTR link is a gamma mixture with weights
``omega``; the sum of L i.i.d. branches is again a gamma mixture with
weights ``phi`` (the L-th power of the omega power series) and a common
scale ``rho``.
"""
from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sc

from .special import log_hyp2f1_positive

log = logging.getLogger(__name__)

__all__ = [
    "LinkConfig",
    "MftrParams",
    "SeriesCache",
    "build_cache",
    "db_to_linear",
    "eve_eq_pdf",
    "linear_to_db",
    "mrc_snr_cdf",
    "mrc_snr_pdf",
    "normalization_gap",
    "nu",
    "omega_coefficients",
    "phi_coefficients",
    "rho",
]


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class MftrParams:
    """Shape parameters of one MFTR link.

    m: shadowing severity of the specular rays; mu: number of clusters;
    sigma2: per-dimension diffuse variance; K: specular-to-diffuse power
    ratio; delta: similarity of the two dominant rays in cluster 1.
    """

    m: float
    mu: int
    sigma2: float = 0.5
    K: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if not self.m > 0:
            raise ValueError(f"m must be > 0, got {self.m}")
        if isinstance(self.mu, bool) or int(self.mu) != self.mu or self.mu < 1:
            raise ValueError(f"mu must be a positive integer, got {self.mu}")
        object.__setattr__(self, "mu", int(self.mu))
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2}")
        if not self.K >= 0:
            raise ValueError(f"K must be >= 0, got {self.K}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1] (ray-similarity range), got {self.delta}")

    @property
    def specular_power(self) -> float:
        return 2.0 * self.sigma2 * self.mu * self.K

    @property
    def mean_power(self) -> float:
        return 2.0 * self.sigma2 * self.mu * (self.K + 1.0)


@dataclass(frozen=True)
class LinkConfig:
    params: MftrParams
    L: int
    gamma_bar: float

    def __post_init__(self):
        if isinstance(self.L, bool) or int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be a positive integer, got {self.L}")
        object.__setattr__(self, "L", int(self.L))
        if not self.gamma_bar > 0:
            raise ValueError(f"gamma_bar must be > 0, got {self.gamma_bar}")

    @classmethod
    def from_db(cls, params: MftrParams, L: int, gamma_bar_db: float) -> "LinkConfig":
        return cls(params, L, db_to_linear(gamma_bar_db))

    @property
    def gamma_bar_db(self) -> float:
        return linear_to_db(self.gamma_bar)

    @property
    def shape0(self) -> int:
        """Smallest gamma shape in the mixture, mu*L."""
        return self.params.mu * self.L


def rho(p: MftrParams, gamma_bar: float) -> float:
    return gamma_bar / (p.mu * (p.K + 1.0))


def nu(i, p: MftrParams, L: int):
    return i + p.mu * L


def _log_omega(p: MftrParams, indices: np.ndarray) -> np.ndarray:
    """log omega_i for the given indices; -inf where omega_i = 0.

    Given the ray phase difference theta, the mixture index is negative
    binomial (a Poisson index averaged over the gamma shadowing) with mean
    c = mu K (1 + delta cos theta).  omega_i is that pmf averaged over a
    uniform theta.  The integrand is smooth and periodic, so the midpoint
    rule converges geometrically; node count grows like sqrt(i) to resolve
    the peak at theta = 0.
    """
    m, mu, K, D = float(p.m), p.mu, float(p.K), float(p.delta)
    i = np.asarray(indices, dtype=float)
    out = np.full(i.shape, -np.inf)
    if K == 0.0:
        out[i == 0] = 0.0
        return out
    if i.size == 0:
        return out
    n = 64 + 16 * int(math.ceil(math.sqrt(i.max() + 1.0)))
    th = np.pi * (np.arange(n) + 0.5) / n
    c = mu * K * (1.0 + D * np.cos(th))
    log_ratio = np.log(c) - np.log(m + c)
    log_zero = m * (math.log(m) - np.log(m + c))
    head = sc.gammaln(m + i) - math.lgamma(m) - sc.gammaln(i + 1.0)
    return head + sc.logsumexp(i[:, None] * log_ratio + log_zero, axis=1) - math.log(n)


def _log_omega_hypergeometric(p: MftrParams, indices: np.ndarray) -> np.ndarray:
    """Reference form of :func:`_log_omega`: a finite binomial sum of Gauss
    2F1 values per index.  O(T^2) series evaluations; kept for checking."""
    m, mu, K, D = float(p.m), p.mu, float(p.K), float(p.delta)
    i = np.asarray(indices, dtype=float)
    out = np.full(i.shape, -np.inf)
    if K == 0.0:
        out[i == 0] = 0.0
        return out
    spec_diff = mu * K * (1.0 - D)
    denom = m + spec_diff
    z = -2.0 * mu * K * D / denom
    # i-dependent prefactor without the (1-D)^i, which is folded into the q-sum
    pref = (
        m * math.log(m)
        + sc.gammaln(m + i)
        + i * math.log(mu * K)
        - 0.5 * math.log(math.pi)
        - math.lgamma(m)
        - sc.gammaln(i + 1.0)
        - (m + i) * math.log(denom)
    )
    imax = int(i.max()) if i.size else 0
    q = np.arange(imax + 1, dtype=float)
    ii, qq = np.meshgrid(i, q, indexing="ij")
    valid = qq <= ii
    qv, iv = qq[valid], ii[valid]
    # binom(i,q) Γ(q+½)/Γ(q+1) (1-D)^{i-q} (2D)^q
    with np.errstate(divide="ignore"):
        log_one_minus = math.log1p(-D) if D < 1.0 else -np.inf
        log_two_d = math.log(2.0 * D) if D > 0.0 else -np.inf
    with np.errstate(invalid="ignore"):
        lw = (
            sc.gammaln(iv + 1.0) - sc.gammaln(qv + 1.0) - sc.gammaln(iv - qv + 1.0)
            + sc.gammaln(qv + 0.5) - sc.gammaln(qv + 1.0)
            + np.where(iv - qv > 0, (iv - qv) * log_one_minus, 0.0)
            + np.where(qv > 0, qv * log_two_d, 0.0)
        )
    if z < 0.0:
        # Pfaff: 2F1(m+i, q+½; q+1; z) = (1-z)^{-(m+i)} 2F1(m+i, ½; q+1; z/(z-1))
        w = z / (z - 1.0)
        keep = np.isfinite(lw)
        lf = np.full(lw.shape, -np.inf)
        lf[keep] = log_hyp2f1_positive(m + iv[keep], 0.5, qv[keep] + 1.0, w) - (m + iv[keep]) * math.log1p(-z)
        lw = lw + lf
    terms = np.full(ii.shape, -np.inf)
    terms[valid] = lw
    with np.errstate(divide="ignore"):
        out = pref + sc.logsumexp(terms, axis=1)
    return out


def omega_coefficients(p: MftrParams, T: int) -> np.ndarray:
    """Per-branch mixture weights omega_0..omega_T."""
    if int(T) != T or T < 0:
        raise ValueError(f"T must be a non-negative integer, got {T}")
    return _omega_cached(p, int(T)).copy()


def _truncated_power(omega: np.ndarray, L: int, n: int) -> np.ndarray:
    """First n coefficients of (sum omega_i x^i)^L by binary powering."""
    result = np.zeros(n)
    result[0] = 1.0
    base = omega[:n].copy()
    while L:
        if L & 1:
            result = np.convolve(result, base)[:n]
        L >>= 1
        if L:
            base = np.convolve(base, base)[:n]
    return result


def phi_coefficients(omega, L: int, T: int | None = None, method: str = "convolution") -> np.ndarray:
    """Coefficients of (sum_i omega_i x^i)^L up to x^T.

    "convolution" multiplies non-negative arrays and is stable for any
    omega.  "recursion" is the classical power-series recursion; it divides
    by omega_0 and loses all accuracy once omega_0 is tiny (strong, lightly
    shadowed specular paths).
    """
    omega = np.asarray(omega, dtype=float)
    T = len(omega) - 1 if T is None else int(T)
    if len(omega) < T + 1:
        raise ValueError(f"need {T + 1} omega values, got {len(omega)}")
    if not omega[0] > 0:
        raise ValueError("omega[0] must be > 0")
    if method == "convolution":
        return _truncated_power(omega, int(L), T + 1)
    if method != "recursion":
        raise ValueError(f"unknown method {method!r}")
    phi = np.empty(T + 1)
    phi[0] = omega[0] ** L
    for i in range(1, T + 1):
        ell = np.arange(1, i + 1)
        phi[i] = np.dot(phi[i - ell] * omega[ell], (L * ell + ell - i)) / (i * omega[0])
    return phi


@dataclass(frozen=True)
class SeriesCache:
    """Truncated mixture coefficients of one MRC link."""

    omega: np.ndarray
    phi: np.ndarray
    rho: float
    T: int
    shape0: int  # mu*L, so that nu_i = i + shape0

    def __post_init__(self):
        if len(self.omega) != self.T + 1 or len(self.phi) != self.T + 1:
            raise ValueError("omega and phi must have length T+1")
        self.omega.setflags(write=False)
        self.phi.setflags(write=False)

    @property
    def nu(self) -> np.ndarray:
        return np.arange(self.T + 1) + self.shape0

    def truncated(self, T: int) -> "SeriesCache":
        if T > self.T:
            raise ValueError(f"cannot truncate to T={T} > {self.T}")
        return SeriesCache(self.omega[: T + 1].copy(), self.phi[: T + 1].copy(), self.rho, T, self.shape0)


@dataclass
class _OmegaStore:
    lock: threading.Lock = field(default_factory=threading.Lock)
    table: dict = field(default_factory=dict)


_store = _OmegaStore()


def _omega_cached(p: MftrParams, T: int) -> np.ndarray:
    """omega prefix for p; extends a stored shorter prefix instead of recomputing."""
    with _store.lock:
        have = _store.table.get(p)
    if have is not None and len(have) > T:
        return have[: T + 1]
    start = 0 if have is None else len(have)
    new = np.exp(_log_omega(p, np.arange(start, T + 1)))
    full = new if have is None else np.concatenate([have, new])
    with _store.lock:
        cur = _store.table.get(p)
        if cur is None or len(cur) < len(full):
            _store.table[p] = full
    return full[: T + 1]


def build_cache(link: LinkConfig, T: int = 50) -> SeriesCache:
    om = _omega_cached(link.params, T).copy()
    ph = phi_coefficients(om, link.L, T)
    return SeriesCache(om, ph, rho(link.params, link.gamma_bar), int(T), link.shape0)


def normalization_gap(p: MftrParams, L: int = 1, T: int = 500) -> float:
    """|1 - sum phi_i| at truncation T; > 1e-6 flags slow omega convergence."""
    om = _omega_cached(p, T)
    gap = abs(1.0 - phi_coefficients(om, L, T).sum())
    if gap > 1e-6:
        log.warning("mixture weights of %s sum to 1 - %.3g at T=%d", p, gap, T)
    return gap


def _gamma_mixture_logpdf_terms(cache: SeriesCache, z: np.ndarray) -> np.ndarray:
    nu_i = cache.nu.astype(float)[None, :]
    zc = z[:, None]
    with np.errstate(divide="ignore"):
        return (nu_i - 1.0) * np.log(zc) - nu_i * math.log(cache.rho) - sc.gammaln(nu_i) - zc / cache.rho


def mrc_snr_pdf(link: LinkConfig, cache: SeriesCache, z):
    """Density of the MRC output SNR, truncated at cache.T."""
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    out = np.zeros(zz.shape)
    pos = zz > 0
    if np.any(pos):
        out[pos] = np.exp(_gamma_mixture_logpdf_terms(cache, zz[pos])) @ cache.phi
    if np.any(zz == 0) and cache.shape0 == 1:
        out[zz == 0] = cache.phi[0] / cache.rho
    return float(out[0]) if np.ndim(z) == 0 else out


def mrc_snr_cdf(link: LinkConfig, cache: SeriesCache, z):
    """CDF of the MRC output SNR: sum_i phi_i P(nu_i, z/rho)."""
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    x = np.maximum(zz, 0.0)[:, None] / cache.rho
    out = sc.gammainc(cache.nu.astype(float)[None, :], x) @ cache.phi
    return float(out[0]) if np.ndim(z) == 0 else out


def eve_eq_pdf(eve: LinkConfig, cache: SeriesCache, rs: float, z):
    """Density of 2^Rs (1 + Psi_E) - 1, the SNR Bob must beat for secrecy."""
    scale = 2.0 ** (-rs)
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    arg = (zz + 1.0) * scale - 1.0
    out = np.zeros(zz.shape)
    ok = arg >= 0
    if np.any(ok):
        out[ok] = scale * np.atleast_1d(mrc_snr_pdf(eve, cache, arg[ok]))
    return float(out[0]) if np.ndim(z) == 0 else out
