"""Scalar special-function kernels.

Gamma, incomplete gamma, Kummer 1F1, Gauss 2F1 and the real-valued
incomplete-beta term that the secrecy formulas need.  Only the real
parameter regimes that actually occur are supported; everything else
raises :class:`DomainError` rather than silently returning garbage.

Series are accumulated in the log domain (log-magnitude plus sign) because
Pochhammer ratios overflow long before the sums themselves do.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

__all__ = [
    "ConvergenceError",
    "DomainError",
    "EvalOptions",
    "PoleError",
    "gauss_2f1",
    "kummer_1f1",
    "ln_gamma",
    "log_gauss_2f1",
    "log_kummer_1f1",
    "lower_inc_gamma",
    "real_beta_term",
    "regularized_lower_gamma",
]

INTEGER_TOL = 1e-9
_BIG = 1e200
_LOG_BIG = math.log(_BIG)


class DomainError(ValueError):
    """Argument outside the supported domain."""


class PoleError(DomainError):
    """A Pochhammer zero in the denominator is reached."""


class ConvergenceError(ArithmeticError):
    """A non-terminating series missed its tolerance within ``max_terms``."""


@dataclass(frozen=True)
class EvalOptions:
    rel_tolerance: float = 1e-12
    max_terms: int = 10_000

    def __post_init__(self):
        if not self.rel_tolerance > 0:
            raise ValueError(f"rel_tolerance must be > 0, got {self.rel_tolerance}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise ValueError(f"max_terms must be a positive integer, got {self.max_terms}")


DEFAULT_OPTIONS = EvalOptions()


def _nonpositive_int(x: float) -> int | None:
    """Return ``-x`` as an int if x is a non-positive integer (within tolerance)."""
    r = round(x)
    if r <= 0 and abs(x - r) <= INTEGER_TOL:
        return -int(r)
    return None


def ln_gamma(x: float) -> float:
    if not x > 0:
        raise DomainError(f"ln_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def regularized_lower_gamma(a, x):
    """P(a, x) = Υ(a, x)/Γ(a); vectorised."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(a <= 0):
        raise DomainError("regularized_lower_gamma requires a > 0")
    if np.any(x < 0):
        raise DomainError("regularized_lower_gamma requires x >= 0")
    out = sc.gammainc(a, x)
    return float(out) if out.ndim == 0 else out


def lower_inc_gamma(a: float, x: float) -> float:
    """Unregularised lower incomplete gamma ∫₀ˣ t^{a-1} e^{-t} dt."""
    if not a > 0:
        raise DomainError(f"lower_inc_gamma requires a > 0, got {a}")
    if x < 0:
        raise DomainError(f"lower_inc_gamma requires x >= 0, got {x}")
    if x == 0:
        return 0.0
    p = sc.gammainc(a, x)
    if p == 0.0:
        # deep lower tail: leading series term x^a e^{-x}/a dominates
        return math.exp(a * math.log(x) - x - math.log(a))
    return math.exp(math.log(p) + math.lgamma(a))


def _log_series(
    ratio,
    n_terms: int | None,
    opts: EvalOptions,
    *,
    what: str,
) -> tuple[float, int, float]:
    """Sum a hypergeometric-type series given its term-ratio function.

    ``ratio(k)`` returns t_{k+1}/t_k and t_0 = 1.  With ``n_terms`` set the
    sum is finite (terms 0..n_terms-1).  Returns (log|S|, sign, log max|t_k|);
    the last value lets callers detect cancellation.
    """
    # linear accumulation; rescale by _BIG whenever the running term grows
    # past it, tracking the shed magnitude in log_scale
    log_scale = 0.0
    t, acc, tmax = 1.0, 1.0, 1.0
    limit = n_terms if n_terms is not None else opts.max_terms
    k = 0
    converged = n_terms is not None
    while k + 1 < limit:
        r = ratio(k)
        if r == 0.0:
            converged = True
            break
        t *= r
        if abs(t) > _BIG:
            t /= _BIG
            acc /= _BIG
            tmax /= _BIG
            log_scale += _LOG_BIG
        acc += t
        tmax = max(tmax, abs(t))
        k += 1
        if n_terms is None:
            rn = abs(ratio(k))
            if rn < 1.0 and abs(t) * rn / (1.0 - rn) < opts.rel_tolerance * abs(acc):
                converged = True
                break
    if not converged:
        raise ConvergenceError(
            f"{what}: no convergence to rel_tolerance={opts.rel_tolerance} "
            f"within max_terms={opts.max_terms}"
        )
    log_max = log_scale + math.log(tmax)
    if acc == 0.0:
        return -math.inf, 0, log_max
    return log_scale + math.log(abs(acc)), (1 if acc > 0 else -1), log_max


def log_kummer_1f1(a: float, b: float, z: float, opts: EvalOptions = DEFAULT_OPTIONS) -> tuple[float, int]:
    """log|₁F₁(a; b; z)| and its sign.

    Terminating regime: a a non-positive integer (|a|+1 terms, exact up to
    rounding).  Otherwise a > 0 with b not a non-positive integer.
    """
    na = _nonpositive_int(a)
    nb = _nonpositive_int(b)
    if na is not None:
        a = -float(na)
        if nb is not None and nb < na:
            raise PoleError(f"1F1({a}; {b}; z): denominator Pochhammer vanishes before termination")
        if z == 0 or na == 0:
            return 0.0, 1
        ls, sg, _ = _log_series(
            lambda k: (a + k) * z / ((b + k) * (k + 1)), na + 1, opts, what="1F1"
        )
        return ls, sg
    if not a > 0:
        raise DomainError(f"1F1 supports a > 0 or a in {{0,-1,-2,...}}; got a={a}")
    if nb is not None:
        raise PoleError(f"1F1: b={b} is a non-positive integer")
    if z == 0:
        return 0.0, 1
    if z < 0 and b > 0 and b - a >= 0:
        # Kummer transform: positive-term series, no cancellation
        ls, sg = log_kummer_1f1(b - a, b, -z, opts)
        return ls + z, sg
    ls, sg, _ = _log_series(lambda k: (a + k) * z / ((b + k) * (k + 1)), None, opts, what="1F1")
    return ls, sg


def kummer_1f1(a: float, b: float, z: float, opts: EvalOptions = DEFAULT_OPTIONS) -> float:
    """Kummer's confluent hypergeometric function ₁F₁(a; b; z)."""
    ls, sg = log_kummer_1f1(a, b, z, opts)
    return sg * math.exp(ls) if sg else 0.0


def _log_2f1_series(a, b, c, z, opts) -> tuple[float, int, float]:
    na = _nonpositive_int(a)
    nb = _nonpositive_int(b)
    stops = [n for n in (na, nb) if n is not None]
    n_terms = min(stops) + 1 if stops else None
    nc = _nonpositive_int(c)
    if nc is not None and (n_terms is None or nc < n_terms - 1):
        raise PoleError(f"2F1: c={c} is a non-positive integer")
    if z == 0 or n_terms == 1:
        return 0.0, 1, 0.0
    return _log_series(
        lambda k: (a + k) * (b + k) * z / ((c + k) * (k + 1)), n_terms, opts, what="2F1"
    )


def log_gauss_2f1(
    a: float, b: float, c: float, z: float, opts: EvalOptions = DEFAULT_OPTIONS, method: str = "auto"
) -> tuple[float, int]:
    """log|₂F₁(a, b; c; z)| and its sign, for z <= 0.

    ``method`` is ``"direct"`` (Maclaurin series, |z| < 1 only), ``"pfaff"``
    (series in z/(z-1) after a Pfaff transformation) or ``"auto"``, which
    uses Pfaff for z < -0.5 and falls back to it when the direct series
    loses more than four digits to cancellation.
    """
    if z > 0:
        raise DomainError(f"gauss_2f1 supports z <= 0 only, got z={z}")
    if _nonpositive_int(c) is not None:
        raise PoleError(f"2F1: c={c} is a non-positive integer")
    if method not in ("auto", "direct", "pfaff"):
        raise ValueError(f"unknown method {method!r}")
    if z == 0:
        return 0.0, 1
    terminating = _nonpositive_int(a) is not None or _nonpositive_int(b) is not None
    if method == "direct" or (method == "auto" and (z >= -0.5 or terminating)):
        if z <= -1 and not terminating:
            raise DomainError("direct 2F1 series needs |z| < 1")
        ls, sg, lmax = _log_2f1_series(a, b, c, z, opts)
        if method == "direct" or lmax - ls < math.log(1e4):
            return ls, sg
    w = z / (z - 1.0)
    # Of the two Pfaff forms prefer one whose terms are all positive; a
    # terminating but alternating polynomial in w ~ 1 cancels badly.
    forms = [(a, c - b, -a), (c - a, b, -b)]
    for p, q, expo in forms:
        if p > 0 and q > 0 and c > 0:
            break
    else:
        p, q, expo = next(
            (f for f in forms if _nonpositive_int(f[0]) is not None or _nonpositive_int(f[1]) is not None),
            forms[0],
        )
    ls, sg, _ = _log_2f1_series(p, q, c, w, opts)
    return ls + expo * math.log1p(-z), sg


def gauss_2f1(
    a: float, b: float, c: float, z: float, opts: EvalOptions = DEFAULT_OPTIONS, method: str = "auto"
) -> float:
    """Gauss hypergeometric function ₂F₁(a, b; c; z) for z <= 0."""
    ls, sg = log_gauss_2f1(a, b, c, z, opts, method)
    return sg * math.exp(ls) if sg else 0.0


def log_hyp2f1_positive(a, b, c, w, rel_tolerance: float = 1e-14, max_terms: int = 100_000):
    """Vectorised log ₂F₁(a, b; c; w) for a, b, c > 0 and 0 <= w < 1.

    All series terms are positive, so the sum is accumulated in log space
    with no cancellation.  Broadcasts over its arguments.
    """
    a, b, c, w = (np.ravel(v).astype(float) for v in np.broadcast_arrays(a, b, c, w))
    shape = np.broadcast(*(np.asarray(v) for v in (a, b, c, w))).shape
    if np.any(w < 0) or np.any(w >= 1):
        raise DomainError("log_hyp2f1_positive needs 0 <= w < 1")
    out = np.zeros(a.shape)
    idx = np.flatnonzero(w > 0)
    a, b, c, log_w = a[idx], b[idx], c[idx], np.log(w[idx])
    lt = np.zeros(idx.shape)
    ls = np.zeros(idx.shape)
    log_tol = math.log(rel_tolerance)
    k = 0
    while idx.size:
        if k >= max_terms:
            raise ConvergenceError("log_hyp2f1_positive: max_terms exceeded")
        lt += np.log((a + k) * (b + k) / ((c + k) * (k + 1))) + log_w
        ls = np.logaddexp(ls, lt)
        k += 1
        lr = np.log((a + k) * (b + k) / ((c + k) * (k + 1))) + log_w
        shrinking = lr < 0
        tail = lt + lr - np.log(-np.expm1(np.minimum(lr, -1e-300)))
        done = shrinking & (tail - ls < log_tol)
        if np.any(done):
            out[idx[done]] = ls[done]
            keep = ~done
            idx, a, b, c, log_w, lt, ls = (v[keep] for v in (idx, a, b, c, log_w, lt, ls))
    return out.reshape(shape)


def real_beta_term(u: float, nu: float, c: float, opts: EvalOptions = DEFAULT_OPTIONS) -> float:
    """Real value of (-1)^ν B(-u; ν, c) = (u^ν/ν)·₂F₁(ν, 1-c; ν+1; -u).

    Equivalently ∫₀ᵘ s^{ν-1} (1+s)^{c-1} ds.  When b' = 1-ν-c is a
    non-negative integer the same quantity is the incomplete beta
    B(u/(1+u); ν, b'), which is evaluated directly: the ₂F₁ route would
    either cancel catastrophically (b' >= 1) or converge like a harmonic
    series (b' = 0) once u is large.
    """
    if not u > 0:
        raise DomainError(f"real_beta_term requires u > 0, got {u}")
    if not nu > 0:
        raise DomainError(f"real_beta_term requires nu > 0, got {nu}")
    bp = 1.0 - nu - c
    rb = round(bp)
    w = u / (1.0 + u)
    if abs(bp - rb) <= INTEGER_TOL and rb >= 1:
        return math.exp(sc.betaln(nu, rb)) * sc.betainc(nu, rb, w)
    rn = round(nu)
    if abs(bp - rb) <= INTEGER_TOL and rb == 0 and abs(nu - rn) <= INTEGER_TOL:
        # ∫₀ʷ t^{n-1}/(1-t) dt = -log(1-w) - Σ_{k=1}^{n-1} w^k/k
        n = int(rn)
        return math.log1p(u) - math.fsum(w**k / k for k in range(1, n))
    ls, sg = log_gauss_2f1(nu, 1.0 - c, nu + 1.0, -u, opts)
    return sg * math.exp(nu * math.log(u) - math.log(nu) + ls) if sg else 0.0


def log_kummer_1f1_terminating(n, b, x):
    """Vectorised log ₁F₁(-n; b; x) for the positive-term terminating case.

    Requires integer n >= 0, x >= 0 and b + n - 1 < 0, so that every
    term (-n)_k x^k / ((b)_k k!) is non-negative.  Broadcasts.
    """
    n, b, x = np.broadcast_arrays(
        np.asarray(n, dtype=float), np.asarray(b, dtype=float), np.asarray(x, dtype=float)
    )
    if np.any(x < 0) or np.any(b + n - 1 >= 0):
        raise DomainError("log_kummer_1f1_terminating needs x >= 0 and b + n - 1 < 0")
    ls = np.zeros(n.shape)
    if not np.any(x > 0):
        return ls
    lt = np.zeros(n.shape)
    log_x = np.log(np.where(x > 0, x, 1.0))
    for k in range(int(n.max()) if n.size else 0):
        live = (k < n) & (x > 0)
        if not np.any(live):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.log((n - k) / -(b + k)) + log_x - math.log(k + 1)
        lt = np.where(live, lt + step, lt)
        ls = np.where(live, np.logaddexp(ls, lt), ls)
    return ls
