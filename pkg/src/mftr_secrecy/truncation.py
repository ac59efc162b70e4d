"""Truncation control for the high-SNR GSOP series.

The asymptotic GSOP is a single series over Eve's mixture index.  Once the
ratio of successive terms decreases monotonically below one, the discarded
tail is dominated by a geometric series, which gives a computable bound.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .metrics import SecrecyScenario, asymptote_prefactor, asymptote_terms, link_cache
from .mftr import SeriesCache, build_cache

__all__ = [
    "BudgetExceededError",
    "TruncationReport",
    "asymptote_term",
    "choose_truncation",
    "ratio_bound",
    "successive_ratios",
    "T_MAX",
    "WINDOW",
]

WINDOW = 5
T_MAX = 2048


class BudgetExceededError(RuntimeError):
    pass


@dataclass(frozen=True)
class TruncationReport:
    T: int
    a_T1: float
    r_T1: float | None
    bound: float | None
    stabilized_at: int | None

    @property
    def stabilized(self) -> bool:
        return self.bound is not None


def _eve_cache(sc_: SecrecyScenario, eve_cache: SeriesCache | None, T: int) -> SeriesCache:
    if eve_cache is None or eve_cache.T < T:
        return build_cache(sc_.eve, T)
    return eve_cache


def asymptote_term(j: int, sc_: SecrecyScenario, eve_cache: SeriesCache | None = None) -> float:
    """a_j, the j-th summand of the asymptotic series (without the prefactor)."""
    if j < 0:
        raise ValueError(f"j must be >= 0, got {j}")
    cache = _eve_cache(sc_, eve_cache, j)
    return float(asymptote_terms(sc_, cache.truncated(j))[j])


def successive_ratios(a: np.ndarray) -> np.ndarray:
    """r_j = |a_{j+1}|/|a_j|; 0 where both vanish, inf where only a_j does."""
    a = np.abs(np.asarray(a, dtype=float))
    num, den = a[1:], a[:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    r[(num == 0) & (den == 0)] = 0.0
    return r


def _stabilized_at(r: np.ndarray, upto: int, window: int) -> int | None:
    """First k <= upto with r_{k-window} > ... > r_k."""
    run = 0
    for k in range(1, min(upto, len(r) - 1) + 1):
        run = run + 1 if r[k] < r[k - 1] else 0
        if run >= window:
            return k
    return None


def ratio_bound(
    sc_: SecrecyScenario, eve_cache: SeriesCache | None = None, T: int = 50, window: int = WINDOW
) -> TruncationReport:
    """Geometric bound on the asymptotic series' tail beyond index T.

    ``bound`` is None when the ratios have not stabilized by T+1 or when
    r_{T+1} >= 1, in which case no geometric bound applies.
    """
    if int(T) != T or T < 1:
        raise ValueError(f"T must be an integer >= 1, got {T}")
    T = int(T)
    cache = _eve_cache(sc_, eve_cache, T + 2)
    a = asymptote_terms(sc_, cache.truncated(T + 2))
    a_t1 = abs(float(a[T + 1]))
    r = successive_ratios(a)
    r_t1 = float(r[T + 1])
    scale = asymptote_prefactor(sc_) * sc_.bob.gamma_bar ** (-sc_.bob.shape0)
    if a_t1 == 0.0 and r_t1 == 0.0:
        return TruncationReport(T, 0.0, 0.0, 0.0, T + 1)
    k = _stabilized_at(r, T + 1, window)
    if k is None or not r_t1 < 1.0:
        return TruncationReport(T, a_t1, r_t1 if r_t1 < 1.0 else None, None, k)
    return TruncationReport(T, a_t1, r_t1, scale * a_t1 / (1.0 - r_t1), k)


def choose_truncation(
    sc_: SecrecyScenario, eve_cache: SeriesCache | None = None, target: float = 1e-6, t_max: int = T_MAX
) -> int:
    """Smallest T in {16, 32, ..., t_max} whose ratio bound is at most target."""
    if not target > 0:
        raise ValueError(f"target must be > 0, got {target}")
    T = 16
    while T <= t_max:
        rep = ratio_bound(sc_, eve_cache, T)
        if math.isinf(target) or (rep.bound is not None and rep.bound <= target):
            return T
        T *= 2
    raise BudgetExceededError(f"ratio bound did not reach {target:g} by T={t_max}")
