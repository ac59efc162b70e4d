"""Sweeps, validation runs and figure tables over parsed configurations."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from . import metrics as mt
from .config import Overlay, RunConfig, dump_config
from .mftr import mrc_snr_cdf, eve_eq_pdf, linear_to_db
from .montecarlo import SamplerConfig, estimate_metrics, worker_count
from .truncation import ratio_bound

__all__ = [
    "ANALYTIC_COLUMNS",
    "MC_COLUMNS",
    "RunReport",
    "evaluate_point",
    "figure5_analysis",
    "format_value",
    "rows_to_csv",
    "run_sweep",
    "truncation_table",
    "validate",
]

ANALYTIC_COLUMNS = [
    "curve",
    "gamma_b_db",
    "gamma_e_db",
    "rs",
    "theta",
    "gsop_exact",
    "gsop_approx",
    "gsop_asymptotic",
    "afe_exact",
    "afe_approx",
    "ailr_exact",
    "ailr_approx",
    "trunc_T",
    "trunc_bound",
    "gsop_error",
]
MC_COLUMNS = ["mc_gsop", "mc_afe", "mc_ailr", "mc_se_gsop", "mc_se_afe", "mc_se_ailr"]
SIGMA = 3.0
EQUIV_TOL = 1e-6


def format_value(v) -> str:
    """Shortest round-trip text for floats, empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class RunReport:
    scenario: dict
    sweep: dict | None
    rows: list = field(default_factory=list)
    truncation: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    verdict: dict = field(default_factory=dict)

    def to_json(self, *, timings: bool = True) -> str:
        d = asdict(self)
        if not timings:
            d["timings"] = {}
        return json.dumps(d, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _safe(fn, errors: list, label: str):
    try:
        return fn()
    except Exception as exc:  # recorded per point, never aborts a sweep
        errors.append(f"{label}: {type(exc).__name__}: {exc}")
        return None


def evaluate_point(
    sc_: mt.SecrecyScenario, trunc, sampler: SamplerConfig | None = None, curve: str = ""
) -> dict:
    """All analytic metrics (and MC estimates if sampling) for one scenario."""
    errors: list[str] = []
    row: dict = {
        "curve": curve,
        "gamma_b_db": round(linear_to_db(sc_.bob.gamma_bar), 10),
        "gamma_e_db": round(linear_to_db(sc_.eve.gamma_bar), 10),
        "rs": float(sc_.rs),
        "theta": float(sc_.theta),
    }
    caches = _safe(lambda: mt.Caches.build(sc_, trunc), errors, "caches")
    if caches is not None:
        g = _safe(lambda: mt.gsop_exact(sc_, caches), errors, "gsop_exact")
        row["gsop_exact"] = None if g is None else g.value
        row["gsop_error"] = None if g is None else g.error_estimate
        row["gsop_approx"] = _safe(lambda: mt.gsop_approx(sc_, caches).value, errors, "gsop_approx")
        row["gsop_asymptotic"] = _safe(lambda: mt.gsop_asymptotic(sc_, caches.eve).value, errors, "gsop_asymptotic")
        afe = _safe(lambda: mt.afe_exact(sc_, caches), errors, "afe_exact")
        row["afe_exact"] = None if afe is None else afe.value
        row["ailr_exact"] = None if afe is None else (1.0 - afe.value) * sc_.rs
        afa = _safe(lambda: mt.afe_approx(sc_, caches), errors, "afe_approx")
        row["afe_approx"] = None if afa is None else afa.value
        row["ailr_approx"] = None if afa is None else (1.0 - afa.value) * sc_.rs
        row["trunc_T"] = caches.T
        rep = _safe(lambda: ratio_bound(sc_, caches.eve, caches.T), errors, "ratio_bound")
        row["trunc_bound"] = None if rep is None else rep.bound
    if sampler is not None:
        est = _safe(lambda: estimate_metrics(sc_, sampler), errors, "monte_carlo")
        if est is not None:
            for k in ("gsop", "afe", "ailr"):
                row[f"mc_{k}"] = est[k].value
                row[f"mc_se_{k}"] = est[k].error_estimate
            row["mc_samples"] = sampler.samples
    row["status"] = "ok" if not errors else "; ".join(errors)
    return row


def _points(cfg: RunConfig) -> list[tuple[Overlay | None, float | None]]:
    overlays = list(cfg.sweep.overlays) if cfg.sweep and cfg.sweep.overlays else [None]
    xs = cfg.sweep.values() if cfg.sweep else [None]
    return [(o, x) for o in overlays for x in xs]


def _map(fn, items, sampler: SamplerConfig | None):
    workers = min(worker_count(sampler), max(len(items), 1))
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


def run_sweep(cfg: RunConfig, *, with_mc: bool = True, trunc=None) -> RunReport:
    """Evaluate every (overlay, x) point; rows come out overlay-major, x ascending."""
    t0 = time.perf_counter()
    trunc = cfg.truncation if trunc is None else trunc
    sampler = cfg.sampler if with_mc else None

    def one(item):
        overlay, x = item
        name = overlay.name if overlay is not None else ""
        try:
            sc_ = cfg.scenario_for(overlay, x)
        except ValueError as exc:
            return {"curve": name, "status": f"scenario: {exc}"}
        return evaluate_point(sc_, trunc, sampler, name)

    rows = _map(one, _points(cfg), sampler)
    report = RunReport(
        json.loads(dump_config(cfg)),
        None if cfg.sweep is None else json.loads(dump_config(cfg)).get("sweep"),
        rows,
    )
    report.timings["sweep_seconds"] = time.perf_counter() - t0
    return report


def rows_to_csv(rows: list[dict], *, with_mc: bool) -> str:
    cols = ANALYTIC_COLUMNS + (MC_COLUMNS if with_mc else []) + ["status"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in cols])
    return buf.getvalue()


def _null_se(metric: str, analytic: float, row: dict, n: int) -> float:
    """Standard error for the 3-sigma comparison.

    GSOP uses the binomial error implied by the analytic probability.  For
    AFE/AILR the sample error is used unless it collapses to zero (all
    samples equal), where the bound Var <= p(1-p) on [0, 1] stands in.
    """
    if metric == "gsop":
        return math.sqrt(max(analytic * (1.0 - analytic), 0.0) / n)
    se = row[f"mc_se_{metric}"]
    if se > 0:
        return se
    rs = row["rs"]
    p = analytic / rs if metric == "ailr" else 1.0 - analytic
    scale = rs if metric == "ailr" else 1.0
    return scale * math.sqrt(max(p * (1.0 - p), 0.0) / n)


def compare_row(row: dict) -> list[str]:
    """Names of metrics whose analytic value misses MC by more than 3 SE."""
    flags = []
    n = row.get("mc_samples")
    if n is None:
        return ["monte_carlo missing"]
    for k in ("gsop", "afe", "ailr"):
        a, m = row.get(f"{k}_exact"), row.get(f"mc_{k}")
        if a is None or m is None:
            flags.append(f"{k} missing")
            continue
        se = _null_se(k, a, row, n)
        if abs(a - m) > SIGMA * se and abs(a - m) > 1e-15:
            flags.append(k)
    return flags


def validate(cfg: RunConfig, *, trunc=None) -> RunReport:
    """Analytic vs MC at 3 SE on every point, plus the SOP area identity."""
    if cfg.sampler is None:
        raise ValueError("validate needs a sampler section (MC enabled)")
    report = run_sweep(cfg, with_mc=True, trunc=trunc)
    trunc = cfg.truncation if trunc is None else trunc
    t0 = time.perf_counter()
    n_flags = 0
    for row, (overlay, x) in zip(report.rows, _points(cfg)):
        flags = compare_row(row) if row.get("status") == "ok" else ["evaluation error"]
        try:
            sc1 = cfg.scenario_for(overlay, x).with_(theta=1.0)
            caches = mt.Caches.build(sc1, trunc)
            gap = abs(mt.gsop_exact(sc1, caches).value - mt.sop_product_integral(sc1, caches).value)
            row["sop_identity_gap"] = gap
            if gap > EQUIV_TOL:
                flags.append("sop_identity")
        except Exception as exc:
            flags.append(f"sop_identity error: {exc}")
        row["flags"] = ",".join(flags)
        n_flags += bool(flags)
    report.timings["validate_seconds"] = time.perf_counter() - t0
    report.verdict = {"points": len(report.rows), "flagged": n_flags, "pass": n_flags == 0}
    return report


def truncation_table(cfg: RunConfig, T_values) -> list[dict]:
    """Ratio-bound reports per overlay over a list of truncation indices."""
    overlays = list(cfg.sweep.overlays) if cfg.sweep and cfg.sweep.overlays else [None]
    out = []
    for o in overlays:
        sc_ = cfg.scenario_for(o, None)
        eve = mt.link_cache(sc_.eve, max(T_values) + 2)
        for T in T_values:
            rep = ratio_bound(sc_, eve, T)
            out.append({"curve": o.name if o else "", **asdict(rep)})
    return out


def figure5_analysis(
    sc_: mt.SecrecyScenario, z_grid=None, caches: mt.Caches | None = None, *, points: int = 201, trunc=mt.AUTO
) -> list[dict]:
    """F_{Psi_B}(z), the density of 2^Rs(1+Psi_E)-1, their product and its running area.

    The running area is integrated adaptively between grid nodes, so it does
    not depend on grid spacing beyond quadrature tolerance.  With the default
    grid the last entry reaches the classical SOP.
    """
    caches = caches if caches is not None else mt.Caches.build(sc_, trunc)
    z0 = 2.0**sc_.rs - 1.0
    if z_grid is None:
        hi = max(1.0, z0) * 4.0
        while 1.0 - mrc_snr_cdf(sc_.eve, caches.eve, (hi + 1.0) * 2.0 ** (-sc_.rs) - 1.0) > 1e-12:
            hi *= 2.0
        z_grid = np.linspace(0.0, hi, points)
    z_grid = np.asarray(z_grid, dtype=float)

    def prod(z):
        return mrc_snr_cdf(sc_.bob, caches.bob, z) * eve_eq_pdf(sc_.eve, caches.eve, sc_.rs, z)

    fb = mrc_snr_cdf(sc_.bob, caches.bob, z_grid)
    fe = eve_eq_pdf(sc_.eve, caches.eve, sc_.rs, z_grid)
    area = [0.0]
    for lo, hi in zip(z_grid[:-1], z_grid[1:]):
        pts = [z0] if lo < z0 < hi else None
        v = integrate.quad(prod, lo, hi, epsabs=1e-13, epsrel=1e-11, limit=200, points=pts)[0]
        area.append(area[-1] + v)
    return [
        {"z": float(z), "cdf_bob": float(b), "pdf_eve_eq": float(e), "product": float(b * e), "area": float(a)}
        for z, b, e, a in zip(z_grid, fb, fe, area)
    ]
