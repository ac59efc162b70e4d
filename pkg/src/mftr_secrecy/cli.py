"""Command-line entry point: ``mftr-secrecy <command> --config FILE``.

``--config`` takes a JSON path or the name of a bundled scenario
(fig2 ... fig10).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import asdict, replace
from importlib import resources
from pathlib import Path

from . import metrics as mt
from .config import ConfigError, RunConfig, load_config, parse_config, parse_trunc
from .montecarlo import SamplerConfig, estimate_metrics
from .sweep import (
    MC_COLUMNS,
    figure5_analysis,
    format_value,
    rows_to_csv,
    run_sweep,
    truncation_table,
    validate,
)

COMMANDS = ("gsop", "afe", "ailr", "sop", "sweep", "simulate", "validate", "truncation-report", "fig5")


def bundled_names() -> list[str]:
    files = resources.files("mftr_secrecy") / "scenarios"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def resolve_config(ref: str) -> RunConfig:
    path = Path(ref)
    if path.exists():
        return load_config(path)
    name = ref[:-5] if ref.endswith(".json") else ref
    res = resources.files("mftr_secrecy") / "scenarios" / f"{name}.json"
    if res.is_file():
        return parse_config(res.read_text(encoding="utf-8"))
    raise ConfigError("--config", f"no file or bundled scenario named {ref!r} (bundled: {', '.join(bundled_names())})")


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if args.trunc is not None:
        cfg = replace(cfg, truncation=parse_trunc(args.trunc))
    if args.samples is not None or args.seed is not None:
        base = cfg.sampler or SamplerConfig()
        changes = {}
        if args.samples is not None:
            changes["samples"] = args.samples
        if args.seed is not None:
            changes["seed"] = args.seed
        cfg = replace(cfg, sampler=replace(base, **changes))
    return cfg


def _table(rows: list[dict], cols: list[str] | None = None) -> str:
    cols = cols or (list(rows[0]) if rows else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in cols])
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _point_metrics(cmd: str, cfg: RunConfig, with_mc: bool) -> dict:
    sc_ = cfg.scenario
    caches = mt.Caches.build(sc_, cfg.truncation)
    res: dict = {}
    if cmd == "gsop":
        res["exact"] = mt.gsop_exact(sc_, caches)
        res["approx"] = mt.gsop_approx(sc_, caches)
        res["asymptotic"] = mt.gsop_asymptotic(sc_, caches.eve)
    elif cmd == "sop":
        sc1 = sc_.with_(theta=1.0)
        res["exact"] = mt.gsop_exact(sc1, caches)
        res["product_integral"] = mt.sop_product_integral(sc1, caches)
    elif cmd == "afe":
        res["exact"] = mt.afe_exact(sc_, caches)
        res["approx"] = mt.afe_approx(sc_, caches)
    else:
        res["exact"] = mt.ailr_exact(sc_, caches)
        res["approx"] = mt.ailr_approx(sc_, caches)
    if with_mc and cfg.sampler is not None:
        est = estimate_metrics(sc_, cfg.sampler)
        res["monte_carlo"] = est["gsop" if cmd == "gsop" else cmd]
    return {k: asdict(v) for k, v in res.items()}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mftr-secrecy", description="Partial-secrecy metrics for MRC links over MFTR fading.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON scenario file or bundled scenario name")
    p.add_argument("--out", help="CSV output path (default stdout)")
    p.add_argument("--report", help="JSON report output path")
    p.add_argument("--samples", type=int, help="Monte Carlo samples per point")
    p.add_argument("--seed", type=int, help="Monte Carlo seed")
    p.add_argument("--trunc", help="truncation: T or auto[:TOL]")
    p.add_argument("--no-mc", action="store_true", help="skip Monte Carlo")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _apply_overrides(resolve_config(args.config), args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    with_mc = not args.no_mc and cfg.sampler is not None
    cmd = args.command

    if cmd in ("gsop", "afe", "ailr", "sop"):
        _emit(json.dumps(_point_metrics(cmd, cfg, with_mc), indent=2, sort_keys=True) + "\n", args.out)
        return 0

    if cmd in ("sweep", "simulate"):
        if cmd == "simulate" and cfg.sampler is None:
            cfg = replace(cfg, sampler=SamplerConfig())
        report = run_sweep(cfg, with_mc=with_mc or cmd == "simulate")
        if cmd == "simulate":
            cols = ["curve", "gamma_b_db", "gamma_e_db", "rs", "theta"] + MC_COLUMNS + ["status"]
            _emit(_table(report.rows, cols), args.out)
        else:
            _emit(rows_to_csv(report.rows, with_mc=with_mc), args.out)
        if args.report:
            Path(args.report).write_text(report.to_json(), encoding="utf-8")
        return 0 if all(r.get("status") == "ok" for r in report.rows) else 1

    if cmd == "validate":
        if args.no_mc:
            print("validate needs Monte Carlo; drop --no-mc", file=sys.stderr)
            return 2
        if cfg.sampler is None:
            cfg = replace(cfg, sampler=SamplerConfig())
        report = validate(cfg)
        cols = ["curve", "gamma_b_db", "gamma_e_db", "rs", "theta", "gsop_exact", "afe_exact", "ailr_exact"]
        cols += MC_COLUMNS + ["sop_identity_gap", "flags", "status"]
        _emit(_table(report.rows, cols), args.out)
        if args.report:
            Path(args.report).write_text(report.to_json(), encoding="utf-8")
        v = report.verdict
        print(f"validate: {v['flagged']} of {v['points']} points flagged", file=sys.stderr)
        return 0 if v["pass"] else 1

    if cmd == "truncation-report":
        spec = cfg.truncation_report or {}
        T_values = spec.get("T") or list(range(10, 201, 10))
        rows = truncation_table(cfg, [int(t) for t in T_values])
        _emit(_table(rows, ["curve", "T", "a_T1", "r_T1", "bound", "stabilized_at"]), args.out)
        return 0

    # fig5: one panel per overlay (or the base scenario), theta forced to 1
    spec = cfg.figure5 or {}
    overlays = list(cfg.sweep.overlays) if cfg.sweep and cfg.sweep.overlays else [None]
    x = cfg.sweep.values()[0] if cfg.sweep else None
    rows = []
    for o in overlays:
        sc1 = cfg.scenario_for(o, x).with_(theta=1.0)
        panel = figure5_analysis(sc1, spec.get("z"), points=int(spec.get("points", 201)), trunc=cfg.truncation)
        rows += [{"curve": o.name if o else "", **r} for r in panel]
    _emit(_table(rows), args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
