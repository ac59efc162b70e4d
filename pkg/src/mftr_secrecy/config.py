"""JSON scenario documents: parsing, validation and canonical emission.

SNRs are given in dB at this surface and converted to linear on parsing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

from .metrics import AUTO, AutoT, SecrecyScenario
from .mftr import LinkConfig, MftrParams
from .montecarlo import SamplerConfig

__all__ = [
    "ConfigError",
    "Overlay",
    "RunConfig",
    "SweepSpec",
    "SWEEP_VARIABLES",
    "dump_config",
    "load_config",
    "parse_config",
    "parse_trunc",
]

SWEEP_VARIABLES = ("gamma_b_db", "gamma_e_db", "rs", "theta")
_FADING = ("m", "mu", "sigma2", "K", "delta")
_LINK_KEYS = _FADING + ("L", "gamma_db")
_TOP_KEYS = {"bob", "eve", "rs", "theta", "truncation", "sweep", "sampler", "figure5", "truncation_report", "name"}


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class Overlay:
    """One curve: a name plus overrides of link fields, rs or theta."""

    name: str
    bob: dict = field(default_factory=dict)
    eve: dict = field(default_factory=dict)
    rs: float | None = None
    theta: float | None = None


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    start: float
    stop: float
    step: float
    overlays: tuple[Overlay, ...] = ()

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"variable must be one of {SWEEP_VARIABLES}, got {self.variable!r}")
        if not self.step > 0:
            raise ValueError(f"step must be > 0, got {self.step}")
        if self.start > self.stop:
            raise ValueError(f"start {self.start} exceeds stop {self.stop}")
        names = [o.name for o in self.overlays]
        if len(set(names)) != len(names):
            raise ValueError(f"overlay names must be unique, got {names}")

    def values(self) -> list[float]:
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9))
        return [round(self.start + k * self.step, 12) for k in range(n + 1)]


@dataclass(frozen=True)
class RunConfig:
    scenario: SecrecyScenario
    sweep: SweepSpec | None
    sampler: SamplerConfig | None
    truncation: Any  # int or AutoT
    figure5: dict | None = None
    truncation_report: dict | None = None
    name: str | None = None
    raw_links: dict = field(default_factory=dict, compare=False)

    def scenario_for(self, overlay: Overlay | None, x: float | None = None) -> SecrecyScenario:
        """Scenario with an overlay's overrides and the sweep variable set to x."""
        bob = dict(self.raw_links["bob"])
        eve = dict(self.raw_links["eve"])
        rs, theta = self.scenario.rs, self.scenario.theta
        if overlay is not None:
            bob.update(overlay.bob)
            eve.update(overlay.eve)
            rs = overlay.rs if overlay.rs is not None else rs
            theta = overlay.theta if overlay.theta is not None else theta
        if x is not None and self.sweep is not None:
            var = self.sweep.variable
            if var == "gamma_b_db":
                bob["gamma_db"] = x
            elif var == "gamma_e_db":
                eve["gamma_db"] = x
            elif var == "rs":
                rs = x
            else:
                theta = x
        return SecrecyScenario(_link(bob, "bob"), _link(eve, "eve"), rs, theta)


def parse_trunc(value) -> int | AutoT:
    """50 -> 50; "auto" -> default AutoT; "auto:1e-8" -> AutoT(tol=1e-8)."""
    if isinstance(value, AutoT):
        return value
    if isinstance(value, bool):
        raise ValueError("truncation must be an integer or 'auto[:TOL]'")
    if isinstance(value, int):
        if value < 1:
            raise ValueError(f"truncation T must be >= 1, got {value}")
        return value
    if isinstance(value, str):
        if value == "auto":
            return AUTO
        if value.startswith("auto:"):
            return AutoT(tol=float(value[5:]))
        if value.isdigit():
            return parse_trunc(int(value))
    raise ValueError(f"truncation must be an integer or 'auto[:TOL]', got {value!r}")


def _trunc_text(t) -> int | str:
    if isinstance(t, AutoT):
        return "auto" if t == AUTO else f"auto:{t.tol!r}"
    return t


def _number(d: dict, key: str, path: str, default=None):
    v = d.get(key, default)
    if v is None:
        raise ConfigError(f"{path}.{key}", "required field missing")
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{path}.{key}", f"expected a finite number, got {v!r}")
    return v


def _link(d: dict, path: str) -> LinkConfig:
    if not isinstance(d, dict):
        raise ConfigError(path, "expected an object")
    unknown = set(d) - set(_LINK_KEYS)
    if unknown:
        raise ConfigError(path, f"unknown fields {sorted(unknown)}")
    vals = {k: _number(d, k, path) for k in _LINK_KEYS}
    try:
        params = MftrParams(vals["m"], vals["mu"], vals["sigma2"], vals["K"], vals["delta"])
        return LinkConfig.from_db(params, vals["L"], vals["gamma_db"])
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def _overlay(d: dict, path: str) -> Overlay:
    if not isinstance(d, dict) or "name" not in d:
        raise ConfigError(path, "overlay needs an object with a 'name'")
    unknown = set(d) - {"name", "bob", "eve", "rs", "theta"}
    if unknown:
        raise ConfigError(path, f"unknown fields {sorted(unknown)}")
    for side in ("bob", "eve"):
        bad = set(d.get(side, {})) - set(_LINK_KEYS)
        if bad:
            raise ConfigError(f"{path}.{side}", f"unknown fields {sorted(bad)}")
    return Overlay(str(d["name"]), dict(d.get("bob", {})), dict(d.get("eve", {})), d.get("rs"), d.get("theta"))


def parse_config(doc: dict | str) -> RunConfig:
    """Validate a scenario document and build the run objects."""
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("$", "top level must be an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError("$", f"unknown fields {sorted(unknown)}")
    for side in ("bob", "eve"):
        if side not in doc:
            raise ConfigError(f"$.{side}", "required field missing")
    bob, eve = _link(doc["bob"], "$.bob"), _link(doc["eve"], "$.eve")
    rs = _number(doc, "rs", "$", 1.0)
    theta = _number(doc, "theta", "$", 1.0)
    try:
        scenario = SecrecyScenario(bob, eve, rs, theta)
    except ValueError as exc:
        raise ConfigError("$", str(exc)) from None
    try:
        trunc = parse_trunc(doc.get("truncation", "auto"))
    except ValueError as exc:
        raise ConfigError("$.truncation", str(exc)) from None

    sweep = None
    if "sweep" in doc:
        s = doc["sweep"]
        if not isinstance(s, dict):
            raise ConfigError("$.sweep", "expected an object")
        overlays = tuple(_overlay(o, f"$.sweep.overlays[{k}]") for k, o in enumerate(s.get("overlays", [])))
        try:
            sweep = SweepSpec(
                s.get("variable", "gamma_b_db"),
                _number(s, "start", "$.sweep"),
                _number(s, "stop", "$.sweep"),
                _number(s, "step", "$.sweep", 1.0),
                overlays,
            )
        except ValueError as exc:
            raise ConfigError("$.sweep", str(exc)) from None

    sampler = None
    if "sampler" in doc:
        try:
            sampler = SamplerConfig(**doc["sampler"])
        except (TypeError, ValueError) as exc:
            raise ConfigError("$.sampler", str(exc)) from None

    raw = {side: {k: doc[side][k] for k in _LINK_KEYS} for side in ("bob", "eve")}
    return RunConfig(
        scenario,
        sweep,
        sampler,
        trunc,
        doc.get("figure5"),
        doc.get("truncation_report"),
        doc.get("name"),
        raw,
    )


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: RunConfig) -> str:
    """Canonical JSON text; parse_config(dump_config(c)) == c."""
    doc: dict[str, Any] = {}
    if cfg.name is not None:
        doc["name"] = cfg.name
    doc["bob"] = dict(cfg.raw_links["bob"])
    doc["eve"] = dict(cfg.raw_links["eve"])
    doc["rs"] = cfg.scenario.rs
    doc["theta"] = cfg.scenario.theta
    doc["truncation"] = _trunc_text(cfg.truncation)
    if cfg.sweep is not None:
        s = cfg.sweep
        overlays = []
        for o in s.overlays:
            od: dict[str, Any] = {"name": o.name}
            if o.bob:
                od["bob"] = dict(o.bob)
            if o.eve:
                od["eve"] = dict(o.eve)
            if o.rs is not None:
                od["rs"] = o.rs
            if o.theta is not None:
                od["theta"] = o.theta
            overlays.append(od)
        doc["sweep"] = {"variable": s.variable, "start": s.start, "stop": s.stop, "step": s.step, "overlays": overlays}
    if cfg.sampler is not None:
        sp = cfg.sampler
        doc["sampler"] = {"strategy": sp.strategy, "samples": sp.samples, "seed": sp.seed, "batch": sp.batch}
        if sp.workers is not None:
            doc["sampler"]["workers"] = sp.workers
    if cfg.figure5 is not None:
        doc["figure5"] = cfg.figure5
    if cfg.truncation_report is not None:
        doc["truncation_report"] = cfg.truncation_report
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
