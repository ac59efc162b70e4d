"""Monte Carlo oracle built from the physical MFTR composition.

Samples are drawn in fixed-size batches.  Batch b of a run uses a Philox
stream keyed by (seed, channel hash) with its counter's top word set to b,
so every sample is fixed by (seed, channel, batch size, index) and the
estimates do not depend on how batches are spread over workers.
"""
from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .metrics import MetricResult, SecrecyScenario
from .mftr import LinkConfig, MftrParams

__all__ = [
    "STRATEGIES",
    "SamplerConfig",
    "channel_key",
    "estimate_metrics",
    "fractional_equivocation",
    "sample_normalized_power",
    "sample_snr",
    "solve_ray_amplitudes",
    "worker_count",
]

STRATEGIES = ("conditional_chi2", "physical_rays")
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SamplerConfig:
    strategy: str = "conditional_chi2"
    samples: int = 10_000_000
    seed: int = 0
    batch: int = 1 << 20
    workers: int | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        for name in ("samples", "batch"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v}")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")
        if self.workers is not None and self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


def worker_count(cfg: SamplerConfig | None = None) -> int:
    env = os.environ.get("MFTR_THREADS")
    if env:
        return max(1, int(env))
    if cfg is not None and cfg.workers:
        return cfg.workers
    return os.cpu_count() or 1


def solve_ray_amplitudes(p: MftrParams) -> tuple[float, float, np.ndarray]:
    """(V1, V2, U_2..U_mu) meeting the total-power and similarity constraints."""
    ps = p.specular_power
    if p.mu >= 2:
        v = math.sqrt(p.delta * ps / 2.0)
        u = np.full(p.mu - 1, math.sqrt(ps * (1.0 - p.delta) / (p.mu - 1)))
        return v, v, u
    s = math.sqrt(ps * (1.0 + p.delta))
    d = math.sqrt(max(ps * (1.0 - p.delta), 0.0))
    return (s + d) / 2.0, (s - d) / 2.0, np.empty(0)


def sample_normalized_power(p: MftrParams, n: int, rng: np.random.Generator, strategy: str = "conditional_chi2") -> np.ndarray:
    """n draws of |alpha|^2 / Omega for one branch."""
    s2 = p.sigma2
    g = rng.gamma(p.m, 1.0 / p.m, n)
    if strategy == "conditional_chi2":
        th = rng.uniform(0.0, 2.0 * np.pi, n)
        nc = g * p.specular_power * (1.0 + p.delta * np.cos(th)) / s2
        power = s2 * rng.noncentral_chisquare(2 * p.mu, nc, n)
    elif strategy == "physical_rays":
        v1, v2, u = solve_ray_amplitudes(p)
        sg = np.sqrt(g)
        diffuse = rng.normal(0.0, math.sqrt(s2), (p.mu, 2, n))
        ph = rng.uniform(0.0, 2.0 * np.pi, (2, n))
        re = sg * (v1 * np.cos(ph[0]) + v2 * np.cos(ph[1])) + diffuse[0, 0]
        im = sg * (v1 * np.sin(ph[0]) + v2 * np.sin(ph[1])) + diffuse[0, 1]
        power = re * re + im * im
        if p.mu > 1:
            psi = rng.uniform(0.0, 2.0 * np.pi, (p.mu - 1, n))
            re = sg * u[:, None] * np.cos(psi) + diffuse[1:, 0]
            im = sg * u[:, None] * np.sin(psi) + diffuse[1:, 1]
            power = power + (re * re + im * im).sum(axis=0)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return power / p.mean_power


def sample_snr(link: LinkConfig, n: int, rng: np.random.Generator, strategy: str = "conditional_chi2") -> np.ndarray:
    """MRC output SNR: gamma_bar times the sum of L normalized branch powers."""
    tot = np.zeros(n)
    for _ in range(link.L):
        tot += sample_normalized_power(link.params, n, rng, strategy)
    return link.gamma_bar * tot


def fractional_equivocation(phi: np.ndarray, rs: float) -> np.ndarray:
    """Lambda per sample: 0 below Phi = 1, 1 above Phi = 2^Rs, log2(Phi)/Rs between."""
    return np.clip(np.log2(np.maximum(phi, 1.0)) / rs, 0.0, 1.0)


def channel_key(sc_: SecrecyScenario) -> int:
    """64-bit digest of the random part of a scenario (both links)."""
    text = repr((sc_.bob, sc_.eve)).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def _batch_rng(seed: int, key: int, b: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, key], counter=[0, 0, 0, b]))


def _run_batch(sc_: SecrecyScenario, cfg: SamplerConfig, key: int, b: int) -> tuple:
    n = min(cfg.batch, cfg.samples - b * cfg.batch)
    rng = _batch_rng(cfg.seed, key, b)
    psi_b = sample_snr(sc_.bob, n, rng, cfg.strategy)
    psi_e = sample_snr(sc_.eve, n, rng, cfg.strategy)
    phi = (1.0 + psi_b) / (1.0 + psi_e)
    lam = fractional_equivocation(phi, sc_.rs)
    return (
        n,
        int(np.count_nonzero(lam < sc_.theta)),
        int(np.count_nonzero(lam < 1.0)),
        float(lam.sum()),
        float((lam * lam).sum()),
    )


def estimate_metrics(sc_: SecrecyScenario, cfg: SamplerConfig = SamplerConfig()) -> dict[str, MetricResult]:
    """GSOP, SOP, AFE and AILR estimates with standard errors."""
    key = channel_key(sc_)
    n_batches = -(-cfg.samples // cfg.batch)
    workers = min(worker_count(cfg), n_batches)
    if workers == 1:
        parts = [_run_batch(sc_, cfg, key, b) for b in range(n_batches)]
    else:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda b: _run_batch(sc_, cfg, key, b), range(n_batches)))
    n = sum(p[0] for p in parts)
    hits_g = sum(p[1] for p in parts)
    hits_s = sum(p[2] for p in parts)
    s1 = math.fsum(p[3] for p in parts)
    s2 = math.fsum(p[4] for p in parts)
    gsop, sop, afe = hits_g / n, hits_s / n, s1 / n
    var = max(s2 / n - afe * afe, 0.0) * n / max(n - 1, 1)
    se_afe = math.sqrt(var / n)

    def mc(value, se):
        return MetricResult(value, "monte_carlo", None, se)

    return {
        "gsop": mc(gsop, math.sqrt(gsop * (1.0 - gsop) / n)),
        "sop": mc(sop, math.sqrt(sop * (1.0 - sop) / n)),
        "afe": mc(afe, se_afe),
        "ailr": mc((1.0 - afe) * sc_.rs, se_afe * sc_.rs),
    }
