"""Discrete-event simulation of the physical two-orbit system.

The simulator works in original coordinates and knows nothing about the
transformed chain or the compensation series.  In every state the competing
exponential clocks are: arrivals (``lam``), service (``mu``, busy server only)
and one retrial clock of rate ``alpha`` per non-empty orbit, active only while
the server is idle.  Suppressing retrial clocks during service is equivalent in
law to simulating failed retrials, by memorylessness.

Random draws per event, in order: holding time, event selector, and the JSQ
tie-break coin (only when a blocked arrival finds equal orbits).  Replication
``r`` is seeded from ``SeedSequence(seed).spawn(replications)[r]``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np
from scipy.stats import norm

from .errors import RetrialError
from .model import ModelParams


@dataclass(frozen=True)
class SimConfig:
    params: ModelParams
    horizon: float
    warmup: float = 0.0
    replications: int = 10
    seed: int = 0

    def __post_init__(self):
        if not (self.horizon > self.warmup >= 0.0):
            raise ValueError("need horizon > warmup >= 0")
        if self.replications < 1:
            raise ValueError("need at least one replication")


@numba.njit(cache=True, nogil=True)
def _run(lam, mu, alpha, horizon, warmup, seed, m_max, n_max):  # pragma: no cover - compiled
    np.random.seed(seed)
    occ = np.zeros((m_max + 1, n_max + 1, 2))
    orig = np.zeros((m_max + n_max + 1, m_max + n_max + 1, 2))
    lim = m_max + n_max
    area_q1 = 0.0
    area_q2 = 0.0
    area_busy = 0.0
    joins = 0
    successes = 0
    q1 = 0
    q2 = 0
    busy = 0
    t = 0.0
    bad = False
    while True:
        if busy == 1:
            rate = lam + mu
        else:
            rate = lam + alpha * ((q1 > 0) + (q2 > 0))
        dt = np.random.exponential(1.0 / rate)
        if not np.isfinite(dt):
            bad = True
            break
        lo = max(t, warmup)
        hi = min(t + dt, horizon)
        if hi > lo:
            w = hi - lo
            m = min(q1, q2)
            n = abs(q1 - q2)
            if m <= m_max and n <= n_max:
                occ[m, n, busy] += w
            if q1 <= lim and q2 <= lim:
                orig[q1, q2, busy] += w
            area_q1 += w * q1
            area_q2 += w * q2
            area_busy += w * busy
        t += dt
        if t >= horizon:
            break
        counting = t > warmup
        u = np.random.random() * rate
        if busy == 1:
            if u < mu:
                busy = 0
            else:
                if q1 < q2:
                    q1 += 1
                elif q2 < q1:
                    q2 += 1
                elif np.random.random() < 0.5:
                    q1 += 1
                else:
                    q2 += 1
                if counting:
                    joins += 1
        else:
            busy = 1
            if u >= lam:
                if q1 > 0 and u < lam + alpha:
                    q1 -= 1
                else:
                    q2 -= 1
                if counting:
                    successes += 1
    span = horizon - warmup
    stats = np.array([area_q1 / span, area_q2 / span, area_busy / span, joins / span, successes / span, q1 + q2])
    return occ / span, orig / span, stats, bad


@dataclass(frozen=True)
class SimEstimate:
    """Replication means, standard errors and normal-approximation half-widths."""

    confidence: float
    replications: int
    q: np.ndarray  # (m_max + 1, n_max + 1, 2), transformed coordinates
    q_stderr: np.ndarray
    q_halfwidth: np.ndarray
    orig: np.ndarray  # (L + 1, L + 1, 2) with L = m_max + n_max, original coordinates
    orig_stderr: np.ndarray
    P_busy: float
    P_busy_halfwidth: float
    mean_orbit1: float
    mean_orbit2: float
    mean_total_orbit: float
    mean_total_orbit_halfwidth: float
    join_rate: float
    join_rate_stderr: float
    success_rate: float
    success_rate_stderr: float
    final_orbit_total: float
    stable: bool

    def z(self, level: float | None = None) -> float:
        return float(norm.ppf(0.5 + 0.5 * (self.confidence if level is None else level)))

    def interval(self, m: int, n: int, k: int, level: float | None = None) -> tuple[float, float]:
        hw = self.z(level) * self.q_stderr[m, n, k]
        return self.q[m, n, k] - hw, self.q[m, n, k] + hw

    def busy_interval(self, level: float | None = None) -> tuple[float, float]:
        hw = self.P_busy_halfwidth * self.z(level) / self.z()
        return self.P_busy - hw, self.P_busy + hw


def _stderr(samples: np.ndarray) -> np.ndarray:
    if samples.shape[0] < 2:
        return np.zeros(samples.shape[1:])
    return samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])


def replication_seeds(seed: int, replications: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(replications)
    return [int(c.generate_state(1)[0]) for c in children]


def simulate(config: SimConfig, box: tuple[int, int], confidence: float = 0.95, workers: int | None = None) -> SimEstimate:
    m_max, n_max = box
    p = config.params
    seeds = replication_seeds(config.seed, config.replications)

    def one(s):
        return _run(p.lam, p.mu, p.alpha, float(config.horizon), float(config.warmup), s, m_max, n_max)

    if workers and workers > 1 and config.replications > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(one, seeds))
    else:
        runs = [one(s) for s in seeds]
    if any(r[3] for r in runs):
        raise RetrialError("non-finite clock draw in simulation")

    occ = np.stack([r[0] for r in runs])
    orig = np.stack([r[1] for r in runs])
    stats = np.stack([r[2] for r in runs])
    z = float(norm.ppf(0.5 + 0.5 * confidence))
    occ_se = _stderr(occ)
    stats_se = _stderr(stats)
    total = stats[:, 0] + stats[:, 1]
    total_se = float(_stderr(total[:, None])[0])
    return SimEstimate(
        confidence=confidence,
        replications=config.replications,
        q=occ.mean(axis=0),
        q_stderr=occ_se,
        q_halfwidth=z * occ_se,
        orig=orig.mean(axis=0),
        orig_stderr=_stderr(orig),
        P_busy=float(stats[:, 2].mean()),
        P_busy_halfwidth=float(z * stats_se[2]),
        mean_orbit1=float(stats[:, 0].mean()),
        mean_orbit2=float(stats[:, 1].mean()),
        mean_total_orbit=float(total.mean()),
        mean_total_orbit_halfwidth=z * total_se,
        join_rate=float(stats[:, 3].mean()),
        join_rate_stderr=float(stats_se[3]),
        success_rate=float(stats[:, 4].mean()),
        success_rate_stderr=float(stats_se[4]),
        final_orbit_total=float(stats[:, 5].mean()),
        stable=p.rho < 1.0,
    )
