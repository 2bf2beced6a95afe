"""Closed-form baselines, bound bands and exact oracles.

The M/G/1/FCFS queueing time ``rho/(1-rho) * E[S^2]/(2E[S])`` is the
reference every WCFS model is compared against.  A WCFS model's mean
response time sits within constant offsets of it; those offsets depend on
the front size ``n``, the non-idling rate ``b_inf`` and ``rem_sup`` but not
on the load.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .distributions import Moments
from .engine import RunMetrics
from .errors import InfiniteRemSup, UnstableConfig
from .policies import POLICIES, ModelSpec, wcfs_params

SIGMAS = 3.0


def _load(arrival_rate: float, mean: float) -> float:
    rho = arrival_rate * mean
    if rho >= 1.0:
        raise UnstableConfig(f"load rho={rho:.6g} must be below 1")
    if arrival_rate < 0:
        raise ValueError("arrival rate must be nonnegative")
    return rho


def pk_queueing_time(arrival_rate: float, moments: Moments) -> float:
    """Mean M/G/1/FCFS queueing time, lambda * E[S^2] / (2 (1 - rho))."""
    rho = _load(arrival_rate, moments.mean)
    return arrival_rate * moments.second_moment / (2.0 * (1.0 - rho))


def mm1_response(arrival_rate: float, service_rate: float) -> float:
    _load(arrival_rate, 1.0 / service_rate)
    return 1.0 / (service_rate - arrival_rate)


def erlang_c(k: int, offered: float) -> float:
    """Probability of waiting in an M/M/k queue with offered load ``offered``."""
    if offered >= k:
        raise UnstableConfig(f"offered load {offered} needs more than {k} servers")
    b = 1.0
    for i in range(1, k + 1):
        b = offered * b / (i + offered * b)
    util = offered / k
    return b / (1.0 - util * (1.0 - b))


def mmk_oracle(k: int, arrival_rate: float, service_rate_per_job: float) -> float:
    """Mean M/M/k response time with k servers of speed ``1/k`` each.

    A job needing ``1/mu`` units of work takes ``k/mu`` time on one server.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    mu = service_rate_per_job
    _load(arrival_rate, 1.0 / mu)
    server_rate = mu / k
    c = erlang_c(k, arrival_rate / server_rate)
    return c / (k * server_rate - arrival_rate) + 1.0 / server_rate


@dataclass(frozen=True)
class BoundBand:
    """Band ``[baseline + c_lower, baseline + c_upper]`` for the mean response time."""

    rho: float
    baseline_TQ: float
    c_lower: float
    c_upper: float

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.c_lower > self.c_upper:
            raise ValueError("c_lower exceeds c_upper")

    @property
    def lower(self) -> float:
        return self.baseline_TQ + self.c_lower

    @property
    def upper(self) -> float:
        return self.baseline_TQ + self.c_upper

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack


def band_constants(model: ModelSpec) -> tuple[float, float]:
    """``(c_lower, c_upper)`` of a WCFS model."""
    n, b_inf = wcfs_params(model.policy, model)
    r = model.distribution.rem_sup()
    if not math.isfinite(r):
        raise InfiniteRemSup(f"{model.name}: rem_sup is infinite")
    mean = model.distribution.moments().mean
    return -(n - 1) * r + mean, (n - 1) * r + n * mean / b_inf


def theorem2_band(model: ModelSpec, rho: float) -> BoundBand:
    c_lower, c_upper = band_constants(model)
    mom = model.distribution.moments()
    return BoundBand(rho, pk_queueing_time(rho / mom.mean, mom), c_lower, c_upper)


class Estimate(NamedTuple):
    value: float
    ci: float


def delta_pi(metrics: RunMetrics, arrival_rate: float, moments: Moments) -> Estimate:
    """Gap between the simulated mean response time and the M/G/1 queueing time."""
    return Estimate(metrics.mean_T - pk_queueing_time(arrival_rate, moments), metrics.ci_T)


def scaled_response(metrics: RunMetrics, rho: float) -> float:
    return metrics.mean_T * (1.0 - rho)


def scaled_band(band: BoundBand, excess_mean: float) -> tuple[float, float]:
    """The band multiplied by ``1 - rho``, in closed form."""
    rho = band.rho
    return (rho * excess_mean + (1.0 - rho) * band.c_lower,
            rho * excess_mean + (1.0 - rho) * band.c_upper)


def heavy_traffic_gap_bound(band: BoundBand) -> float:
    """Largest possible distance of the scaled response from its limit."""
    return max(abs(band.c_lower), abs(band.c_upper)) * (1.0 - band.rho)


def work_band(model: ModelSpec, rho: float) -> tuple[float, float]:
    """Bounds on mean work in system."""
    n, _ = wcfs_params(model.policy, model)
    mom = model.distribution.moments()
    base = pk_queueing_time(rho / mom.mean, mom)
    return base, base + (n - 1) * model.distribution.rem_sup()


def queueing_band(model: ModelSpec, mean_work: float) -> tuple[float, float]:
    """Bounds on mean queueing time given mean work in system."""
    n, _ = wcfs_params(model.policy, model)
    return mean_work - (n - 1) * model.distribution.rem_sup(), mean_work


def front_time_band(model: ModelSpec) -> tuple[float, float]:
    n, b_inf = wcfs_params(model.policy, model)
    mean = model.distribution.moments().mean
    return mean, n * mean / b_inf


class Check(NamedTuple):
    name: str
    ok: bool
    detail: str


def _rss(*cis: float) -> float:
    return math.sqrt(math.fsum(c * c for c in cis))


def little_law_gap(metrics: RunMetrics) -> float:
    return metrics.mean_N - metrics.arrival_rate * metrics.mean_T


def self_consistency(model: ModelSpec, metrics: RunMetrics, include_work: bool = False) -> list[Check]:
    """Statistical sanity checks applicable to one run.

    Little's law and the busy fraction apply to every model; the front-time
    and queueing-time bands only to WCFS models.
    """
    m = metrics
    lam = m.arrival_rate
    rho = lam * model.distribution.moments().mean
    checks = []

    gap = little_law_gap(m)
    tol = SIGMAS * _rss(m.ci_N, lam * m.ci_T)
    checks.append(Check("little_law", abs(gap) <= tol, f"gap={gap:.4g} tol={tol:.4g}"))

    tol = SIGMAS * m.ci_busy
    checks.append(Check("busy_fraction", abs(m.busy_fraction - rho) <= tol,
                        f"busy={m.busy_fraction:.6g} rho={rho:.6g} tol={tol:.4g}"))

    if not POLICIES[model.policy].wcfs:
        return checks

    lo, hi = front_time_band(model)
    tol = SIGMAS * m.ci_T_F
    checks.append(Check("front_time_band", lo - tol <= m.mean_T_F <= hi + tol,
                        f"T_F={m.mean_T_F:.4g} band=[{lo:.4g}, {hi:.4g}] tol={tol:.4g}"))

    lo, hi = queueing_band(model, m.mean_W)
    tol = SIGMAS * _rss(m.ci_W, m.ci_T_Q)
    checks.append(Check("queueing_band", lo - tol <= m.mean_T_Q <= hi + tol,
                        f"T_Q={m.mean_T_Q:.4g} band=[{lo:.4g}, {hi:.4g}] tol={tol:.4g}"))

    if include_work:
        lo, hi = work_band(model, rho)
        tol = SIGMAS * m.ci_W
        checks.append(Check("work_band", lo - tol <= m.mean_W <= hi + tol,
                            f"W={m.mean_W:.4g} band=[{lo:.4g}, {hi:.4g}] tol={tol:.4g}"))
    return checks
