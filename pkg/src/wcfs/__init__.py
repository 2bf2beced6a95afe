"""Simulation and analysis of work-conserving finite-skip multiserver queues."""
from .distributions import (
    Atom, Deterministic, Exponential, Hyperexponential, JobClass, JointDiscrete, Moments, Pareto,
    hyperexp, moments, multiserver_jobs, rem_sup, sample, threshold_jobs, unit_mean_hyperexp,
)
from .engine import RunMetrics, simulate
from .policies import ModelSpec, allocate, make_policy, wcfs_params

__all__ = [
    "Atom", "Deterministic", "Exponential", "Hyperexponential", "JobClass", "JointDiscrete",
    "Moments", "Pareto", "hyperexp", "moments", "multiserver_jobs", "rem_sup", "sample",
    "threshold_jobs", "unit_mean_hyperexp", "RunMetrics", "simulate", "ModelSpec", "allocate",
    "make_policy", "wcfs_params",
]
