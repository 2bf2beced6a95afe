"""Scheduling policies and model descriptions.

A policy maps the scheduler-visible part of the system to service rates
(total capacity is normalized to 1).  WCFS policies only look at the front:
the ``n`` oldest jobs, each with its class and age.  Comparison policies
outside the class may be granted an omniscient view of every job,
including remaining sizes and queue length.
"""
from __future__ import annotations

import math
from collections import namedtuple
from dataclasses import dataclass, field
from typing import ClassVar, Sequence

from . import packing
from .distributions import JointDiscrete, SizeClassDistribution
from .errors import InvalidRequirement, NonWcfs, PolicyViolation, UnknownClassAttribute

JobView = namedtuple("JobView", "id cls age remaining")


class PolicyView:
    """What a policy is allowed to see at one decision epoch."""

    __slots__ = ("front", "_queue_length", "_omniscient")

    def __init__(self, front: Sequence[JobView], queue_length: int = 0, omniscient: bool = False):
        self.front = tuple(front)
        self._queue_length = queue_length
        self._omniscient = omniscient

    @property
    def queue_length(self) -> int:
        if not self._omniscient:
            raise PolicyViolation("limited-view policy tried to read the queue length")
        return self._queue_length


def view_of(classes: Sequence, ages: Sequence[float] | None = None, ids: Sequence[int] | None = None,
            remaining: Sequence[float] | None = None, queue_length: int = 0,
            omniscient: bool = False) -> PolicyView:
    """Build a view from parallel lists; handy in tests and the CLI."""
    m = len(classes)
    ids = list(range(1, m + 1)) if ids is None else ids
    ages = [0.0] * m if ages is None else ages
    rem = [None] * m if remaining is None else remaining
    return PolicyView([JobView(i, c, a, r) for i, c, a, r in zip(ids, classes, ages, rem)],
                      queue_length, omniscient)


def _servers(job: JobView) -> int:
    v = job.cls.servers
    if v is None:
        raise UnknownClassAttribute(f"job {job.id} has no server requirement")
    return v


def _threshold(job: JobView) -> int:
    t = job.cls.threshold
    if t is None:
        raise UnknownClassAttribute(f"job {job.id} has no parallelism threshold")
    return t


@dataclass
class ModelSpec:
    """One queueing model: policy, servers and the joint size/class law.

    ``n`` and ``b_inf`` are derived from the policy when left unset; a
    mismatching explicit value is rejected.
    """

    policy: str
    distribution: SizeClassDistribution
    k: int = 1
    server_speeds: tuple[float, ...] | None = None
    mpl: int | None = None
    assignment: str = "fastest"
    name: str | None = None
    n: int | None = None
    b_inf: float | None = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {sorted(POLICIES)}")
        if self.server_speeds is not None:
            self.server_speeds = tuple(float(s) for s in self.server_speeds)
            if any(s <= 0 for s in self.server_speeds):
                raise ValueError("server speeds must be positive")
            if abs(math.fsum(self.server_speeds) - 1.0) > 1e-12:
                raise ValueError(f"server speeds sum to {math.fsum(self.server_speeds)!r}, not 1")
            self.k = len(self.server_speeds)
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.assignment not in ("fastest", "slowest"):
            raise ValueError(f"assignment must be 'fastest' or 'slowest', got {self.assignment!r}")
        pol = make_policy(self)
        if pol.wcfs:
            n, b_inf = pol.n, pol.b_inf
            if self.n is not None and self.n != n:
                raise ValueError(f"declared n={self.n} but {self.policy} has n={n}")
            if self.b_inf is not None and abs(self.b_inf - b_inf) > 1e-12:
                raise ValueError(f"declared b_inf={self.b_inf} but {self.policy} has b_inf={b_inf}")
            self.n, self.b_inf = n, b_inf
        self._check_classes()
        if self.name is None:
            self.name = self.policy

    def _check_classes(self):
        if not self.policy.startswith("msj_") and not self.policy.startswith("threshold_"):
            return
        if not isinstance(self.distribution, JointDiscrete):
            raise ValueError(f"{self.policy} needs a joint size/class distribution")
        for cls in self.distribution.classes:
            if self.policy.startswith("msj_"):
                v = cls.servers
                if v is None:
                    raise UnknownClassAttribute("multiserver-job classes need a server requirement")
                if v < 1 or v > self.k:
                    raise InvalidRequirement(f"requirement {v} outside [1, {self.k}]")
                if self.policy == "msj_serverfilling" and not (
                        packing.is_power_of_two(v) and packing.is_power_of_two(self.k)):
                    raise InvalidRequirement("ServerFilling needs power-of-2 requirements and k")
                if self.policy == "msj_divisorfilling" and self.k % v:
                    raise InvalidRequirement(f"requirement {v} does not divide k={self.k}")
            else:
                t = cls.threshold
                if t is None:
                    raise UnknownClassAttribute("threshold-parallel classes need a threshold")
                if t < 1 or t > self.k:
                    raise InvalidRequirement(f"threshold {t} outside [1, {self.k}]")

    @property
    def speeds(self) -> tuple[float, ...]:
        if self.server_speeds is not None:
            return self.server_speeds
        return (1.0 / self.k,) * self.k


class Policy:
    """Base class.  Subclasses set the class attributes and ``allocate``."""

    name: ClassVar[str]
    wcfs: ClassVar[bool] = True
    omniscient: ClassVar[bool] = False
    # True when the allocation can change while the front's membership does not.
    state_dependent: ClassVar[bool] = False
    # True when the allocation depends on nothing but the front's classes in
    # arrival order, so it can be memoized per class sequence.
    class_only: ClassVar[bool] = True

    def __init__(self, model: ModelSpec):
        self.model = model
        self.k = model.k

    @property
    def n(self) -> int | None:
        """Front size; None means every job in the system is visible."""
        return self.k

    @property
    def b_inf(self) -> float:
        return 1.0 / self.k

    def allocate(self, view: PolicyView) -> dict[int, float]:
        raise NotImplementedError

    def prefix_weight(self, cls) -> int | None:
        """Weight of a job class for prefix memoization.

        When not None, the allocation depends only on the shortest front
        prefix whose weights sum to at least ``k``.
        """
        return None


class HeterogeneousFCFS(Policy):
    """FCFS over servers of unequal speed, preemptively re-sorted at every event.

    The i-th oldest job sits on the i-th fastest server (or slowest, with
    ``assignment="slowest"``).
    """

    name = "het_mgk_fcfs"

    def __init__(self, model):
        super().__init__(model)
        self.order = tuple(sorted(model.speeds, reverse=model.assignment == "fastest"))

    @property
    def b_inf(self):
        return min(self.order)

    def allocate(self, view):
        return {job.id: speed for job, speed in zip(view.front, self.order)}


class LimitedProcessorSharing(Policy):
    name = "lps"

    @property
    def n(self):
        if not self.model.mpl or self.model.mpl < 1:
            raise ValueError("lps needs a positive mpl")
        return self.model.mpl

    @property
    def b_inf(self):
        return 1.0

    def allocate(self, view):
        if not view.front:
            return {}
        share = 1.0 / len(view.front)
        return {job.id: share for job in view.front}


def _threshold_fill(k: int, jobs) -> dict[int, float]:
    free, rates = k, {}
    for job in jobs:
        if free == 0:
            break
        q = min(_threshold(job), free)
        rates[job.id] = q / k
        free -= q
    return rates


class ThresholdFCFS(Policy):
    name = "threshold_fcfs"

    def prefix_weight(self, cls):
        return cls.threshold

    def allocate(self, view):
        return _threshold_fill(self.k, view.front)


class ServerFilling(Policy):
    name = "msj_serverfilling"

    def prefix_weight(self, cls):
        return cls.servers

    def allocate(self, view):
        need = {job.id: _servers(job) for job in view.front}
        chosen = packing.server_filling_select(self.k, need.items())
        return {i: need[i] / self.k for i in chosen}


class DivisorFilling(Policy):
    name = "msj_divisorfilling"

    def allocate(self, view):
        need = {job.id: _servers(job) for job in view.front}
        chosen = packing.divisor_filling_select(self.k, need.items())
        return {i: need[i] / self.k for i in chosen}


def _blocking_fill(k: int, jobs) -> dict[int, float]:
    """Serve in the given order, idling the rest once a job does not fit."""
    free, rates = k, {}
    for job in jobs:
        v = _servers(job)
        if v > free:
            break
        rates[job.id] = v / k
        free -= v
    return rates


class NonWcfsPolicy(Policy):
    wcfs = False
    class_only = False

    @property
    def n(self):
        return None

    @property
    def b_inf(self):
        raise NonWcfs(f"{self.name} is not a WCFS policy")


class MultiserverFCFS(NonWcfsPolicy):
    """Head-of-line blocking FCFS: finite-skip with n=k but not work conserving."""

    name = "msj_fcfs"
    class_only = True

    @property
    def n(self):
        return self.k

    def allocate(self, view):
        return _blocking_fill(self.k, view.front)


class GroupPolicy(NonWcfsPolicy):
    """Priority policy over groups of interchangeable jobs.

    Jobs are grouped by one class attribute; within a group the oldest jobs
    are served first.  The allocation is a function of the group sizes only,
    which lets the simulator skip building a view of every job.
    """

    omniscient = True
    # Group sizes beyond this do not change the allocation (None: unbounded).
    count_cap: ClassVar[int | None] = None

    def group_key(self, job) -> int:
        """Grouping attribute of a job (anything with ``id`` and ``cls``)."""
        raise NotImplementedError

    def allocate_groups(self, keys: tuple, counts: tuple) -> tuple[tuple[float, ...], ...]:
        """Rates of the oldest jobs of each group, one tuple per group."""
        raise NotImplementedError

    def allocate(self, view):
        groups: dict[int, list] = {}
        for job in view.front:
            groups.setdefault(self.group_key(job), []).append(job.id)
        keys = tuple(groups)
        rates = self.allocate_groups(keys, tuple(len(ids) for ids in groups.values()))
        return {i: r for ids, rs in zip(groups.values(), rates) for i, r in zip(ids, rs)}


def _fill_groups(k: int, keys, counts, order, need, blocking: bool):
    """Walk groups in ``order``, giving each job ``need(key)`` servers."""
    out = [()] * len(keys)
    free = k
    for g in order:
        want = need(keys[g])
        rates = []
        for _ in range(counts[g]):
            if free == 0 or (blocking and want > free):
                break
            q = min(want, free)
            rates.append(q / k)
            free -= q
        out[g] = tuple(rates)
        if free == 0 or (blocking and len(rates) < counts[g]):
            break
    return tuple(out)


class _MsjGroups(GroupPolicy):
    def group_key(self, job):
        return _servers(job)

    @property
    def count_cap(self):
        return self.k


class LeastServersFirst(_MsjGroups):
    name = "msj_least_servers_first"

    def allocate_groups(self, keys, counts):
        order = sorted(range(len(keys)), key=lambda g: keys[g])
        return _fill_groups(self.k, keys, counts, order, lambda v: v, blocking=True)


class MostServersFirst(_MsjGroups):
    name = "msj_most_servers_first"

    def allocate_groups(self, keys, counts):
        order = sorted(range(len(keys)), key=lambda g: -keys[g])
        return _fill_groups(self.k, keys, counts, order, lambda v: v, blocking=True)


class MaxWeight(_MsjGroups):
    name = "msj_maxweight"

    @property
    def count_cap(self):
        # The objective weighs every job in the system.
        return None

    def allocate_groups(self, keys, counts):
        z = packing.maxweight_select(self.k, dict(zip(keys, counts)))
        return tuple((v / self.k,) * z.get(v, 0) for v in keys)


class MultiserverSRPT(NonWcfsPolicy):
    """k servers of speed 1/k serving the jobs of least remaining size."""

    name = "mgk_srpt"
    omniscient = True
    state_dependent = True

    def allocate(self, view):
        jobs = view.front
        if len(jobs) > self.k:
            jobs = sorted(jobs, key=lambda j: j.remaining)[: self.k]
        share = 1.0 / self.k
        return {job.id: share for job in jobs}


class _ThresholdGroups(GroupPolicy):
    def group_key(self, job):
        return _threshold(job)

    @property
    def count_cap(self):
        return self.k


class ElasticFirst(_ThresholdGroups):
    """Preemptive priority to larger parallelism thresholds."""

    name = "threshold_elastic_first"

    def allocate_groups(self, keys, counts):
        order = sorted(range(len(keys)), key=lambda g: -keys[g])
        return _fill_groups(self.k, keys, counts, order, lambda t: t, blocking=False)


class InelasticFirst(_ThresholdGroups):
    """Preemptive priority to smaller parallelism thresholds."""

    name = "threshold_inelastic_first"

    def allocate_groups(self, keys, counts):
        order = sorted(range(len(keys)), key=lambda g: keys[g])
        return _fill_groups(self.k, keys, counts, order, lambda t: t, blocking=False)


POLICIES: dict[str, type[Policy]] = {
    cls.name: cls
    for cls in (
        HeterogeneousFCFS, LimitedProcessorSharing, ThresholdFCFS, ServerFilling, DivisorFilling,
        MultiserverFCFS, LeastServersFirst, MostServersFirst, MaxWeight, MultiserverSRPT,
        ElasticFirst, InelasticFirst,
    )
}

WCFS_POLICIES = tuple(name for name, cls in POLICIES.items() if cls.wcfs)
NON_WCFS_POLICIES = tuple(name for name, cls in POLICIES.items() if not cls.wcfs)


def make_policy(model: ModelSpec) -> Policy:
    return POLICIES[model.policy](model)


def allocate(policy: Policy, view: PolicyView) -> dict[int, float]:
    return policy.allocate(view)


def wcfs_params(policy: Policy | str, model: ModelSpec) -> tuple[int, float]:
    """Front size ``n`` and minimum busy rate ``b_inf`` of a WCFS model."""
    pol = make_policy(model) if isinstance(policy, str) else policy
    if not pol.wcfs:
        raise NonWcfs(f"{pol.name} is not a WCFS policy")
    return pol.n, pol.b_inf


def check_allocation(policy: Policy, rates: dict[int, float], front_ids, n_system: int) -> float:
    """Validate an allocation and return its total rate.

    Raises :class:`PolicyViolation` on capacity overflow, on service outside
    the front, and (for WCFS policies) on a failure of work conservation or
    non-idling.
    """
    total = math.fsum(rates.values())
    if total > 1.0 + 1e-12:
        raise PolicyViolation(f"{policy.name}: total rate {total!r} exceeds 1")
    for job_id, r in rates.items():
        if job_id not in front_ids:
            raise PolicyViolation(f"{policy.name}: served job {job_id} outside the front")
        if not 0.0 <= r <= 1.0:
            raise PolicyViolation(f"{policy.name}: rate {r!r} outside [0, 1]")
    if policy.wcfs:
        if n_system >= policy.n and abs(total - 1.0) > 1e-9:
            raise PolicyViolation(f"{policy.name}: front full but total rate is {total!r}")
        if n_system >= 1 and total < policy.b_inf - 1e-9:
            raise PolicyViolation(f"{policy.name}: total rate {total!r} below b_inf={policy.b_inf}")
    return total
