"""Event-driven simulation of finite-skip multiserver models.

Jobs arrive as a Poisson process and are split into the *front* (the ``n``
oldest jobs) and the *queue*.  Between events every service rate is
constant, so the next event is the earlier of the next arrival and the
first completion at current rates.  The policy is consulted whenever its
input may have changed; service is preempt-resume.

Metrics are collected for every job that arrives within the horizon.  After
the last arrival the system drains without further arrivals.  Confidence
intervals use 32 non-overlapping batch means, batched by arrival index.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import asdict, dataclass
from functools import lru_cache

from scipy import stats

from .distributions import make_rng
from .errors import InfiniteRemSup, OvershootError, UnstableConfig
from .policies import GroupPolicy, JobView, ModelSpec, Policy, PolicyView, check_allocation, make_policy

COMPLETION_EPS = 1e-9
NUM_BATCHES = 32
SAMPLE_BLOCK = 8192

STREAM_ARRIVALS = 0
STREAM_SIZES = 1


class Job:
    __slots__ = ("id", "arrival", "size", "remaining", "cls", "ci", "front_entry", "front_lo")

    def __init__(self, id, arrival, size, cls, ci=0):
        self.id = id
        self.ci = ci
        self.arrival = arrival
        self.size = size
        self.remaining = size
        self.cls = cls
        self.front_entry = math.nan
        self.front_lo = 0.0

    @property
    def age(self) -> float:
        return self.size - self.remaining

    def __repr__(self):
        return f"Job(id={self.id}, size={self.size:.4g}, remaining={self.remaining:.4g})"


@dataclass(frozen=True)
class RunMetrics:
    mean_T: float
    ci_T: float
    mean_T_Q: float
    ci_T_Q: float
    mean_T_F: float
    ci_T_F: float
    mean_N: float
    ci_N: float
    mean_W: float
    ci_W: float
    busy_fraction: float
    ci_busy: float
    completed_count: int
    simulated_arrivals: int
    arrival_rate: float
    horizon: float

    def as_dict(self) -> dict:
        return asdict(self)


@lru_cache(maxsize=None)
def _t_quantile(dof: int) -> float:
    return float(stats.t.ppf(0.975, dof))


def batch_ci(batch_means) -> float:
    """95% half-width from a list of batch means."""
    b = len(batch_means)
    if b < 2:
        return math.nan
    m = math.fsum(batch_means) / b
    var = math.fsum((x - m) ** 2 for x in batch_means) / (b - 1)
    return _t_quantile(b - 1) * math.sqrt(var / b)


class _Kahan:
    __slots__ = ("total", "comp")

    def __init__(self):
        self.total = 0.0
        self.comp = 0.0

    def add(self, x):
        y = x - self.comp
        t = self.total + y
        self.comp = (t - self.total) - y
        self.total = t


class SystemState:
    """Jobs in the system plus the running time integrals.

    ``integrate`` switches the time integrals on or off; ``batch`` selects
    which batch the current interval is charged to.
    """

    def __init__(self, n: int | None, num_batches: int = NUM_BATCHES):
        self.clock = 0.0
        self.n = n
        self.front: list[Job] = []
        self.queue: deque[Job] = deque()
        self.work = 0.0
        self.integrate = True
        self.batch = 0
        self.int_n = [_Kahan() for _ in range(num_batches)]
        self.int_w = [_Kahan() for _ in range(num_batches)]
        self.int_b = [_Kahan() for _ in range(num_batches)]
        self.duration = [_Kahan() for _ in range(num_batches)]

    @property
    def num_jobs(self) -> int:
        return len(self.front) + len(self.queue)

    @property
    def front_work(self) -> float:
        return math.fsum(j.remaining for j in self.front)

    @property
    def queue_work(self) -> float:
        return math.fsum(j.remaining for j in self.queue)

    def admit(self, job: Job) -> bool:
        """Add an arriving job; True if it entered the front."""
        self.work += job.size
        if self.n is None or len(self.front) < self.n:
            job.front_entry = self.clock
            self.front.append(job)
            return True
        self.queue.append(job)
        return False

    def refill(self) -> None:
        while self.queue and (self.n is None or len(self.front) < self.n):
            job = self.queue.popleft()
            job.front_entry = self.clock
            self.front.append(job)

    def advance_served(self, served, total_rate: float, dt: float) -> None:
        """Age the served ``(job, rate)`` pairs for ``dt`` time units."""
        if dt < 0:
            raise ValueError(f"negative time step {dt!r}")
        if self.integrate and dt > 0:
            b = self.batch
            self.int_n[b].add((len(self.front) + len(self.queue)) * dt)
            self.int_w[b].add(self.work * dt - 0.5 * total_rate * dt * dt)
            self.int_b[b].add(total_rate * dt)
            self.duration[b].add(dt)
        for job, rate in served:
            rem = job.remaining - rate * dt
            if rem < -COMPLETION_EPS * job.size:
                raise OvershootError(f"{job!r} overshot its size by {-rem!r}")
            job.remaining = rem if rem > 0.0 else 0.0
        self.work -= total_rate * dt
        if self.work < 0.0 or not (self.front or self.queue):
            self.work = 0.0
        self.clock += dt

    def advance(self, allocation: dict[int, float], dt: float) -> "SystemState":
        served = [(j, allocation[j.id]) for j in self.front if allocation.get(j.id, 0.0) > 0.0]
        self.advance_served(served, math.fsum(r for _, r in served), dt)
        return self


def _stream(dist, rng_arrivals, rng_sizes, arrival_rate, count):
    scale = 1.0 / arrival_rate
    left = count
    while left > 0:
        m = min(SAMPLE_BLOCK, left)
        gaps = rng_arrivals.exponential(scale, size=m).tolist()
        sizes, idx = dist.sample_indexed(rng_sizes, m)
        yield from zip(gaps, sizes.tolist(), idx.tolist())
        left -= m


def _view(policy: Policy, front, queue_length: int) -> PolicyView:
    if policy.omniscient:
        jobs = [JobView(j.id, j.cls, j.size - j.remaining, j.remaining) for j in front]
        return PolicyView(jobs, queue_length, omniscient=True)
    return PolicyView([JobView(j.id, j.cls, j.size - j.remaining, None) for j in front])


class _Allocator:
    """Turns the current front into ``(served pairs, total rate)``.

    Allocations of class-only policies are memoized per class sequence; the
    policy is still called (and checked) once for every new sequence.  If
    the policy declares prefix weights, the sequence is cut after the
    shortest prefix whose weights reach ``k``.
    """

    def __init__(self, policy: Policy, classes, check: bool):
        self.policy = policy
        self.classes = classes
        self.check = check
        self.memo = policy.class_only and not policy.omniscient
        self.cache: dict[tuple, tuple] = {}
        weights = [policy.prefix_weight(c) for c in classes] if self.memo else [None]
        self.weights = None if None in weights else weights

    def __call__(self, front, queue_length):
        if self.memo:
            weights = self.weights
            if weights is None:
                key = tuple([j.ci for j in front])
            else:
                budget, key = self.policy.k, []
                for j in front:
                    key.append(j.ci)
                    budget -= weights[j.ci]
                    if budget <= 0:
                        break
                key = tuple(key)
            hit = self.cache.get(key)
            if hit is None:
                hit = self._by_position(key)
                self.cache[key] = hit
            positions, total = hit
            return [(front[p], r) for p, r in positions], total
        policy = self.policy
        rates = policy.allocate(_view(policy, front, queue_length))
        if self.check:
            check_allocation(policy, rates, {j.id for j in front}, len(front) + queue_length)
        served = [(j, rates[j.id]) for j in front if rates.get(j.id, 0.0) > 0.0]
        return served, math.fsum(r for _, r in served)

    def _by_position(self, key):
        policy = self.policy
        view = PolicyView([JobView(p, self.classes[c], 0.0, None) for p, c in enumerate(key)])
        rates = policy.allocate(view)
        if self.check:
            n_system = len(key)
            if self.weights is not None and sum(self.weights[c] for c in key) >= policy.k:
                # A prefix reaching k stands for a front that must be fully busy.
                n_system = max(n_system, policy.n)
            check_allocation(policy, rates, range(len(key)), n_system)
        positions = tuple((p, rates[p]) for p in range(len(key)) if rates.get(p, 0.0) > 0.0)
        return positions, math.fsum(r for _, r in positions)


class _GroupAllocator:
    """Allocator for :class:`GroupPolicy` models.

    Jobs live in one arrival-ordered deque per group and the allocation is
    memoized on the (capped) group sizes.
    """

    MAX_CACHE = 1 << 17

    def __init__(self, policy: GroupPolicy, classes, check: bool):
        self.policy = policy
        self.check = check
        keys = [policy.group_key(JobView(-1, c, 0.0, None)) for c in classes]
        self.keys = list(dict.fromkeys(keys))
        self.group_of = [self.keys.index(key) for key in keys]
        self.rep = [classes[keys.index(key)] for key in self.keys]
        self.groups = [deque() for _ in self.keys]
        self.cap = policy.count_cap
        self.cache: dict[tuple, tuple] = {}

    def __call__(self, front, queue_length):
        groups, cap = self.groups, self.cap
        if cap is None:
            counts = tuple([len(d) for d in groups])
        else:
            counts = tuple([min(len(d), cap) for d in groups])
        hit = self.cache.get(counts)
        if hit is None:
            if len(self.cache) >= self.MAX_CACHE:
                self.cache.clear()
            hit = self._canonical(counts)
            self.cache[counts] = hit
        triples, total = hit
        return [(groups[g][p], r) for g, p, r in triples], total

    def _canonical(self, counts):
        jobs, where = [], []
        for g, c in enumerate(counts):
            for p in range(c):
                where.append((g, p))
                jobs.append(JobView(len(jobs), self.rep[g], 0.0, 0.0))
        rates = self.policy.allocate(PolicyView(jobs, 0, omniscient=True))
        if self.check:
            check_allocation(self.policy, rates, range(len(jobs)), len(jobs))
        triples = tuple((*where[i], r) for i, r in sorted(rates.items()) if r > 0.0)
        return triples, math.fsum(r for *_, r in triples)


def simulate(model: ModelSpec, arrival_rate: float, num_arrivals: int, seed: int,
             warmup: float = 0.0, check: bool = True) -> RunMetrics:
    """Simulate ``num_arrivals`` Poisson arrivals from an empty system.

    ``warmup`` is the fraction of leading arrivals excluded from every
    metric.  With ``check`` on, each allocation is validated against the
    policy's declared invariants.
    """
    dist = model.distribution
    mom = dist.moments()
    rho = arrival_rate * mom.mean
    if not arrival_rate > 0:
        raise ValueError("arrival rate must be positive")
    if rho >= 1.0:
        raise UnstableConfig(f"load rho={rho:.6g} must be below 1")
    if not math.isfinite(dist.rem_sup()):
        raise InfiniteRemSup("the simulator requires a finite rem_sup")
    if num_arrivals < 1:
        raise ValueError("num_arrivals must be at least 1")

    policy = make_policy(model)
    classes = dist.classes
    grouped = isinstance(policy, GroupPolicy)
    if grouped:
        allocator = _GroupAllocator(policy, classes, check)
        groups, group_of = allocator.groups, allocator.group_of
    else:
        allocator = _Allocator(policy, classes, check)
    rng_arr = make_rng(seed, STREAM_ARRIVALS)
    rng_size = make_rng(seed, STREAM_SIZES)

    skip = min(int(warmup * num_arrivals), num_arrivals - 1)
    counted = num_arrivals - skip
    nb = min(NUM_BATCHES, counted)
    state = SystemState(policy.n, nb)
    n = policy.n
    front, queue = state.front, state.queue
    sum_t = [0.0] * nb
    sum_tq = [0.0] * nb
    sum_tf = [0.0] * nb
    cnt = [0] * nb
    # Time integrals: short local partial sums, flushed into per-batch lists
    # and combined with math.fsum at the end.
    parts_n = [[] for _ in range(nb)]
    parts_w = [[] for _ in range(nb)]
    parts_b = [[] for _ in range(nb)]
    parts_d = [[] for _ in range(nb)]
    acc_n = acc_w = acc_b = acc_d = 0.0
    acc_events = 0
    batch = 0
    integrate = skip == 0

    arrivals = _stream(dist, rng_arr, rng_size, arrival_rate, num_arrivals)
    gap, size, ci = next(arrivals)
    next_arrival = gap
    arrived = 0
    # The clock is kept as an unevaluated sum ``clock + clock_lo`` so that
    # response times are not polluted by the rounding of absolute times.
    clock = clock_lo = 0.0
    work = 0.0
    horizon_start = 0.0 if skip == 0 else math.nan
    horizon_end = math.nan
    eps = COMPLETION_EPS
    inf = math.inf

    served: list = []
    total_rate = 0.0
    dirty = True
    state_dependent = policy.state_dependent
    # Served jobs are aged lazily: ``seg`` is the time elapsed under the
    # current allocation and ``comp_rel`` the first completion measured from
    # the start of that allocation.
    seg = 0.0
    comp_rel, first = inf, None
    nsys = 0

    while True:
        if dirty:
            if seg > 0.0:
                for job, r in served:
                    rem = job.remaining - r * seg
                    if rem < -eps * job.size:
                        raise OvershootError(f"{job!r} overshot its size by {-rem!r}")
                    job.remaining = rem if rem > 0.0 else 0.0
                seg = 0.0
            served, total_rate = allocator(front, len(queue))
            comp_rel, first = inf, None
            for job, r in served:
                d = job.remaining / r
                if d < comp_rel:
                    comp_rel, first = d, job
            dirty = state_dependent

        dt_c = comp_rel - seg
        if arrived < num_arrivals:
            dt_a = (next_arrival - clock) - clock_lo
        elif first is None:
            break
        else:
            dt_a = inf
        if dt_c <= dt_a:
            dt = dt_c if dt_c > 0.0 else 0.0
        else:
            dt = dt_a

        if integrate and dt > 0.0:
            acc_n += nsys * dt
            acc_w += work * dt - 0.5 * total_rate * dt * dt
            acc_b += total_rate * dt
            acc_d += dt
            acc_events += 1
            if acc_events == 1024:
                parts_n[batch].append(acc_n)
                parts_w[batch].append(acc_w)
                parts_b[batch].append(acc_b)
                parts_d[batch].append(acc_d)
                acc_n = acc_w = acc_b = acc_d = 0.0
                acc_events = 0
        work -= total_rate * dt
        seg += dt

        if dt_c <= dt_a:
            s = clock + dt
            bp = s - clock
            clock_lo += (clock - (s - bp)) + (dt - bp)
            clock = s
            done = []
            for job, r in served:
                rem = job.remaining - r * seg
                if rem <= eps * job.size or job is first:
                    if rem < -eps * job.size:
                        raise OvershootError(f"{job!r} overshot its size by {-rem!r}")
                    job.remaining = 0.0
                    done.append(job)
                else:
                    job.remaining = rem
            seg = 0.0
            if len(done) > 1:
                done.sort(key=lambda j: j.id)
            for job in done:
                if grouped:
                    groups[group_of[job.ci]].remove(job)
                else:
                    front.remove(job)
                nsys -= 1
                if job.id >= skip:
                    b = (job.id - skip) * nb // counted
                    sum_t[b] += (clock - job.arrival) + clock_lo
                    sum_tq[b] += (job.front_entry - job.arrival) + job.front_lo
                    sum_tf[b] += (clock - job.front_entry) + (clock_lo - job.front_lo)
                    cnt[b] += 1
            while queue and (n is None or len(front) < n):
                job = queue.popleft()
                job.front_entry = clock
                job.front_lo = clock_lo
                front.append(job)
            if not nsys:
                work = 0.0
            dirty = True
        else:
            clock, clock_lo = next_arrival, 0.0
            job = Job(arrived, clock, size, classes[ci], ci)
            arrived += 1
            nsys += 1
            work += size
            if grouped:
                job.front_entry = clock
                groups[group_of[ci]].append(job)
                dirty = True
            elif n is None or len(front) < n:
                job.front_entry = clock
                front.append(job)
                dirty = True
            else:
                queue.append(job)
            if arrived == skip or arrived >= num_arrivals or (arrived > skip and
                                                              (arrived - skip) * nb // counted != batch):
                parts_n[batch].append(acc_n)
                parts_w[batch].append(acc_w)
                parts_b[batch].append(acc_b)
                parts_d[batch].append(acc_d)
                acc_n = acc_w = acc_b = acc_d = 0.0
                acc_events = 0
                if arrived == skip:
                    integrate = True
                    horizon_start = clock
                if arrived >= num_arrivals:
                    integrate = False
                    horizon_end = clock
                elif arrived > skip:
                    batch = (arrived - skip) * nb // counted
            if arrived < num_arrivals:
                gap, size, ci = next(arrivals)
                next_arrival += gap

    state.clock = clock
    state.work = work
    for b in range(nb):
        state.int_n[b].total = math.fsum(parts_n[b])
        state.int_w[b].total = math.fsum(parts_w[b])
        state.int_b[b].total = math.fsum(parts_b[b])
        state.duration[b].total = math.fsum(parts_d[b])
    return _summarize(state, sum_t, sum_tq, sum_tf, cnt, arrival_rate, num_arrivals,
                      horizon_end - horizon_start)


def _summarize(state, sum_t, sum_tq, sum_tf, cnt, arrival_rate, num_arrivals, horizon):
    total = sum(cnt)
    live = [b for b in range(len(cnt)) if cnt[b] > 0]

    def job_mean(sums):
        mean = math.fsum(sums) / total
        return mean, batch_ci([sums[b] / cnt[b] for b in live])

    def time_mean(integrals):
        durations = [d.total for d in state.duration]
        span = math.fsum(durations)
        if span <= 0:
            return math.nan, math.nan
        mean = math.fsum(i.total for i in integrals) / span
        return mean, batch_ci([i.total / d for i, d in zip(integrals, durations) if d > 0])

    mean_t, ci_t = job_mean(sum_t)
    mean_tq, ci_tq = job_mean(sum_tq)
    mean_tf, ci_tf = job_mean(sum_tf)
    mean_n, ci_n = time_mean(state.int_n)
    mean_w, ci_w = time_mean(state.int_w)
    busy, ci_busy = time_mean(state.int_b)
    return RunMetrics(
        mean_T=mean_t, ci_T=ci_t, mean_T_Q=mean_tq, ci_T_Q=ci_tq, mean_T_F=mean_tf, ci_T_F=ci_tf,
        mean_N=mean_n, ci_N=ci_n, mean_W=mean_w, ci_W=ci_w, busy_fraction=busy, ci_busy=ci_busy,
        completed_count=total, simulated_arrivals=num_arrivals, arrival_rate=arrival_rate,
        horizon=horizon,
    )


def record_completion(job: Job, clock: float) -> tuple[float, float, float]:
    """Response, queueing and front time of a job finishing at ``clock``."""
    t = clock - job.arrival
    t_f = clock - job.front_entry
    return t, t - t_f, t_f
