import math
from fractions import Fraction

import numpy as np
import pytest

from wcfs import Deterministic, Exponential, ModelSpec, hyperexp, multiserver_jobs, simulate, threshold_jobs
from wcfs import engine, policies
from wcfs.analysis import mm1_response
from wcfs.distributions import make_rng
from wcfs.engine import Job, SystemState, batch_ci, record_completion
from wcfs.errors import OvershootError, UnstableConfig
from wcfs.policies import JobView, PolicyView, make_policy

HX = hyperexp((0.5, 2.0), (0.5, 2.0 / 3.0))
MSJ = multiserver_jobs(4, [(0.5, 1, Exponential(0.5)), (0.5, 4, Exponential(2.0 / 3.0))])
TP = threshold_jobs([(0.5, 1, Exponential(2.0)), (0.5, 4, Exponential(2.0 / 3.0))])


def test_single_deterministic_job():
    m = simulate(ModelSpec("het_mgk_fcfs", Deterministic(3.0), k=1), 0.01, 1, seed=4)
    assert m.mean_T == 3.0
    assert m.mean_T_Q == 0.0
    assert m.mean_T_F == 3.0
    assert m.completed_count == 1


def test_single_job_on_slow_server():
    model = ModelSpec("het_mgk_fcfs", Deterministic(1.0), server_speeds=(0.75, 0.25))
    m = simulate(model, 0.01, 1, seed=4)
    assert m.mean_T == pytest.approx(1 / 0.75, rel=1e-12)


def test_advance_example():
    state = SystemState(n=2)
    a, b = Job(1, 0.0, 2.0, None), Job(2, 0.0, 1.0, None)
    state.admit(a)
    state.admit(b)
    state.advance({1: 0.5, 2: 0.5}, 1.0)
    assert (a.remaining, b.remaining) == (1.5, 0.5)
    assert state.work == 2.0
    assert state.clock == 1.0
    # N integral 2 * 1, work integral 3 - 0.5 * 1 * 1.
    assert state.int_n[0].total == 2.0
    assert state.int_w[0].total == 2.5
    assert state.int_b[0].total == 1.0


def test_admit_and_refill():
    state = SystemState(n=1)
    assert state.admit(Job(1, 0.0, 1.0, None))
    assert not state.admit(Job(2, 0.0, 1.0, None))
    assert state.num_jobs == 2
    state.front.clear()
    state.refill()
    assert [j.id for j in state.front] == [2]
    assert state.queue_work == 0.0
    assert state.front_work == 1.0


def test_advance_overshoot():
    state = SystemState(n=1)
    state.admit(Job(1, 0.0, 1.0, None))
    with pytest.raises(OvershootError):
        state.advance({1: 1.0}, 1.5)
    with pytest.raises(ValueError):
        state.advance({1: 1.0}, -1.0)


def test_record_completion():
    job = Job(1, 2.0, 1.0, None)
    job.front_entry = 3.5
    assert record_completion(job, 5.0) == (3.0, 1.5, 1.5)


def test_batch_ci_example():
    # Sample sd of (1, 2, 3) is 1; t_{0.975, 2} = 4.302653.
    assert batch_ci([1.0, 2.0, 3.0]) == pytest.approx(4.302653 / math.sqrt(3), rel=1e-6)
    assert math.isnan(batch_ci([1.0]))


def test_unstable_and_invalid_inputs():
    model = ModelSpec("lps", HX, mpl=4)
    with pytest.raises(UnstableConfig):
        simulate(model, 1.0, 1000, 1)
    with pytest.raises(ValueError):
        simulate(model, 0.0, 1000, 1)
    with pytest.raises(ValueError):
        simulate(model, 0.5, 0, 1)


def test_determinism():
    model = ModelSpec("msj_serverfilling", MSJ, k=4)
    a = simulate(model, 0.7, 20_000, 99)
    b = simulate(model, 0.7, 20_000, 99)
    c = simulate(model, 0.7, 20_000, 100)
    assert a == b
    assert a != c


@pytest.mark.parametrize("model", [
    ModelSpec("het_mgk_fcfs", HX, server_speeds=(0.4, 0.3, 0.2, 0.1)),
    ModelSpec("lps", HX, mpl=4),
    ModelSpec("threshold_fcfs", TP, k=4),
    ModelSpec("msj_fcfs", MSJ, k=4),
    ModelSpec("msj_maxweight", MSJ, k=4),
    ModelSpec("mgk_srpt", HX, k=4),
], ids=lambda m: m.policy)
def test_metric_identities(model):
    m = simulate(model, 0.6, 30_000, 3)
    assert m.mean_T == pytest.approx(m.mean_T_Q + m.mean_T_F, rel=1e-12)
    assert 0.0 <= m.busy_fraction <= 1.0
    assert m.completed_count == 30_000
    assert m.mean_T_F > 0
    assert m.mean_W > 0


def test_warmup_drops_leading_arrivals():
    model = ModelSpec("lps", HX, mpl=4)
    m = simulate(model, 0.5, 10_000, 2, warmup=0.25)
    assert m.completed_count == 7_500
    assert m.simulated_arrivals == 10_000


def test_mm1_coverage():
    """At least 90 of 100 independent 95% intervals cover the exact mean."""
    model = ModelSpec("het_mgk_fcfs", Exponential(1.0), k=1)
    exact = mm1_response(0.5, 1.0)
    hits = 0
    for seed in range(100):
        m = simulate(model, 0.5, 20_000, 1000 + seed)
        hits += abs(m.mean_T - exact) <= m.ci_T
    assert hits >= 90


# Reference simulator in exact rational arithmetic: re-ages every job at
# every event and asks the policy for a fresh allocation each time.  Shares
# only the random streams with the engine.
def _exact(model, lam, count, seed):
    pol = make_policy(model)
    rng_a, rng_s = make_rng(seed, engine.STREAM_ARRIVALS), make_rng(seed, engine.STREAM_SIZES)
    gaps = rng_a.exponential(1.0 / lam, size=count)
    sizes, idx = model.distribution.sample_indexed(rng_s, count)
    arrivals = np.cumsum(gaps)
    classes = model.distribution.classes
    jobs, t, nxt, resp = [], Fraction(0), 0, []
    while nxt < count or jobs:
        front = jobs if pol.n is None else jobs[: pol.n]
        view = PolicyView([JobView(j[0], classes[j[2]], float(j[1] - j[3]), float(j[3])) for j in front],
                          len(jobs) - len(front), omniscient=pol.omniscient)
        rates = {i: Fraction(r) for i, r in pol.allocate(view).items() if r > 0} if front else {}
        finish = [j[3] / rates[j[0]] for j in front if j[0] in rates]
        t_done = min(finish) if finish else None
        t_arr = Fraction(arrivals[nxt]) - t if nxt < count else None
        arrive = t_done is None or (t_arr is not None and t_arr < t_done)
        dt = t_arr if arrive else t_done
        for j in front:
            if j[0] in rates:
                j[3] -= rates[j[0]] * dt
        t += dt
        if arrive:
            size = Fraction(sizes[nxt])
            jobs.append([nxt, size, int(idx[nxt]), size, Fraction(arrivals[nxt])])
            nxt += 1
        else:
            for j in [j for j in front if j[3] == 0]:
                resp.append(t - j[4])
                jobs.remove(j)
    return float(sum(resp) / count)


@pytest.mark.parametrize("model", [
    ModelSpec("het_mgk_fcfs", HX, server_speeds=(0.4, 0.3, 0.2, 0.1)),
    ModelSpec("lps", HX, mpl=4),
    ModelSpec("threshold_fcfs", TP, k=4),
    ModelSpec("msj_serverfilling", MSJ, k=4),
    ModelSpec("msj_divisorfilling", MSJ, k=4),
    ModelSpec("msj_fcfs", MSJ, k=4),
    ModelSpec("msj_least_servers_first", MSJ, k=4),
    ModelSpec("msj_most_servers_first", MSJ, k=4),
    ModelSpec("msj_maxweight", MSJ, k=4),
    ModelSpec("threshold_elastic_first", TP, k=4),
    ModelSpec("threshold_inelastic_first", TP, k=4),
    ModelSpec("mgk_srpt", HX, k=4),
], ids=lambda m: m.policy)
def test_engine_matches_exact_simulation(model):
    m = simulate(model, 0.8, 2000, 21)
    assert m.mean_T == pytest.approx(_exact(model, 0.8, 2000, 21), rel=1e-9)


def test_slowest_first_matches_exact_simulation():
    # Slowest-first moves every job to a new server at each completion, and
    # float rounding compounds over long busy periods; a shorter run keeps
    # the comparison tight.
    model = ModelSpec("het_mgk_fcfs", HX, server_speeds=(0.4, 0.3, 0.2, 0.1), assignment="slowest")
    m = simulate(model, 0.8, 1000, 21)
    assert m.mean_T == pytest.approx(_exact(model, 0.8, 1000, 21), rel=1e-7)


@pytest.mark.parametrize("policy, dist", [
    ("msj_serverfilling", MSJ), ("threshold_fcfs", TP), ("msj_fcfs", MSJ),
])
def test_memoized_allocator_is_bit_identical(policy, dist, monkeypatch):
    model = ModelSpec(policy, dist, k=4)
    memo = simulate(model, 0.75, 20_000, 8)
    cls = type(make_policy(model))
    monkeypatch.setattr(cls, "class_only", False)
    direct = simulate(model, 0.75, 20_000, 8)
    assert memo == direct


@pytest.mark.parametrize("policy, dist", [
    ("msj_least_servers_first", MSJ), ("msj_maxweight", MSJ), ("threshold_elastic_first", TP),
])
def test_group_allocator_is_bit_identical(policy, dist, monkeypatch):
    model = ModelSpec(policy, dist, k=4)
    grouped = simulate(model, 0.6, 20_000, 8)

    class Never:
        pass

    monkeypatch.setattr(engine, "GroupPolicy", Never)
    direct = simulate(model, 0.6, 20_000, 8)
    assert grouped == direct


def test_group_policy_is_still_a_policy():
    assert issubclass(policies.GroupPolicy, policies.Policy)
