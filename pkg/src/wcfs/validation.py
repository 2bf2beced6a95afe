"""Oracle and property checks run by ``wcfs validate``.

Every check returns :class:`~wcfs.analysis.Check` records.  Simulation
checks compare against closed forms within three batch-means half-widths;
packing checks are exact.
"""
from __future__ import annotations

import itertools
import random
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from . import analysis as A
from . import packing
from .distributions import Exponential, hyperexp
from .engine import simulate
from .policies import ModelSpec

FIG1_HYPEREXP = ((0.5, 2.0), (0.5, 2.0 / 3.0))

# Rows of the largest-first gap table: requirements as fractions of k, and
# the gap as a fraction of k.
GAP_TABLE = (
    ((1,), 0),
    ((2, 2), 0),
    ((2, 3, 3), Fraction(1, 6)),
    ((2, 4, 4), 0),
    ((2, 4, 5, 5), Fraction(1, 20)),
    ((2, 5, 5, 5), Fraction(1, 10)),
    ((3, 3, 3), 0),
    ((3, 3, 4, 4), Fraction(1, 12)),
    ((3, 3, 5, 5), Fraction(2, 15)),
    ((3, 4, 4, 4), Fraction(1, 6)),
    ((3, 4, 5, 5, 5), Fraction(1, 60)),
    ((3, 5, 5, 5, 5), Fraction(1, 15)),
    ((4, 4, 4, 4), 0),
    ((4, 4, 4, 5, 5), Fraction(1, 20)),
    ((4, 4, 5, 5, 5), Fraction(1, 10)),
    ((4, 5, 5, 5, 5), Fraction(3, 20)),
    ((5, 5, 5, 5, 5), 0),
)

Selector = Callable[[int, Iterable[tuple[int, int]]], list]


def _sim_check(name: str, model: ModelSpec, lam: float, expected: float, arrivals: int,
               seed: int) -> A.Check:
    m = simulate(model, lam, arrivals, seed)
    tol = A.SIGMAS * m.ci_T
    return A.Check(name, abs(m.mean_T - expected) <= tol,
                   f"mean_T={m.mean_T:.5g} expected={expected:.5g} tol={tol:.3g}")


def check_mm1(seed: int = 1, arrivals: int = 200_000, rho: float = 0.5) -> A.Check:
    model = ModelSpec("het_mgk_fcfs", Exponential(1.0), k=1)
    return _sim_check(f"mm1_rho{rho}", model, rho, A.mm1_response(rho, 1.0), arrivals, seed)


def check_erlang_c(seed: int = 1, arrivals: int = 200_000, k: int = 2, rho: float = 0.7) -> A.Check:
    model = ModelSpec("het_mgk_fcfs", Exponential(1.0), k=k)
    return _sim_check(f"erlang_c_k{k}_rho{rho}", model, rho, A.mmk_oracle(k, rho, 1.0), arrivals, seed)


def check_pk(seed: int = 1, arrivals: int = 200_000, rho: float = 0.8) -> A.Check:
    dist = hyperexp(*FIG1_HYPEREXP)
    model = ModelSpec("het_mgk_fcfs", dist, k=1)
    mom = dist.moments()
    expected = A.pk_queueing_time(rho, mom) + mom.mean
    return _sim_check(f"pk_rho{rho}", model, rho, expected, arrivals, seed)


def check_lps_exponential(seed: int = 1, arrivals: int = 200_000, rho: float = 0.7) -> A.Check:
    model = ModelSpec("lps", Exponential(1.0), mpl=4)
    return _sim_check(f"lps_exp_rho{rho}", model, rho, A.mm1_response(rho, 1.0), arrivals, seed)


def _powers_of_two(k: int) -> list[int]:
    return [1 << i for i in range(k.bit_length()) if 1 << i <= k]


def _serverfilling_ok(select: Selector, k: int, reqs) -> bool:
    chosen = select(k, list(enumerate(reqs)))
    used = sum(reqs[i] for i in chosen)
    if used > k or len(set(chosen)) != len(chosen):
        return False
    return sum(reqs) < k or used == k


def check_serverfilling_exhaustive(ks=(2, 4, 8), select: Selector = packing.server_filling_select
                                   ) -> A.Check:
    """Every front of up to ``k`` power-of-two requirements."""
    cases = failures = 0
    first = None
    for k in ks:
        values = _powers_of_two(k)
        for m in range(1, k + 1):
            for reqs in itertools.product(values, repeat=m):
                cases += 1
                if not _serverfilling_ok(select, k, reqs):
                    failures += 1
                    first = first or (k, reqs)
    return A.Check("serverfilling_exhaustive", failures == 0,
                   f"{cases} cases, {failures} failures" + (f", first {first}" if first else ""))


def check_serverfilling_random(k: int = 16, cases: int = 10_000, seed: int = 1,
                               select: Selector = packing.server_filling_select) -> A.Check:
    rng = random.Random(seed)
    values = _powers_of_two(k)
    failures, first = 0, None
    for _ in range(cases):
        reqs = tuple(rng.choice(values) for _ in range(rng.randint(1, k)))
        if not _serverfilling_ok(select, k, reqs):
            failures += 1
            first = first or reqs
    return A.Check(f"serverfilling_random_k{k}", failures == 0,
                   f"{cases} cases, {failures} failures" + (f", first {first}" if first else ""))


def check_gap_table(k: int = 60) -> A.Check:
    bad = []
    for denoms, gap in GAP_TABLE:
        got = packing.largest_first_gap(k, [k // d for d in denoms])
        if got != gap * k:
            bad.append((denoms, got, gap * k))
    return A.Check("gap_table", not bad, f"{len(GAP_TABLE)} rows, mismatches {bad}")


def check_divisorfilling_random(k: int, cases: int = 10_000, seed: int = 1,
                                select: Selector = packing.divisor_filling_select) -> A.Check:
    """A front of exactly ``k`` divisor requirements always fills ``k`` servers."""
    rng = random.Random(seed * 1000 + k)
    divisors = [d for d in range(1, k + 1) if k % d == 0]
    failures, first = 0, None
    for _ in range(cases):
        # Mix uniform draws with draws biased away from 1 so every case of the
        # recursion gets exercised.
        pool = divisors if rng.random() < 0.5 else divisors[1:] * 3 + [1]
        reqs = [rng.choice(pool) for _ in range(k)]
        chosen = select(k, list(enumerate(reqs)))
        if sum(reqs[i] for i in chosen) != k or len(set(chosen)) != len(chosen):
            failures += 1
            first = first or reqs
    return A.Check(f"divisorfilling_k{k}", failures == 0,
                   f"{cases} cases, {failures} failures" + (f", first {first}" if first else ""))


def _all_packings(k: int, cap: int):
    """Every ``z`` with ``sum(v * z_v) <= k`` and ``z_v <= cap``, as rows."""
    out = []

    def rec(v, left, z):
        if v > k:
            out.append(tuple(z))
            return
        for c in range(min(cap, left // v) + 1):
            z.append(c)
            rec(v + 1, left - c * v, z)
            z.pop()

    rec(1, k, [])
    return np.array(out, dtype=np.int64)


def check_maxweight(max_k: int = 8, max_count: int = 5, chunk: int = 50_000) -> A.Check:
    """DP packing against brute force on every count vector.

    For each ``k <= max_k``, every vector of per-class counts in
    ``[0, max_count]^k`` is an instance.  The brute-force optimum is the
    best feasible packing from an explicit enumeration, evaluated in bulk.
    """
    cases = failures = 0
    first = None
    for k in range(1, max_k + 1):
        packs = _all_packings(k, max_count)
        instances = itertools.product(range(max_count + 1), repeat=k)
        while True:
            block = np.array(list(itertools.islice(instances, chunk)), dtype=np.int64)
            if block.size == 0:
                break
            fits = (packs[None, :, :] <= block[:, None, :]).all(axis=2)
            best = np.where(fits, block @ packs.T, -1).max(axis=1)
            for row, opt in zip(block.tolist(), best.tolist()):
                cc = {v: n for v, n in enumerate(row, start=1) if n}
                z = packing.maxweight_select(k, cc)
                ok = (sum(v * n for v, n in z.items()) <= k
                      and all(n <= cc.get(v, 0) for v, n in z.items())
                      and packing.maxweight_objective(cc, z) == opt)
                cases += 1
                if not ok:
                    failures += 1
                    first = first or (k, cc)
    return A.Check("maxweight_exact", failures == 0,
                   f"{cases} cases, {failures} failures" + (f", first {first}" if first else ""))


def run_all(seed: int = 1, arrivals: int = 200_000) -> list[A.Check]:
    checks = [
        check_mm1(seed, arrivals, 0.5),
        check_mm1(seed, arrivals, 0.8),
        check_erlang_c(seed, arrivals, 2, 0.7),
        check_erlang_c(seed, arrivals, 4, 0.7),
        check_pk(seed, arrivals, 0.8),
        check_lps_exponential(seed, arrivals, 0.7),
        check_serverfilling_exhaustive(),
        check_serverfilling_random(seed=seed),
        check_gap_table(),
    ]
    checks += [check_divisorfilling_random(k, 2_000, seed) for k in (6, 8, 10, 12, 30)]
    checks.append(check_maxweight())
    return checks
