import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wcfs import packing
from wcfs.errors import BudgetExceeded, InvalidRequirement
from wcfs.validation import (GAP_TABLE, check_divisorfilling_random, check_gap_table,
                             check_serverfilling_exhaustive, check_serverfilling_random)


def cands(reqs):
    return list(enumerate(reqs))


def test_serverfilling_worked_example():
    reqs = [1, 2, 1, 1, 4, 2, 2, 1]
    chosen = packing.server_filling_select(8, cands(reqs))
    # 1-based positions 5, 2, 1, 3: requirements 4, 2, 1, 1.
    assert chosen == [4, 1, 0, 2]
    assert sum(reqs[i] for i in chosen) == 8


def test_serverfilling_short_front_serves_everything_that_fits():
    assert packing.server_filling_select(8, cands([2, 1])) == [0, 1]
    assert packing.server_filling_select(8, []) == []


def test_serverfilling_only_looks_at_the_minimal_prefix():
    # The prefix [4, 4] already needs 8 servers; the later 1 is never served.
    assert packing.server_filling_select(8, cands([4, 4, 1])) == [0, 1]


@pytest.mark.parametrize("k, reqs", [(8, [3]), (6, [2]), (8, [16]), (8, [0])])
def test_serverfilling_rejects_invalid(k, reqs):
    with pytest.raises(InvalidRequirement):
        packing.server_filling_select(k, cands(reqs))


powers = st.sampled_from([1, 2, 4, 8, 16, 32])


@given(st.sampled_from([1, 2, 4, 8, 16, 32]).flatmap(
    lambda k: st.tuples(st.just(k), st.lists(st.sampled_from([v for v in (1, 2, 4, 8, 16, 32) if v <= k]),
                                             max_size=k))))
def test_serverfilling_fills_exactly_k(case):
    k, reqs = case
    chosen = packing.server_filling_select(k, cands(reqs))
    used = sum(reqs[i] for i in chosen)
    assert used <= k
    assert len(set(chosen)) == len(chosen)
    if sum(reqs) >= k:
        assert used == k
    else:
        assert sorted(chosen) == list(range(len(reqs)))


def test_serverfilling_exhaustive_small_k():
    check = check_serverfilling_exhaustive(ks=(2, 4))
    assert check.ok, check.detail


def _unsorted_serverfilling(k, candidates):
    # Mutation: admit the minimal prefix in arrival order, skipping the sort.
    free, chosen = k, []
    total = 0
    for job_id, v in candidates:
        if total >= k:
            break
        total += v
        if v > free:
            break
        chosen.append(job_id)
        free -= v
    return chosen


def test_mutated_serverfilling_is_caught():
    assert not check_serverfilling_exhaustive(ks=(4,), select=_unsorted_serverfilling).ok
    assert not check_serverfilling_random(k=16, cases=500, select=_unsorted_serverfilling).ok


@pytest.mark.parametrize("k, expected", [(2, 2), (12, 3), (60, 5), (49, 7), (97, 97), (1, 1)])
def test_largest_prime_factor(k, expected):
    assert packing.largest_prime_factor(k) == expected


def test_gap_table_rows():
    assert len(GAP_TABLE) == 17
    assert check_gap_table(60).ok
    # Spot checks, computed by hand.
    assert packing.largest_first_gap(60, [30, 20, 20]) == 10
    assert packing.largest_first_gap(60, [20, 15, 12, 12, 12]) == 1
    assert packing.largest_first_gap(60, [15, 12, 12, 12, 12]) == 9


def test_divisorfilling_worked_example():
    reqs = [6, 4, 4, 1, 1]
    chosen = packing.divisor_filling_select(12, cands(reqs))
    assert sum(reqs[i] for i in chosen) == 12
    assert sorted(reqs[i] for i in chosen) == [1, 1, 4, 6]


def test_divisorfilling_rejects_non_divisors():
    with pytest.raises(InvalidRequirement):
        packing.divisor_filling_select(12, cands([5]))


def _divisors(k):
    return [d for d in range(1, k + 1) if k % d == 0]


@st.composite
def divisor_fronts(draw, full):
    k = draw(st.sampled_from([4, 6, 8, 10, 12, 18, 20, 24, 30, 36, 60]))
    size = k if full else draw(st.integers(0, k))
    pool = _divisors(k)
    return k, draw(st.lists(st.sampled_from(pool), min_size=size, max_size=size))


@settings(max_examples=300)
@given(divisor_fronts(full=True))
def test_divisorfilling_work_conserving(case):
    k, reqs = case
    chosen = packing.divisor_filling_select(k, cands(reqs))
    assert len(set(chosen)) == len(chosen)
    assert sum(reqs[i] for i in chosen) == k


@settings(max_examples=300)
@given(divisor_fronts(full=False))
def test_divisorfilling_partial_fronts_fit_and_serve(case):
    k, reqs = case
    chosen = packing.divisor_filling_select(k, cands(reqs))
    assert sum(reqs[i] for i in chosen) <= k
    assert chosen == sorted(chosen)
    if reqs:
        assert chosen


@pytest.mark.parametrize("k", [6, 8, 10, 12, 30])
def test_divisorfilling_random_multisets(k):
    check = check_divisorfilling_random(k, cases=500, seed=3)
    assert check.ok, check.detail


def test_divisorfilling_prime_case_groups():
    # k = 10: no 1s, too few multiples of 5, so pairs of 2s fill the groups.
    reqs = [2] * 10
    chosen = packing.divisor_filling_select(10, cands(reqs))
    assert len(chosen) == 5


def test_maxweight_trivial():
    assert packing.maxweight_select(4, {4: 1}) == {4: 1}


def test_maxweight_prefers_heavy_classes():
    # Weight of a v=1 job is 5, of a v=2 job 3: four 1s beat two 2s.
    assert packing.maxweight_select(4, {1: 5, 2: 3}) == {1: 4}


def test_maxweight_tie_break_prefers_larger_requirements():
    # {2: 1} and {1: 1} x ... tie at objective 2: z = {2: 1} or {1: 1} with counts 2, 2.
    z = packing.maxweight_select(2, {1: 2, 2: 2})
    assert packing.maxweight_objective({1: 2, 2: 2}, z) == 4
    assert z == {1: 2}
    z = packing.maxweight_select(2, {1: 1, 2: 2})
    assert z == {2: 1}


def test_maxweight_budget():
    with pytest.raises(BudgetExceeded):
        packing.maxweight_select(33, {1: 1})
    packing.maxweight_select(32, {1: 40, 3: 2})


@settings(max_examples=300)
@given(st.integers(1, 10).flatmap(lambda k: st.tuples(
    st.just(k), st.dictionaries(st.integers(1, k), st.integers(0, 5), max_size=k))))
def test_maxweight_matches_brute_force(case):
    k, counts = case
    z = packing.maxweight_select(k, counts)
    assert sum(v * n for v, n in z.items()) <= k
    assert all(0 < n <= counts[v] for v, n in z.items())
    assert packing.maxweight_objective(counts, z) == packing.brute_force_maxweight(k, counts)


def test_brute_force_oracle_small_cases():
    # Hand-computed optima.
    assert packing.brute_force_maxweight(4, {1: 5, 2: 3}) == 20
    assert packing.brute_force_maxweight(4, {4: 1}) == 1
    assert packing.brute_force_maxweight(3, {2: 4, 3: 1}) == 4


def test_largest_first_prefix():
    assert packing.largest_first_prefix(8, [4, 2, 2, 1]) == 3
    assert packing.largest_first_prefix(8, []) == 0
    assert packing.largest_first_prefix(3, [4]) == 0


def test_is_power_of_two():
    assert [x for x in range(20) if packing.is_power_of_two(x)] == [1, 2, 4, 8, 16]


def test_exhaustive_serverfilling_enumeration_size():
    # Fronts of length 1..k over the powers of two up to k.
    expected = sum(len([1, 2, 4][: {2: 2, 4: 3}[k]]) ** m for k in (2, 4) for m in range(1, k + 1))
    assert check_serverfilling_exhaustive(ks=(2, 4)).detail.startswith(f"{expected} cases")


def test_divisorfilling_each_case_reached():
    # Case with many 1s, 2^a 3^b case, and prime case each fill k.
    for k, reqs in [(12, [6, 1, 1, 4, 1, 1, 1, 1, 1, 1, 1, 1]),
                    (12, [4, 6, 3, 2, 2, 6, 4, 3, 12, 2, 3, 1]),
                    (30, [15, 6, 10, 3, 2, 5, 6, 10, 15, 3] * 3)]:
        chosen = packing.divisor_filling_select(k, cands(reqs))
        assert sum(reqs[i] for i in chosen) == k


def test_all_small_divisor_fronts_k6():
    divs = _divisors(6)
    for reqs in itertools.product(divs, repeat=6):
        chosen = packing.divisor_filling_select(6, cands(reqs))
        assert sum(reqs[i] for i in chosen) == 6
