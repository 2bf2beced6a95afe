"""Server packing algorithms for multiserver jobs.

Candidates are ``(job_id, servers)`` pairs in arrival order.  Every
selector is a pure function returning the ids it places into service.
"""
from __future__ import annotations

import itertools
from typing import Iterable, Sequence

from .errors import BudgetExceeded, InvalidRequirement

MAXWEIGHT_BUDGET = 32


def is_power_of_two(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


def largest_prime_factor(k: int) -> int:
    p, largest = 2, 1
    while p * p <= k:
        while k % p == 0:
            largest, k = p, k // p
        p += 1
    return max(largest, k) if k > 1 else largest


def largest_first_prefix(k: int, requirements: Sequence[int]) -> int:
    """Length of the longest prefix of ``requirements`` fitting in ``k``."""
    used = 0
    for i, v in enumerate(requirements):
        if used + v > k:
            return i
        used += v
    return len(requirements)


def largest_first_gap(k: int, requirements: Sequence[int]) -> int:
    """Idle servers left by the longest fitting prefix of a descending sequence."""
    i = largest_first_prefix(k, requirements)
    return k - sum(requirements[:i])


def _check_candidates(k: int, candidates) -> list[tuple[int, int]]:
    if k < 1:
        raise InvalidRequirement(f"k must be a positive integer, got {k}")
    out = []
    for job_id, v in candidates:
        if v < 1 or v > k:
            raise InvalidRequirement(f"job {job_id}: requirement {v} outside [1, {k}]")
        out.append((job_id, int(v)))
    return out


def server_filling_select(k: int, candidates: Iterable[tuple[int, int]]) -> list[int]:
    """ServerFilling for power-of-two requirements and k.

    Take the shortest arrival-order prefix needing at least ``k`` servers,
    sort it by requirement (largest first, ties by arrival) and admit jobs
    until the servers run out.  The prefix sums of a descending sequence of
    powers of two hit ``k`` exactly, so a full candidate set fills every
    server.
    """
    cands = _check_candidates(k, candidates)
    if not is_power_of_two(k):
        raise InvalidRequirement(f"ServerFilling needs k a power of 2, got {k}")
    for job_id, v in cands:
        if not is_power_of_two(v):
            raise InvalidRequirement(f"job {job_id}: requirement {v} is not a power of 2")

    prefix, total = [], 0
    for pos, (job_id, v) in enumerate(cands):
        if total >= k:
            break
        prefix.append((v, pos, job_id))
        total += v
    prefix.sort(key=lambda item: (-item[0], item[1]))

    free, chosen = k, []
    for v, _, job_id in prefix:
        if v > free:
            break
        chosen.append(job_id)
        free -= v
        if free == 0:
            break
    return chosen


def divisor_filling_select(k: int, candidates: Iterable[tuple[int, int]]) -> list[int]:
    """DivisorFilling for requirements that all divide ``k``.

    With at least ``k`` candidates the selection uses exactly ``k`` servers.
    """
    cands = _check_candidates(k, candidates)
    for job_id, v in cands:
        if k % v:
            raise InvalidRequirement(f"job {job_id}: requirement {v} does not divide {k}")
    return [cands[i][0] for i in sorted(_divisor_fill(k, [v for _, v in cands]))]


def _largest_first_fill(k: int, reqs: list[int], idx: list[int]) -> list[int]:
    order = sorted(idx, key=lambda i: (-reqs[i], i))
    n = largest_first_prefix(k, [reqs[i] for i in order])
    chosen = order[:n]
    free = k - sum(reqs[i] for i in chosen)
    taken = set(chosen)
    for i in idx:
        if free == 0:
            break
        if reqs[i] == 1 and i not in taken:
            chosen.append(i)
            free -= 1
    return chosen


def _scaled(k: int, reqs: list[int], idx: list[int], factor: int) -> list[int]:
    sub = _divisor_fill(k // factor, [reqs[i] // factor for i in idx])
    return [idx[j] for j in sub]


def _divisor_fill(k: int, reqs: list[int], idx: list[int] | None = None) -> list[int]:
    """Positions (into ``reqs``) selected among ``idx``, all in arrival order."""
    if idx is None:
        idx = list(range(len(reqs)))
    if not idx:
        return []
    ones = sum(1 for i in idx if reqs[i] == 1)
    if 6 * ones >= k:
        return _largest_first_fill(k, reqs, idx)

    p = largest_prime_factor(k)
    chosen: list[int] = []
    if p <= 3:
        evens = [i for i in idx if reqs[i] % 2 == 0]
        odds = [i for i in idx if reqs[i] % 2 == 1 and reqs[i] > 1]
        if evens and 2 * len(evens) >= 3 * len(odds):
            chosen = _scaled(k, reqs, evens, 2)
        elif odds:
            chosen = _scaled(k, reqs, odds, 3)
    else:
        multiples = [i for i in idx if reqs[i] % p == 0]
        rest = [i for i in idx if reqs[i] > 1 and reqs[i] % p]
        group = k // p
        if len(multiples) >= group:
            chosen = _scaled(k, reqs, multiples, p)
        else:
            for _ in range(p):
                if len(rest) < group:
                    break
                sub = [rest[j] for j in _divisor_fill(group, [reqs[i] for i in rest[:group]])]
                chosen.extend(sub)
                picked = set(sub)
                rest = [i for i in rest if i not in picked]
    if not chosen:
        # Only reachable with a partial front; keep the system non-idling.
        chosen = _largest_first_fill(k, reqs, idx)
    return sorted(chosen)


def maxweight_select(k: int, class_counts: dict[int, int]) -> dict[int, int]:
    """Packing ``{v: z_v}`` maximizing ``sum N_v * z_v`` within ``k`` servers.

    Among optimal packings, prefer more jobs of the largest requirement,
    then of the next largest, and so on.
    """
    if k > MAXWEIGHT_BUDGET:
        raise BudgetExceeded(f"exact MaxWeight limited to k <= {MAXWEIGHT_BUDGET}, got {k}")
    if k < 1:
        raise InvalidRequirement(f"k must be a positive integer, got {k}")
    classes = sorted((v for v, c in class_counts.items() if c > 0), reverse=True)
    for v in classes:
        if v < 1 or v > k:
            raise InvalidRequirement(f"requirement {v} outside [1, {k}]")

    # best[i][c]: optimum using classes[i:] with c free servers.
    m = len(classes)
    best = [[0] * (k + 1) for _ in range(m + 1)]
    for i in range(m - 1, -1, -1):
        v, count = classes[i], class_counts[classes[i]]
        for c in range(k + 1):
            best[i][c] = max(z * count + best[i + 1][c - z * v] for z in range(min(count, c // v) + 1))

    packing, free = {}, k
    for i, v in enumerate(classes):
        count = class_counts[v]
        for z in range(min(count, free // v), -1, -1):
            if z * count + best[i + 1][free - z * v] == best[i][free]:
                break
        if z:
            packing[v] = z
        free -= z * v
    return packing


def maxweight_objective(class_counts: dict[int, int], packing: dict[int, int]) -> int:
    return sum(class_counts[v] * z for v, z in packing.items())


def brute_force_maxweight(k: int, class_counts: dict[int, int]) -> int:
    """Optimal objective by enumerating every feasible packing."""
    classes = sorted(class_counts)
    ranges = [range(class_counts[v] + 1) for v in classes]
    best = 0
    for z in itertools.product(*ranges):
        if sum(v * zv for v, zv in zip(classes, z)) <= k:
            best = max(best, sum(class_counts[v] * zv for v, zv in zip(classes, z)))
    return best
