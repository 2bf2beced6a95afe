"""Job size and class distributions.

Every distribution describes the joint law of a job's size ``S`` and its
class ``C``.  Sizes are in units of work: a job served at total rate 1
finishes after ``size`` time units.  Classes carry the static information a
scheduler may look at (server requirement, parallelism threshold, known
size).

Besides sampling, each distribution knows its first two moments and
``rem_sup``, the supremum over classes and ages of the expected remaining
size.  Both are closed forms, never numerical estimates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import InfiniteMoment, InvalidDistribution

PROB_TOL = 1e-12


@dataclass(frozen=True)
class JobClass:
    """Static, scheduler-visible attributes of a job.

    ``servers`` is the server requirement of a multiserver job,
    ``threshold`` the parallelism threshold of a threshold-parallel job and
    ``known_size`` the original size when sizes are revealed to the policy.
    """

    servers: int | None = None
    threshold: int | None = None
    known_size: float | None = None
    label: str | None = None


UNIT_CLASS = JobClass()


@dataclass(frozen=True)
class Moments:
    mean: float
    second_moment: float

    @property
    def excess_mean(self) -> float:
        """Mean of the equilibrium (excess) distribution, E[S^2] / 2E[S]."""
        return self.second_moment / (2.0 * self.mean)

    @property
    def scv(self) -> float:
        """Squared coefficient of variation."""
        return self.second_moment / self.mean**2 - 1.0


class SizeClassDistribution:
    """Interface shared by every supported variant."""

    def sample_many(self, rng: np.random.Generator, count: int):
        """Draw ``count`` i.i.d. jobs.

        Returns ``(sizes, classes)`` where ``sizes`` is a float array and
        ``classes`` a list of :class:`JobClass`, one per job.
        """
        sizes, idx = self.sample_indexed(rng, count)
        classes = self.classes
        return sizes, [classes[i] for i in idx.tolist()]

    def sample_indexed(self, rng: np.random.Generator, count: int):
        """Like :meth:`sample_many` but classes come as indices into ``classes``."""
        return self._sizes(rng, count), np.zeros(count, dtype=np.intp)

    def _sizes(self, rng: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def moments(self) -> Moments:
        raise NotImplementedError

    def rem_sup(self) -> float:
        raise NotImplementedError

    def mean_residual(self, age: float) -> float:
        """E[S - age | S > age]."""
        raise NotImplementedError

    @property
    def classes(self) -> tuple[JobClass, ...]:
        return (UNIT_CLASS,)


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0.0 and math.isfinite(value)):
        raise InvalidDistribution(f"{name} must be a positive finite number, got {value!r}")
    return value


def _check_probabilities(probs: Sequence[float]) -> None:
    if not probs:
        raise InvalidDistribution("at least one branch is required")
    for p in probs:
        _positive("probability", p)
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_TOL:
        raise InvalidDistribution(f"probabilities sum to {total!r}, not 1")


@dataclass(frozen=True)
class Exponential(SizeClassDistribution):
    rate: float

    def __post_init__(self):
        object.__setattr__(self, "rate", _positive("rate", self.rate))

    def _sizes(self, rng, count):
        return rng.exponential(1.0 / self.rate, size=count)

    def moments(self):
        return Moments(1.0 / self.rate, 2.0 / self.rate**2)

    def rem_sup(self):
        return 1.0 / self.rate

    def mean_residual(self, age):
        return 1.0 / self.rate


@dataclass(frozen=True)
class Hyperexponential(SizeClassDistribution):
    """Mixture of exponentials given as ``(probability, rate)`` branches."""

    branches: tuple[tuple[float, float], ...]

    def __post_init__(self):
        branches = tuple((float(p), _positive("rate", r)) for p, r in self.branches)
        _check_probabilities([p for p, _ in branches])
        object.__setattr__(self, "branches", branches)

    @property
    def probs(self) -> np.ndarray:
        return np.array([p for p, _ in self.branches])

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for _, r in self.branches])

    def _sizes(self, rng, count):
        idx = rng.choice(len(self.branches), size=count, p=self.probs)
        return rng.exponential(1.0, size=count) / self.rates[idx]

    def moments(self):
        mean = math.fsum(p / r for p, r in self.branches)
        second = math.fsum(2.0 * p / r**2 for p, r in self.branches)
        return Moments(mean, second)

    def rem_sup(self):
        # Mean residual life of a mixture of exponentials increases to the
        # slowest branch's mean.
        return 1.0 / min(r for _, r in self.branches)

    def mean_residual(self, age):
        rates = self.rates
        # Shifting by the slowest rate keeps the exponents small at large ages.
        logw = np.log(self.probs) - (rates - rates.min()) * age
        return float(np.exp(logsumexp(logw - np.log(self.rates)) - logsumexp(logw)))


@dataclass(frozen=True)
class Deterministic(SizeClassDistribution):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", _positive("value", self.value))

    def _sizes(self, rng, count):
        return np.full(count, self.value)

    def moments(self):
        return Moments(self.value, self.value**2)

    def rem_sup(self):
        return self.value

    def mean_residual(self, age):
        return self.value - age if age < self.value else math.nan


@dataclass(frozen=True)
class Pareto(SizeClassDistribution):
    """Pareto with tail P(S > s) = (x_min / s)^alpha.

    Kept for demonstrating an infinite ``rem_sup``; the simulator refuses it.
    """

    alpha: float
    x_min: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", _positive("alpha", self.alpha))
        object.__setattr__(self, "x_min", _positive("x_min", self.x_min))

    def _sizes(self, rng, count):
        return (rng.pareto(self.alpha, size=count) + 1.0) * self.x_min

    def moments(self):
        if self.alpha <= 2.0:
            raise InfiniteMoment(f"Pareto(alpha={self.alpha}) has no finite second moment")
        a, m = self.alpha, self.x_min
        return Moments(a * m / (a - 1.0), a * m * m / (a - 2.0))

    def rem_sup(self):
        return math.inf

    def mean_residual(self, age):
        if self.alpha <= 1.0:
            return math.inf
        if age < self.x_min:
            return self.alpha * self.x_min / (self.alpha - 1.0) - age
        return age / (self.alpha - 1.0)


@dataclass(frozen=True)
class Atom:
    """One class of a joint distribution.

    A job drawn from this atom has class ``cls`` and size ``scale * X`` with
    ``X`` drawn from ``dist``.  For multiserver jobs ``X`` is the time in
    service and ``scale = v / k``.
    """

    prob: float
    cls: JobClass
    dist: SizeClassDistribution
    scale: float = 1.0

    def __post_init__(self):
        if isinstance(self.dist, JointDiscrete):
            raise InvalidDistribution("atoms cannot nest joint distributions")
        object.__setattr__(self, "scale", _positive("scale", self.scale))


@dataclass(frozen=True)
class JointDiscrete(SizeClassDistribution):
    atoms: tuple[Atom, ...] = field(default_factory=tuple)

    def __post_init__(self):
        atoms = tuple(self.atoms)
        _check_probabilities([a.prob for a in atoms])
        object.__setattr__(self, "atoms", atoms)

    @property
    def classes(self):
        return tuple(a.cls for a in self.atoms)

    def sample_indexed(self, rng, count):
        probs = np.array([a.prob for a in self.atoms])
        idx = rng.choice(len(self.atoms), size=count, p=probs)
        sizes = np.empty(count)
        for i, atom in enumerate(self.atoms):
            mask = idx == i
            sizes[mask] = atom.scale * atom.dist._sizes(rng, int(mask.sum()))
        return sizes, idx

    def _sizes(self, rng, count):
        return self.sample_indexed(rng, count)[0]

    def moments(self):
        parts = [(a.prob, a.scale, a.dist.moments()) for a in self.atoms]
        mean = math.fsum(p * s * m.mean for p, s, m in parts)
        second = math.fsum(p * s * s * m.second_moment for p, s, m in parts)
        return Moments(mean, second)

    def rem_sup(self):
        # sup over (class, age) splits into a max over classes.
        return max(a.scale * a.dist.rem_sup() for a in self.atoms)


def hyperexp(*branches: tuple[float, float]) -> Hyperexponential:
    return Hyperexponential(tuple(branches))


def multiserver_jobs(k: int, atoms: Sequence[tuple[float, int, SizeClassDistribution]]) -> JointDiscrete:
    """Joint (V, X) law of a multiserver-job model; size is ``v * x / k``."""
    return JointDiscrete(tuple(
        Atom(p, JobClass(servers=int(v)), dist, scale=int(v) / k) for p, v, dist in atoms
    ))


def threshold_jobs(atoms: Sequence[tuple[float, int, SizeClassDistribution]]) -> JointDiscrete:
    """Joint (S, L) law of a threshold-parallelism model."""
    return JointDiscrete(tuple(
        Atom(p, JobClass(threshold=int(t)), dist) for p, t, dist in atoms
    ))


def unit_mean_hyperexp(x: float) -> Hyperexponential:
    """Unit-mean hyperexponential with rem_sup equal to ``x``."""
    x = float(x)
    p = 1.0 / (2.0 * x)
    return Hyperexponential(((p, 1.0 / x), (1.0 - p, (2.0 * x - 1.0) / x)))


def sample(dist: SizeClassDistribution, rng: np.random.Generator):
    """Draw one ``(size, class)`` pair."""
    sizes, classes = dist.sample_many(rng, 1)
    return float(sizes[0]), classes[0]


def moments(dist: SizeClassDistribution) -> Moments:
    return dist.moments()


def rem_sup(dist: SizeClassDistribution) -> float:
    return dist.rem_sup()


def make_rng(seed: int, *purpose: int) -> np.random.Generator:
    """Counter-based stream for one ``(seed, purpose...)`` key."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *purpose])))
