"""Shared domain types: box bounds, populations, budget accounting and the
seeded random source every stochastic component draws from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Solution error values strictly below this floor are reported as zero.
ERROR_FLOOR = 1e-8

# Floating-point undershoot tolerance when a best fitness lands a hair below
# the known optimum.
_UNDERSHOOT_TOL = 1e-6


class BudgetExhausted(Exception):
    """Raised when an objective evaluation is requested past the budget."""


class Bounds:
    """Box constraints: ``lower[j] < upper[j]`` for every coordinate."""

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("lower and upper must be 1-D vectors of equal length")
        if not np.all(self.lower < self.upper):
            raise ValueError("every lower bound must be strictly below its upper bound")

    @classmethod
    def symmetric(cls, dimension: int, half_width: float) -> "Bounds":
        return cls(np.full(dimension, -half_width), np.full(dimension, half_width))

    @property
    def dimension(self) -> int:
        return self.lower.size

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def sample(self, count: int, rng: "RandomSource") -> np.ndarray:
        """Uniform sample of `count` genomes inside the box."""
        u = rng.random((count, self.dimension))
        return self.lower + u * (self.upper - self.lower)


@dataclass
class Individual:
    """One candidate solution: a real genome plus its evaluated fitness."""

    genome: np.ndarray
    fitness: float


class Population:
    """Ordered collection of NP genomes with their fitness values.

    Backed by a ``(NP, D)`` array so layer optimizers can propose trial
    vectors for many targets at once.  ``sorted_indices`` caches the fitness
    argsort; the cache is invalidated whenever a member is replaced.
    """

    def __init__(self, genomes, fitness, generation: int = 0):
        self.genomes = np.asarray(genomes, dtype=float)
        self.fitness = np.asarray(fitness, dtype=float)
        if self.genomes.ndim != 2 or self.fitness.shape != (self.genomes.shape[0],):
            raise ValueError("genomes must be (NP, D) with one fitness per row")
        self.generation = generation
        self._sorted = None

    @property
    def size(self) -> int:
        return self.genomes.shape[0]

    @property
    def dimension(self) -> int:
        return self.genomes.shape[1]

    def member(self, i: int) -> Individual:
        return Individual(self.genomes[i].copy(), float(self.fitness[i]))

    def best_index(self) -> int:
        return int(self.sorted_indices()[0])

    def sorted_indices(self) -> np.ndarray:
        """Indices ordered by ascending fitness, ties kept in index order."""
        if self._sorted is None:
            self._sorted = np.argsort(self.fitness, kind="stable")
        return self._sorted

    def replace(self, i: int, genome: np.ndarray, fitness: float) -> None:
        self.genomes[i] = genome
        self.fitness[i] = fitness
        self._sorted = None

    def replace_many(self, indices, genomes, fitness) -> None:
        if len(indices):
            self.genomes[indices] = genomes
            self.fitness[indices] = fitness
            self._sorted = None


@dataclass
class Problem:
    """A minimization problem over a box domain.

    ``evaluate`` must be a deterministic pure function accepting either a
    single genome ``(D,)`` or a stack ``(B, D)`` and returning a float or a
    ``(B,)`` array respectively.
    """

    id: str
    dimension: int
    bounds: Bounds
    optimum_value: float
    evaluate: Callable = field(repr=False)


@dataclass
class Budget:
    """Counts objective evaluations; one unit per genome evaluated."""

    max_evaluations: int
    used: int = 0

    @property
    def remaining(self) -> int:
        return self.max_evaluations - self.used


class RandomSource:
    """Deterministic random source shared by a single run.

    The same seed yields the identical draw sequence.  ``random`` draws lie
    in the open interval (0, 1) so that ``ceil(u * M)`` constructions can
    never produce 0 nor exceed ``M``.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._g = np.random.Generator(np.random.PCG64(self.seed))

    def random(self, size=None):
        """Open-interval uniform draw(s) in (0, 1)."""
        u = self._g.random(size)
        if size is None:
            while u == 0.0:
                u = self._g.random()
            return u
        zero = u == 0.0
        while zero.any():
            u[zero] = self._g.random(int(zero.sum()))
            zero = u == 0.0
        return u

    def uniform(self, low, high, size=None):
        return low + (np.asarray(high) - low) * self.random(size)

    def integers(self, n, size=None):
        """Uniform integer(s) in [0, n)."""
        return self._g.integers(0, n, size=size)

    def normal(self, loc, scale, size=None):
        return self._g.normal(loc, scale, size)

    def cauchy(self, size=None):
        return self._g.standard_cauchy(size)

    def shuffled(self, n: int) -> np.ndarray:
        return self._g.permutation(n)


def evaluate(problem: Problem, genome, budget: Budget) -> float:
    """Evaluate one genome against the budget.

    Raises BudgetExhausted when no evaluations remain; otherwise increments
    ``budget.used`` by exactly one.
    """
    if budget.remaining <= 0:
        raise BudgetExhausted(f"{budget.used}/{budget.max_evaluations} evaluations used")
    value = float(problem.evaluate(np.asarray(genome, dtype=float)))
    budget.used += 1
    return value


def evaluate_batch(problem: Problem, genomes: np.ndarray, budget: Budget) -> np.ndarray:
    """Evaluate rows of ``genomes`` in order until the budget runs out.

    Returns the fitness values of the rows that fit within the remaining
    budget; a result shorter than the input signals exhaustion.
    """
    k = min(len(genomes), budget.remaining)
    if k == 0:
        return np.empty(0)
    values = np.asarray(problem.evaluate(genomes[:k]), dtype=float).reshape(k)
    budget.used += k
    return values


def repair_bounds(child, parent, bounds: Bounds):
    """Midpoint bound repair.

    Every out-of-range coordinate is replaced by the midpoint between the
    violated bound and the parent's (in-range) coordinate; in-range
    coordinates pass through unchanged.  Accepts single genomes or stacks.
    """
    child = np.asarray(child, dtype=float)
    parent = np.asarray(parent, dtype=float)
    low = bounds.lower
    high = bounds.upper
    below = child < low
    above = child > high
    if not (below.any() or above.any()):
        return child
    out = np.where(below, 0.5 * (low + parent), child)
    out = np.where(above, 0.5 * (high + parent), out)
    return out


def error_value(fitness: float, optimum: float) -> float:
    """Solution error ``fitness - optimum`` with the reporting floor applied.

    Tiny negative differences (floating-point undershoot) clamp to zero;
    anything below -1e-6 indicates a broken optimum and raises.
    """
    diff = fitness - optimum
    if diff < -_UNDERSHOOT_TOL:
        raise ValueError(f"fitness {fitness} undercuts the declared optimum {optimum}")
    diff = max(diff, 0.0)
    return 0.0 if diff < ERROR_FLOOR else diff
