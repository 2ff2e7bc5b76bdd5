"""Classic differential-evolution variation operators.

Mutation strategies (rand/1, best/1, rand/2, best/2, current-to-best/1 and
current-to-pbest/1 with an optional external archive), binomial crossover
and one-to-one survivor selection.  The mutation samplers come in batched
form, drawing donors for many target indices at once; the single-target
functions are thin wrappers over the batched cores.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .core import Individual, Population, RandomSource

# Donor count required by each classic strategy (all distinct, none equal to
# the target index).
DONOR_COUNTS = {
    "rand/1": 3,
    "best/1": 2,
    "rand/2": 5,
    "best/2": 4,
    "current-to-best/1": 2,
}

STRATEGIES = tuple(DONOR_COUNTS)


class InsufficientPopulation(ValueError):
    """Population too small to draw the distinct donors a strategy needs."""


class Archive(object):
    """External archive of defeated parent genomes (JADE/SHADE lineage).

    Fixed capacity; overflow evicts a uniformly random member.
    """

    def __init__(self, capacity: int, dimension: int):
        self.capacity = int(capacity)
        self._rows = np.empty((self.capacity, dimension))
        self._size = 0

    def __len__(self) -> int:
        return self._size

    @property
    def members(self) -> np.ndarray:
        return self._rows[: self._size]

    def insert(self, genome: np.ndarray, rng: RandomSource) -> None:
        if self._size < self.capacity:
            self._rows[self._size] = genome
            self._size += 1
        else:
            self._rows[int(rng.integers(self.capacity))] = genome

    def insert_many(self, genomes: np.ndarray, rng: RandomSource) -> None:
        for row in genomes:
            self.insert(row, rng)


def sample_distinct(count, exclude, pool_size, rng: RandomSource) -> np.ndarray:
    """`count` distinct indices drawn uniformly from [0, pool_size) \\ exclude."""
    exclude = set(int(e) for e in exclude)
    if count > pool_size - len(exclude):
        raise InsufficientPopulation(
            f"need {count} distinct indices from {pool_size - len(exclude)} available"
        )
    allowed = np.array(sorted(set(range(pool_size)) - exclude), dtype=np.int64)
    pick = allowed[rng.shuffled(len(allowed))[:count]]
    return pick


def _distinct_rows(targets, count, pool_size, rng: RandomSource) -> np.ndarray:
    """Per-row distinct donor indices, each row excluding its own target.

    Rejection sampling: rows containing a duplicate are redrawn until all
    rows hold `count` distinct indices, all different from the row's target.
    """
    if count > pool_size - 1:
        raise InsufficientPopulation(
            f"need {count} distinct donors from {pool_size - 1} available"
        )
    targets = np.asarray(targets, dtype=np.int64)
    k = len(targets)
    donors = rng.integers(pool_size - 1, size=(k, count))
    donors += donors >= targets[:, None]
    if count > 1:
        bad = _has_duplicate_rows(donors)
        while bad.any():
            idx = np.flatnonzero(bad)
            redraw = rng.integers(pool_size - 1, size=(len(idx), count))
            redraw += redraw >= targets[idx, None]
            donors[idx] = redraw
            bad[idx] = _has_duplicate_rows(redraw)
    return donors


def _has_duplicate_rows(donors: np.ndarray) -> np.ndarray:
    s = np.sort(donors, axis=1)
    return (s[:, 1:] == s[:, :-1]).any(axis=1)


def combine_classic(strategy, target, best, donors, F):
    """The mutation arithmetic of a classic strategy, donors given explicitly.

    `donors` holds the donor genomes in draw order; `target` and `best` are
    only read by the strategies that use them.  Row-wise over stacks.
    """
    F = np.asarray(F, dtype=float)
    if F.ndim:
        F = F[:, None]
    d = donors
    if strategy == "rand/1":
        return d[0] + F * (d[1] - d[2])
    if strategy == "best/1":
        return best + F * (d[0] - d[1])
    if strategy == "rand/2":
        return d[0] + F * (d[1] - d[2]) + F * (d[3] - d[4])
    if strategy == "best/2":
        return best + F * (d[0] - d[1]) + F * (d[2] - d[3])
    if strategy == "current-to-best/1":
        return target + F * (best - target) + F * (d[0] - d[1])
    raise ValueError(f"unknown mutation strategy {strategy!r}")


def combine_current_to_pbest(target, pbest, r1, r2, F):
    F = np.asarray(F, dtype=float)
    if F.ndim:
        F = F[:, None]
    return target + F * (pbest - target) + F * (r1 - r2)


def mutate_classic_batch(strategy, targets, population: Population, F, rng: RandomSource,
                         best_index: Optional[int] = None):
    """Classic-strategy mutants for many targets; returns (mutants, donors)."""
    count = DONOR_COUNTS[strategy]
    donors_idx = _distinct_rows(targets, count, population.size, rng)
    X = population.genomes
    donors = [X[donors_idx[:, c]] for c in range(count)]
    best = None
    if strategy.startswith("best") or strategy == "current-to-best/1":
        b = population.best_index() if best_index is None else best_index
        best = X[b]
    mutants = combine_classic(strategy, X[np.asarray(targets)], best, donors, F)
    return mutants, donors_idx


def mutate_classic(strategy, target_index, population: Population, F, rng: RandomSource,
                   best_index: Optional[int] = None) -> np.ndarray:
    """One mutant per the selected classic strategy (no bound repair here)."""
    mutants, _ = mutate_classic_batch(strategy, [target_index], population, F, rng, best_index)
    return mutants[0]


def mutate_pbest_batch(targets, population: Population, archive, F, p, rng: RandomSource):
    """current-to-pbest/1 mutants for many targets.

    For each row: pbest is drawn uniformly from the ceil(p * NP) fittest
    members, r1 from the population excluding the target, r2 from population
    plus archive excluding the target and r1.  Returns the mutants and the
    (pbest, r1, r2) index columns; r2 indices >= NP point into the archive.
    """
    targets = np.asarray(targets, dtype=np.int64)
    k = len(targets)
    NP = population.size
    if NP < 3:
        raise InsufficientPopulation("current-to-pbest/1 needs at least 3 members")
    X = population.genomes
    F = np.asarray(F, dtype=float)
    p = np.asarray(p, dtype=float)

    order = population.sorted_indices()
    n_best = np.ceil(p * NP).astype(np.int64)
    pbest_idx = order[(rng.random(k) * n_best).astype(np.int64)]

    r1 = rng.integers(NP - 1, size=k)
    r1 += r1 >= targets

    arch_size = len(archive) if archive is not None else 0
    pool = NP + arch_size
    lo = np.minimum(targets, r1)
    hi = np.maximum(targets, r1)
    r2 = rng.integers(pool - 2, size=k)
    r2 += r2 >= lo
    r2 += r2 >= hi

    if arch_size:
        x_r2 = np.empty((k, population.dimension))
        in_pop = r2 < NP
        x_r2[in_pop] = X[r2[in_pop]]
        x_r2[~in_pop] = archive.members[r2[~in_pop] - NP]
    else:
        x_r2 = X[r2]

    mutants = combine_current_to_pbest(X[targets], X[pbest_idx], X[r1], x_r2, F)
    return mutants, pbest_idx, r1, r2


def mutate_current_to_pbest(target_index, population: Population, archive, F, p,
                            rng: RandomSource) -> np.ndarray:
    mutants, _, _, _ = mutate_pbest_batch([target_index], population, archive,
                                          [F], [p], rng)
    return mutants[0]


def crossover_binomial(target, mutant, CR, rng: RandomSource):
    """Binomial crossover; at least one coordinate always comes from the mutant.

    Row-wise over stacks: `target`/`mutant` may be (D,) or (B, D) with CR a
    scalar or per-row vector.
    """
    target = np.asarray(target, dtype=float)
    mutant = np.asarray(mutant, dtype=float)
    single = target.ndim == 1
    T = np.atleast_2d(target)
    M = np.atleast_2d(mutant)
    b, d = T.shape
    cr = np.asarray(CR, dtype=float).reshape(-1, 1) if np.ndim(CR) else CR
    take = rng.random((b, d)) < cr
    j_rand = rng.integers(d, size=b)
    take[np.arange(b), j_rand] = True
    trial = np.where(take, M, T)
    return trial[0] if single else trial


def select_survivor(target: Individual, trial: Individual):
    """One-to-one selection; the trial survives ties (<=)."""
    if trial.fitness <= target.fitness:
        return trial, True
    return target, False
