"""Layer optimizers: the contract every layer implements plus three concrete
layers (success-history adaptive, bimodal self-adaptive, fixed-parameter
classic DE).

Each layer owns its private state (history memories, archive, per-individual
parameter tables) and monitors the whole population: ``propose`` may read
any member as a mutation donor, while ``feedback`` and ``end_generation``
mutate only the layer's own state.  Proposals are generated in batches (one
call covers all targets assigned to the layer this generation); the
single-target ``propose`` is a batch of one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import de_ops
from .core import Bounds, Population, RandomSource, repair_bounds
from .de_ops import Archive, InsufficientPopulation


@dataclass
class TrialProposal:
    """A bound-repaired trial vector plus the parameters that produced it."""

    trial: np.ndarray
    layer_id: int
    f_used: float
    cr_used: float
    target_genome: np.ndarray
    aux: dict = field(default_factory=dict)


class BatchProposals:
    """Column-wise stack of proposals for one layer's targets."""

    def __init__(self, layer_id, targets, trials, f_used, cr_used, target_genomes, aux=None):
        self.layer_id = layer_id
        self.targets = np.asarray(targets, dtype=np.int64)
        self.trials = trials
        self.f_used = np.asarray(f_used, dtype=float)
        self.cr_used = np.asarray(cr_used, dtype=float)
        self.target_genomes = target_genomes
        self.aux = aux or {}

    def __len__(self):
        return len(self.targets)

    def one(self, pos: int) -> TrialProposal:
        aux = {k: v[pos] for k, v in self.aux.items()}
        return TrialProposal(self.trials[pos], self.layer_id, float(self.f_used[pos]),
                             float(self.cr_used[pos]), self.target_genomes[pos], aux)


class Layer:
    """Contract shared by all layer optimizers."""

    def __init__(self, layer_id: int, name: str):
        self.layer_id = layer_id
        self.name = name

    def initialize(self, population: Population, rng: RandomSource) -> None:
        """Run-start hook, called once after the initial population exists."""

    def begin_generation(self, population: Population) -> None:
        """Generation-start hook (e.g. pin the best member for best/* moves)."""

    def propose_batch(self, targets, population: Population, rng: RandomSource) -> BatchProposals:
        raise NotImplementedError

    def propose(self, i: int, population: Population, rng: RandomSource) -> TrialProposal:
        return self.propose_batch([i], population, rng).one(0)

    def feedback_batch(self, batch: BatchProposals, positions, target_fitness, trial_fitness,
                       rng: RandomSource) -> None:
        """Per-trial outcome report for the given batch positions."""

    def feedback(self, i: int, proposal: TrialProposal, target_fitness: float,
                 trial_fitness: float, rng: RandomSource) -> None:
        batch = BatchProposals(self.layer_id, [i], proposal.trial[None], [proposal.f_used],
                               [proposal.cr_used], proposal.target_genome[None],
                               {k: np.asarray([v]) for k, v in proposal.aux.items()})
        self.feedback_batch(batch, [0], np.asarray([target_fitness]),
                            np.asarray([trial_fitness]), rng)

    def end_generation(self) -> None:
        """Settle generation-wise adaptation (e.g. history memory update)."""

    def state_signature(self):
        """Hashable snapshot of the layer's private state (isolation tests)."""
        return ()


def _draw_positive_cauchy(loc, rng: RandomSource, scale: float = 0.1) -> np.ndarray:
    """Cauchy draws around per-row locations, redrawn while <= 0, clipped to 1."""
    loc = np.asarray(loc, dtype=float)
    f = loc + scale * rng.cauchy(loc.shape)
    bad = f <= 0.0
    while bad.any():
        f[bad] = loc[bad] + scale * rng.cauchy(int(bad.sum()))
        bad = f <= 0.0
    return np.minimum(f, 1.0)


class ShadeLayer(Layer):
    """Success-history parameter adaptation over current-to-pbest/1/bin.

    Ring buffers ``m_f``/``m_cr`` of length H hold location parameters for
    the Cauchy (F) and normal (CR) draws.  Strictly improving trials feed the
    generation success sets; at generation end one memory slot is overwritten
    with the improvement-weighted Lehmer mean of F and the weighted
    arithmetic mean of CR, and the write cursor advances cyclically.
    Defeated parents enter the external archive used by the r2 donor.
    """

    def __init__(self, layer_id: int, np_size: int, bounds: Bounds,
                 history_length: Optional[int] = None, f_init: float = 0.7,
                 cr_init: float = 0.5, p_range=None, name: str = "shade"):
        super().__init__(layer_id, name)
        self.bounds = bounds
        self.h = int(history_length) if history_length else int(np_size)
        self.m_f = np.full(self.h, float(f_init))
        self.m_cr = np.full(self.h, float(cr_init))
        self.k = 0
        self.archive = Archive(np_size, bounds.dimension)
        self.s_f: list = []
        self.s_cr: list = []
        self.s_df: list = []
        if p_range is None:
            lo = 2.0 / np_size
            p_range = (lo, max(0.2, lo))
        self.p_range = p_range

    def propose_batch(self, targets, population, rng):
        k = len(targets)
        r = rng.integers(self.h, size=k)
        cr = np.clip(rng.normal(self.m_cr[r], 0.1), 0.0, 1.0)
        f = _draw_positive_cauchy(self.m_f[r], rng)
        p = rng.uniform(self.p_range[0], self.p_range[1], size=k)
        mutants, pbest, r1, r2 = de_ops.mutate_pbest_batch(targets, population,
                                                           self.archive, f, p, rng)
        parents = population.genomes[np.asarray(targets)]
        trials = de_ops.crossover_binomial(parents, mutants, cr, rng)
        trials = repair_bounds(trials, parents, self.bounds)
        return BatchProposals(self.layer_id, targets, trials, f, cr, parents.copy(),
                              {"pbest": pbest, "r1": r1, "r2": r2})

    def feedback_batch(self, batch, positions, target_fitness, trial_fitness, rng):
        positions = np.asarray(positions, dtype=np.int64)
        improved = trial_fitness < target_fitness
        if not improved.any():
            return
        won = positions[improved]
        self.s_f.extend(batch.f_used[won].tolist())
        self.s_cr.extend(batch.cr_used[won].tolist())
        self.s_df.extend((target_fitness[improved] - trial_fitness[improved]).tolist())
        self.archive.insert_many(batch.target_genomes[won], rng)

    def end_generation(self):
        if not self.s_f:
            return
        f = np.asarray(self.s_f)
        cr = np.asarray(self.s_cr)
        w = np.asarray(self.s_df)
        w = w / w.sum()
        self.m_f[self.k] = np.sum(w * f * f) / np.sum(w * f)
        self.m_cr[self.k] = np.sum(w * cr)
        self.k = (self.k + 1) % self.h
        self.s_f.clear()
        self.s_cr.clear()
        self.s_df.clear()

    def state_signature(self):
        return (self.m_f.tobytes(), self.m_cr.tobytes(), self.k,
                self.archive.members.tobytes(), tuple(self.s_f), tuple(self.s_cr),
                tuple(self.s_df))


class BiDLayer(Layer):
    """Bimodal self-adaptive parameter scheme over the same mutation engine.

    Every individual keeps its own (F, CR) pair for the whole run.  A pair
    is retained while the individual's trials strictly improve and resampled
    from the bimodal Cauchy mixture on failure: F from cauchy(0.65, 0.1) or
    cauchy(1.0, 0.1) with equal probability (redrawn while <= 0, clipped to
    1), CR from cauchy(0.1, 0.1) or cauchy(0.95, 0.1) clipped to [0, 1].
    """

    F_LOCS = (0.65, 1.0)
    CR_LOCS = (0.1, 0.95)

    def __init__(self, layer_id: int, np_size: int, bounds: Bounds, p_range=None,
                 name: str = "bid"):
        super().__init__(layer_id, name)
        self.bounds = bounds
        self.np_size = int(np_size)
        self.mem_f = np.empty(self.np_size)
        self.mem_cr = np.empty(self.np_size)
        self.archive = Archive(np_size, bounds.dimension)
        if p_range is None:
            lo = 2.0 / np_size
            p_range = (lo, max(0.2, lo))
        self.p_range = p_range

    def initialize(self, population, rng):
        self._resample(np.arange(self.np_size), rng)

    def sample_f(self, count: int, rng: RandomSource) -> np.ndarray:
        loc = np.where(rng.random(count) < 0.5, self.F_LOCS[0], self.F_LOCS[1])
        f = loc + 0.1 * rng.cauchy(count)
        bad = f <= 0.0
        while bad.any():
            n = int(bad.sum())
            loc = np.where(rng.random(n) < 0.5, self.F_LOCS[0], self.F_LOCS[1])
            f[bad] = loc + 0.1 * rng.cauchy(n)
            bad = f <= 0.0
        return np.minimum(f, 1.0)

    def sample_cr(self, count: int, rng: RandomSource) -> np.ndarray:
        loc = np.where(rng.random(count) < 0.5, self.CR_LOCS[0], self.CR_LOCS[1])
        return np.clip(loc + 0.1 * rng.cauchy(count), 0.0, 1.0)

    def _resample(self, indices, rng):
        self.mem_f[indices] = self.sample_f(len(indices), rng)
        self.mem_cr[indices] = self.sample_cr(len(indices), rng)

    def propose_batch(self, targets, population, rng):
        targets = np.asarray(targets, dtype=np.int64)
        f = self.mem_f[targets].copy()
        cr = self.mem_cr[targets].copy()
        p = rng.uniform(self.p_range[0], self.p_range[1], size=len(targets))
        mutants, pbest, r1, r2 = de_ops.mutate_pbest_batch(targets, population,
                                                           self.archive, f, p, rng)
        parents = population.genomes[targets]
        trials = de_ops.crossover_binomial(parents, mutants, cr, rng)
        trials = repair_bounds(trials, parents, self.bounds)
        return BatchProposals(self.layer_id, targets, trials, f, cr, parents.copy(),
                              {"pbest": pbest, "r1": r1, "r2": r2})

    def feedback_batch(self, batch, positions, target_fitness, trial_fitness, rng):
        positions = np.asarray(positions, dtype=np.int64)
        improved = trial_fitness < target_fitness
        if improved.any():
            self.archive.insert_many(batch.target_genomes[positions[improved]], rng)
        failed = batch.targets[positions[~improved]]
        if len(failed):
            self._resample(failed, rng)

    def state_signature(self):
        return (self.mem_f.tobytes(), self.mem_cr.tobytes(),
                self.archive.members.tobytes())


class FixedDELayer(Layer):
    """Classic DE with constant F, CR and a fixed mutation strategy.

    Stateless adaptation: feedback and end_generation do nothing.  For the
    best/* strategies the best member is pinned at generation start.
    """

    def __init__(self, layer_id: int, bounds: Bounds, strategy: str = "rand/1",
                 f: float = 0.7, cr: float = 0.5, name: Optional[str] = None):
        if strategy not in de_ops.DONOR_COUNTS:
            raise ValueError(f"unknown mutation strategy {strategy!r}")
        super().__init__(layer_id, name or f"de-{strategy.replace('/', '-')}")
        self.bounds = bounds
        self.strategy = strategy
        self.f = float(f)
        self.cr = float(cr)
        self._best_index: Optional[int] = None

    def begin_generation(self, population):
        self._best_index = population.best_index()

    def propose_batch(self, targets, population, rng):
        k = len(targets)
        mutants, donors = de_ops.mutate_classic_batch(
            self.strategy, targets, population, self.f, rng, best_index=self._best_index)
        parents = population.genomes[np.asarray(targets)]
        trials = de_ops.crossover_binomial(parents, mutants, self.cr, rng)
        trials = repair_bounds(trials, parents, self.bounds)
        return BatchProposals(self.layer_id, targets, trials, np.full(k, self.f),
                              np.full(k, self.cr), parents.copy(), {"donors": donors})

    def state_signature(self):
        return (self.strategy, self.f, self.cr)


@dataclass
class LayerSpec:
    """Declarative layer configuration, buildable per run."""

    kind: str                      # "shade" | "bid" | "fixed"
    strategy: str = "rand/1"      # fixed layers only
    f: float = 0.7
    cr: float = 0.5
    history_length: Optional[int] = None   # shade: defaults to NP
    f_init: float = 0.7
    cr_init: float = 0.5

    def build(self, layer_id: int, np_size: int, bounds: Bounds) -> Layer:
        if self.kind == "shade":
            return ShadeLayer(layer_id, np_size, bounds, self.history_length,
                              self.f_init, self.cr_init)
        if self.kind == "bid":
            return BiDLayer(layer_id, np_size, bounds)
        if self.kind == "fixed":
            return FixedDELayer(layer_id, bounds, self.strategy, self.f, self.cr)
        raise ValueError(f"unknown layer kind {self.kind!r}")

    @property
    def name(self) -> str:
        if self.kind == "fixed":
            return f"de-{self.strategy.replace('/', '-')}"
        return self.kind
