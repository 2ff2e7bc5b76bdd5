"""The multi-layer competitive-cooperative generation loop.

Each generation the population is fitness-ranked and a random head count
``top_g = ceil(u * NP * N)`` is drawn.  Individuals ranked within ``top_g``
receive one trial vector from every layer; every layer gets feedback on its
own trial and the fittest trial competes with the target.  The remaining
individuals receive a single trial from their preferred layer, keeping the
preference on success and reconnecting to a different random layer on
failure.  Ablation switches disable the multi-trial head (``no_rab``), the
preference dynamics (``no_ipls``), both (``neither``), or replace the
rank-based head with a uniformly random one (``no_fitness_bias``).

Two population-update semantics are provided: ``generational`` (default)
stages survivors and applies them at generation end, which allows all of a
layer's proposals to be generated and evaluated as one array batch;
``immediate`` writes each survivor back before the next individual is
processed.  Evaluation order is identical in both modes (population index
major, layer index minor), so budget accounting, truncation behavior and
new-best-solution bookkeeping follow the same rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import stats
from .core import (Budget, BudgetExhausted, Individual, Population, Problem,
                   RandomSource, error_value, evaluate, evaluate_batch)
from .layers import Layer, LayerSpec

ABLATIONS = ("full", "no_rab", "no_ipls", "neither", "no_fitness_bias")
UPDATE_MODES = ("generational", "immediate")

# (use_rab, use_ipls, fitness_bias) per ablation mode.
_ABLATION_FLAGS = {
    "full": (True, True, True),
    "no_rab": (False, True, True),
    "no_ipls": (True, False, True),
    "neither": (False, False, True),
    "no_fitness_bias": (True, True, False),
}


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class MlccConfig:
    """Configuration of one multi-layer run."""

    layers: Sequence[LayerSpec]
    np_size: int
    n_top: float = 0.05
    ablation: str = "full"
    top_g_override: Optional[int] = None
    update: str = "generational"
    share_interval: int = 50

    def validate(self) -> None:
        if len(self.layers) < 2:
            raise ConfigError("the multi-layer framework needs at least 2 layers")
        if not 0.0 < self.n_top <= 1.0:
            raise ConfigError(f"N must lie in (0, 1], got {self.n_top}")
        if self.np_size < 5:
            raise ConfigError("population size must be at least 5")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"unknown ablation mode {self.ablation!r}")
        if self.update not in UPDATE_MODES:
            raise ConfigError(f"unknown update mode {self.update!r}")
        if self.top_g_override is not None and not 1 <= self.top_g_override <= self.np_size:
            raise ConfigError("top_g override must lie in [1, NP]")


@dataclass
class RunRecord:
    """Everything one run reports."""

    algorithm: str
    problem: str
    seed: int
    final_error: float
    evaluations: int
    generations: int
    layer_names: List[str]
    best_error_trace: np.ndarray      # best-so-far error, entry 0 = after init
    eval_trace: np.ndarray            # cumulative evaluations per trace entry
    top_g_trace: np.ndarray           # drawn top_g per generation
    layer_shares: np.ndarray          # (intervals, M) fractions, rows sum to 1
    ar: Optional[float]               # mean new-best-producer rank, None if no events
    rank_frequency: np.ndarray        # NBS event count per rank 1..NP

    def to_json_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "problem": self.problem,
            "seed": self.seed,
            "final_error": self.final_error,
            "evaluations": self.evaluations,
            "generations": self.generations,
            "layer_names": list(self.layer_names),
            "best_error_trace": [float(v) for v in self.best_error_trace],
            "eval_trace": [int(v) for v in self.eval_trace],
            "top_g_trace": [int(v) for v in self.top_g_trace],
            "layer_shares": [[float(v) for v in row] for row in self.layer_shares],
            "ar": self.ar,
            "rank_frequency": [int(v) for v in self.rank_frequency],
        }


def fitness_ranks(population: Population) -> np.ndarray:
    """1-based fitness ranks; rank 1 is the smallest fitness, ties broken by
    the lower population index."""
    order = population.sorted_indices()
    ranks = np.empty(population.size, dtype=np.int64)
    ranks[order] = np.arange(1, population.size + 1)
    return ranks


def draw_top_g(rng: RandomSource, np_size: int, n_fraction: float) -> int:
    """ceil(u * NP * N) for a fresh open-interval uniform u."""
    return int(math.ceil(rng.random() * np_size * n_fraction))


def init_preferences(np_size: int, m_layers: int, rng: RandomSource) -> np.ndarray:
    """Initial layer preference per individual: ceil(u * M), stored 0-based."""
    return np.ceil(rng.random(np_size) * m_layers).astype(np.int64) - 1


def switch_preference(current: int, m_layers: int, rng: RandomSource) -> int:
    """Uniform draw over the layers excluding `current`."""
    v = int(math.ceil(rng.random() * (m_layers - 1))) - 1
    return v + 1 if v >= current else v


def ipls_update(ip: np.ndarray, i: int, succeeded: bool, context: str,
                m_layers: int, rng: RandomSource, best_layer: Optional[int] = None) -> None:
    """Preference dynamics.

    Inferior individuals keep their layer on success and reconnect to a
    different random layer on failure; head individuals adopt the winning
    layer on success and keep their preference on failure.
    """
    if context == "inferior":
        if not succeeded:
            ip[i] = switch_preference(int(ip[i]), m_layers, rng)
    elif context == "top":
        if succeeded:
            ip[i] = best_layer
    else:
        raise ValueError(f"unknown preference context {context!r}")


@dataclass
class RabResult:
    survivor: Individual
    succeeded: bool
    best_layer: Optional[int]
    trial_fitnesses: List[float]
    exhausted: bool


@dataclass
class InferiorResult:
    survivor: Individual
    succeeded: bool
    trial_fitness: Optional[float]
    exhausted: bool


def rab_evolve_top(i: int, layers: Sequence[Layer], problem: Problem,
                   population: Population, budget: Budget, rng: RandomSource) -> RabResult:
    """Multi-layer evolution of one head individual.

    Every layer proposes one trial against the same population snapshot.
    Trials are evaluated in layer order as the budget permits; each layer
    with an evaluated trial receives feedback against the target, then the
    fittest evaluated trial (ties to the lowest layer index) competes with
    the target under the <= survival rule.  Running out of budget mid-batch
    leaves the remaining layers without feedback and flags exhaustion.
    """
    proposals = [layer.propose(i, population, rng) for layer in layers]
    target_fit = float(population.fitness[i])
    fits: List[float] = []
    exhausted = False
    for prop in proposals:
        if budget.remaining <= 0:
            exhausted = True
            break
        fits.append(evaluate(problem, prop.trial, budget))
    for m, tf in enumerate(fits):
        layers[m].feedback(i, proposals[m], target_fit, tf, rng)
    if fits:
        b = int(np.argmin(fits))
        succeeded = fits[b] <= target_fit
        survivor = Individual(proposals[b].trial.copy(), fits[b]) if succeeded \
            else population.member(i)
    else:
        b, succeeded, survivor = None, False, population.member(i)
    return RabResult(survivor, succeeded, b, fits, exhausted)


def evolve_inferior(i: int, layer: Layer, problem: Problem, population: Population,
                    budget: Budget, rng: RandomSource) -> InferiorResult:
    """Single-trial evolution of one individual by its preferred layer."""
    if budget.remaining <= 0:
        return InferiorResult(population.member(i), False, None, True)
    prop = layer.propose(i, population, rng)
    tf = evaluate(problem, prop.trial, budget)
    target_fit = float(population.fitness[i])
    layer.feedback(i, prop, target_fit, tf, rng)
    succeeded = tf <= target_fit
    survivor = Individual(prop.trial.copy(), tf) if succeeded else population.member(i)
    return InferiorResult(survivor, succeeded, tf, False)


class _Engine:
    """One seeded run of the framework (or of a single standalone layer)."""

    def __init__(self, algorithm: str, layer_specs: Sequence[LayerSpec], np_size: int,
                 problem: Problem, budget: Budget, seed: int, *, n_top: float = 0.05,
                 use_rab: bool = True, use_ipls: bool = True, fitness_bias: bool = True,
                 top_g_override: Optional[int] = None, update: str = "generational",
                 share_interval: int = 50):
        if budget.max_evaluations < np_size:
            raise ConfigError("budget must cover at least the initial population")
        self.algorithm = algorithm
        self.problem = problem
        self.budget = budget
        self.rng = RandomSource(seed)
        self.seed = seed
        self.np_size = np_size
        self.layers = [spec.build(m, np_size, problem.bounds)
                       for m, spec in enumerate(layer_specs)]
        self.m = len(self.layers)
        self.n_top = n_top
        self.use_rab = use_rab and self.m > 1
        self.use_ipls = use_ipls and self.m > 1
        self.fitness_bias = fitness_bias
        self.top_g_override = top_g_override
        self.update = update
        self.share_interval = share_interval

        self.pop: Optional[Population] = None
        self.ip: Optional[np.ndarray] = None
        self.best_so_far = math.inf
        self.rank_archive = stats.RankArchive(np_size)
        self._share_counts = np.zeros(self.m)
        self._share_rows: List[np.ndarray] = []
        self._share_gens = 0
        self._trace_err: List[float] = []
        self._trace_evals: List[int] = []
        self._trace_top_g: List[int] = []

    # -- run ---------------------------------------------------------------

    def run(self) -> RunRecord:
        X = self.problem.bounds.sample(self.np_size, self.rng)
        fits = evaluate_batch(self.problem, X, self.budget)
        self.pop = Population(X, fits)
        for layer in self.layers:
            layer.initialize(self.pop, self.rng)
        if self.use_ipls:
            self.ip = init_preferences(self.np_size, self.m, self.rng)
        self.best_so_far = float(fits.min())
        self._trace_point()
        while self.budget.remaining > 0:
            if self.update == "generational":
                exhausted = self._generation_batch()
            else:
                exhausted = self._generation_immediate()
            self._share_gens += 1
            if self._share_gens == self.share_interval:
                self._flush_shares()
            self._trace_point()
            if exhausted:
                break
            self.pop.generation += 1
        self._flush_shares()
        return self._build_record()

    # -- shared pieces -----------------------------------------------------

    def _trace_point(self):
        self._trace_err.append(error_value(self.best_so_far, self.problem.optimum_value))
        self._trace_evals.append(self.budget.used)

    def _flush_shares(self):
        total = self._share_counts.sum()
        if total > 0:
            self._share_rows.append(self._share_counts / total)
        self._share_counts = np.zeros(self.m)
        self._share_gens = 0

    def _record_nbs(self, trial_fits: np.ndarray, target_ranks: np.ndarray):
        if len(trial_fits) == 0:
            return
        prev = np.minimum.accumulate(np.concatenate(([self.best_so_far], trial_fits)))[:-1]
        improved = trial_fits < prev
        for r in target_ranks[improved]:
            stats.nbs_record(int(r), self.rank_archive)
        self.best_so_far = min(self.best_so_far, float(trial_fits.min()))

    def _draw_top_set(self, ranks: np.ndarray):
        if not self.use_rab:
            return np.empty(0, dtype=np.int64), 0
        tg = self.top_g_override if self.top_g_override is not None \
            else draw_top_g(self.rng, self.np_size, self.n_top)
        if self.fitness_bias:
            top_idx = np.flatnonzero(ranks <= tg)
        else:
            top_idx = np.sort(self.rng.shuffled(self.np_size)[:tg])
        return top_idx, tg

    def _assign_inferior(self, inferior_idx: np.ndarray) -> np.ndarray:
        if self.m == 1:
            return np.zeros(len(inferior_idx), dtype=np.int64)
        if self.use_ipls:
            return self.ip[inferior_idx]
        u = self.rng.random(len(inferior_idx))
        return np.ceil(u * self.m).astype(np.int64) - 1

    # -- generational (array-batched) path ----------------------------------

    def _generation_batch(self) -> bool:
        pop, rng = self.pop, self.rng
        NP, M = self.np_size, self.m
        ranks = fitness_ranks(pop)
        for layer in self.layers:
            layer.begin_generation(pop)
        top_idx, tg = self._draw_top_set(ranks)
        self._trace_top_g.append(tg)
        top_mask = np.zeros(NP, dtype=bool)
        top_mask[top_idx] = True
        inferior_idx = np.flatnonzero(~top_mask)
        assign = self._assign_inferior(inferior_idx)

        batches = []
        for m, layer in enumerate(self.layers):
            t = np.concatenate([top_idx, inferior_idx[assign == m]]).astype(np.int64)
            batches.append(layer.propose_batch(t, pop, rng) if len(t) else None)

        # Evaluation order: population index major, layer index minor.
        counts = np.where(top_mask, M, 1)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        total = int(counts.sum())
        order_layer = np.empty(total, dtype=np.int64)
        order_pos = np.empty(total, dtype=np.int64)
        order_target = np.repeat(np.arange(NP), counts)
        n_top = len(top_idx)
        if n_top:
            rows = (starts[top_idx][:, None] + np.arange(M)).ravel()
            order_layer[rows] = np.tile(np.arange(M), n_top)
            order_pos[rows] = np.repeat(np.arange(n_top), M)
        if len(inferior_idx):
            order_layer[starts[inferior_idx]] = assign
            pos_within = np.empty(len(inferior_idx), dtype=np.int64)
            for m in range(M):
                sel = assign == m
                pos_within[sel] = n_top + np.arange(int(sel.sum()))
            order_pos[starts[inferior_idx]] = pos_within

        trials = np.empty((total, pop.dimension))
        for m, batch in enumerate(batches):
            if batch is None:
                continue
            rows = np.flatnonzero(order_layer == m)
            trials[rows] = batch.trials[order_pos[rows]]

        trial_fits = evaluate_batch(self.problem, trials, self.budget)
        n_eval = len(trial_fits)
        exhausted = n_eval < total

        self._record_nbs(trial_fits, ranks[order_target[:n_eval]])

        gen_fit = pop.fitness  # untouched until the staged replacement below
        eval_layer = order_layer[:n_eval]
        for m, batch in enumerate(batches):
            if batch is None:
                continue
            rows = np.flatnonzero(eval_layer == m)
            self._share_counts[m] += len(rows)
            if len(rows):
                self.layers[m].feedback_batch(batch, order_pos[rows],
                                              gen_fit[order_target[rows]],
                                              trial_fits[rows], rng)

        repl_idx: List[int] = []
        repl_geno: List[np.ndarray] = []
        repl_fit: List[float] = []
        for i in range(NP):
            s = starts[i]
            e = min(s + counts[i], n_eval)
            if e <= s:
                break
            fits_i = trial_fits[s:e]
            b_rel = int(np.argmin(fits_i))
            tf = float(fits_i[b_rel])
            succeeded = tf <= gen_fit[i]
            if succeeded:
                repl_idx.append(i)
                repl_geno.append(trials[s + b_rel])
                repl_fit.append(tf)
            if self.use_ipls:
                if top_mask[i]:
                    ipls_update(self.ip, i, succeeded, "top", M, rng,
                                best_layer=int(order_layer[s + b_rel]))
                else:
                    ipls_update(self.ip, i, succeeded, "inferior", M, rng)
        pop.replace_many(np.asarray(repl_idx, dtype=np.int64),
                         np.asarray(repl_geno).reshape(len(repl_idx), pop.dimension),
                         np.asarray(repl_fit))

        if not exhausted:
            for layer in self.layers:
                layer.end_generation()
        return exhausted

    # -- immediate-replacement path ------------------------------------------

    def _generation_immediate(self) -> bool:
        pop, rng = self.pop, self.rng
        NP, M = self.np_size, self.m
        ranks = fitness_ranks(pop)
        for layer in self.layers:
            layer.begin_generation(pop)
        top_idx, tg = self._draw_top_set(ranks)
        self._trace_top_g.append(tg)
        top_mask = np.zeros(NP, dtype=bool)
        top_mask[top_idx] = True

        exhausted = False
        for i in range(NP):
            if self.budget.remaining <= 0:
                exhausted = True
                break
            if top_mask[i]:
                res = rab_evolve_top(i, self.layers, self.problem, pop, self.budget, rng)
                n_eval = len(res.trial_fitnesses)
                self._record_nbs(np.asarray(res.trial_fitnesses),
                                 np.full(n_eval, ranks[i]))
                self._share_counts[:n_eval] += 1
                if res.succeeded:
                    pop.replace(i, res.survivor.genome, res.survivor.fitness)
                if self.use_ipls and n_eval:
                    ipls_update(self.ip, i, res.succeeded, "top", M, rng,
                                best_layer=res.best_layer)
                if res.exhausted:
                    exhausted = True
                    break
            else:
                if self.m == 1:
                    m = 0
                elif self.use_ipls:
                    m = int(self.ip[i])
                else:
                    m = int(math.ceil(rng.random() * M)) - 1
                res = evolve_inferior(i, self.layers[m], self.problem, pop,
                                      self.budget, rng)
                if res.exhausted:
                    exhausted = True
                    break
                self._record_nbs(np.asarray([res.trial_fitness]),
                                 np.asarray([ranks[i]]))
                self._share_counts[m] += 1
                if res.succeeded:
                    pop.replace(i, res.survivor.genome, res.survivor.fitness)
                if self.use_ipls:
                    ipls_update(self.ip, i, res.succeeded, "inferior", M, rng)

        if not exhausted:
            for layer in self.layers:
                layer.end_generation()
        return exhausted

    # -- reporting -----------------------------------------------------------

    def _build_record(self) -> RunRecord:
        try:
            ar = stats.ar_statistic(self.rank_archive)
        except stats.EmptyArchive:
            ar = None
        shares = np.asarray(self._share_rows).reshape(len(self._share_rows), self.m)
        return RunRecord(
            algorithm=self.algorithm,
            problem=self.problem.id,
            seed=self.seed,
            final_error=error_value(self.best_so_far, self.problem.optimum_value),
            evaluations=self.budget.used,
            generations=self.pop.generation,
            layer_names=[layer.name for layer in self.layers],
            best_error_trace=np.asarray(self._trace_err),
            eval_trace=np.asarray(self._trace_evals, dtype=np.int64),
            top_g_trace=np.asarray(self._trace_top_g, dtype=np.int64),
            layer_shares=shares,
            ar=ar,
            rank_frequency=self.rank_archive.frequency.copy(),
        )


def mlcc_run(config: MlccConfig, problem: Problem, budget: Budget, seed: int,
             algorithm: str = "mlcc") -> RunRecord:
    """Execute one seeded run of the multi-layer framework."""
    config.validate()
    use_rab, use_ipls, bias = _ABLATION_FLAGS[config.ablation]
    engine = _Engine(algorithm, config.layers, config.np_size, problem, budget, seed,
                     n_top=config.n_top, use_rab=use_rab, use_ipls=use_ipls,
                     fitness_bias=bias, top_g_override=config.top_g_override,
                     update=config.update, share_interval=config.share_interval)
    return engine.run()


def single_layer_run(layer_spec: LayerSpec, problem: Problem, budget: Budget, seed: int,
                     np_size: int, algorithm: Optional[str] = None,
                     update: str = "generational", share_interval: int = 50) -> RunRecord:
    """Run one layer standalone (the baseline configuration of that layer)."""
    if np_size < 5:
        raise ConfigError("population size must be at least 5")
    engine = _Engine(algorithm or layer_spec.name, [layer_spec], np_size, problem,
                     budget, seed, use_rab=False, use_ipls=False,
                     update=update, share_interval=share_interval)
    return engine.run()
