import numpy as np
import pytest

from mlccde.core import Bounds, Budget, Population, Problem, RandomSource
from mlccde.layers import BatchProposals, Layer, LayerSpec
from mlccde.mlcc import (ConfigError, MlccConfig, draw_top_g, evolve_inferior,
                         fitness_ranks, init_preferences, ipls_update, mlcc_run,
                         rab_evolve_top, single_layer_run, switch_preference)


class StubLayer(Layer):
    """Proposes a constant genome (hence constant fitness under first_coord)."""

    def __init__(self, layer_id, trial_value):
        super().__init__(layer_id, f"stub{layer_id}")
        self.trial_value = float(trial_value)
        self.feedback_log = []

    def propose_batch(self, targets, population, rng):
        targets = np.asarray(targets, dtype=np.int64)
        k = len(targets)
        trials = np.full((k, population.dimension), self.trial_value)
        return BatchProposals(self.layer_id, targets, trials, np.full(k, 0.5),
                              np.full(k, 0.5), population.genomes[targets].copy())

    def feedback_batch(self, batch, positions, target_fitness, trial_fitness, rng):
        for pos, tf, uf in zip(positions, target_fitness, trial_fitness):
            self.feedback_log.append((int(batch.targets[pos]), float(tf), float(uf)))


class FixedU:
    """RandomSource stand-in yielding a fixed uniform draw."""

    def __init__(self, u):
        self.u = u

    def random(self, size=None):
        return self.u


def first_coord_problem(dimension=3):
    return Problem(id="first-coord", dimension=dimension,
                   bounds=Bounds.symmetric(dimension, 100.0), optimum_value=-100.0,
                   evaluate=lambda x: np.asarray(x, dtype=float)[..., 0])


def constant_population(fitnesses, dimension=3):
    fit = np.asarray(fitnesses, dtype=float)
    genomes = np.tile(fit[:, None], (1, dimension))
    return Population(genomes, fit)


def sphere_problem(dimension):
    return Problem(id="sphere", dimension=dimension,
                   bounds=Bounds.symmetric(dimension, 5.0), optimum_value=0.0,
                   evaluate=lambda x: (np.asarray(x) ** 2).sum(axis=-1))


class TestFitnessRanks:
    def test_simple_permutation(self):
        pop = constant_population([3.0, 1.0, 2.0])
        assert fitness_ranks(pop).tolist() == [3, 1, 2]

    def test_all_equal_index_tiebreak(self):
        pop = constant_population([5.0, 5.0, 5.0, 5.0])
        assert fitness_ranks(pop).tolist() == [1, 2, 3, 4]

    def test_single_member(self):
        pop = constant_population([7.0])
        assert fitness_ranks(pop).tolist() == [1]

    def test_matches_sort_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(1, 30))
            fit = rng.integers(0, 6, n).astype(float)
            ranks = fitness_ranks(constant_population(fit))
            assert sorted(ranks.tolist()) == list(range(1, n + 1))
            for i in range(n):
                for j in range(n):
                    if ranks[i] < ranks[j]:
                        assert (fit[i] < fit[j]) or (fit[i] == fit[j] and i < j)


class TestDrawTopG:
    def test_high_draw(self):
        assert draw_top_g(FixedU(0.999), 150, 0.05) == 8

    def test_low_draw(self):
        assert draw_top_g(FixedU(0.01), 100, 0.05) == 1

    def test_range(self):
        rng = RandomSource(1)
        vals = {draw_top_g(rng, 100, 0.05) for _ in range(2000)}
        assert vals == {1, 2, 3, 4, 5}


class TestPreferences:
    def test_init_covers_all_layers(self):
        ip = init_preferences(10_000, 3, RandomSource(2))
        assert set(ip.tolist()) == {0, 1, 2}
        counts = np.bincount(ip)
        assert np.all(np.abs(counts - 10_000 / 3) < 300)

    def test_switch_two_layers_forced(self):
        rng = RandomSource(3)
        assert switch_preference(0, 2, rng) == 1
        assert switch_preference(1, 2, rng) == 0

    def test_switch_three_layers_uniform_complement(self):
        rng = RandomSource(4)
        seen = [switch_preference(1, 3, rng) for _ in range(5000)]
        counts = np.bincount(seen, minlength=3)
        assert counts[1] == 0
        assert abs(counts[0] - counts[2]) < 300

    def test_update_rules(self):
        rng = RandomSource(5)
        ip = np.array([0, 1, 2])
        ipls_update(ip, 0, True, "inferior", 3, rng)
        assert ip[0] == 0
        ipls_update(ip, 0, False, "inferior", 3, rng)
        assert ip[0] != 0
        ipls_update(ip, 1, True, "top", 3, rng, best_layer=2)
        assert ip[1] == 2
        ipls_update(ip, 2, False, "top", 3, rng, best_layer=0)
        assert ip[2] == 2

    def test_invariants_under_fuzz(self):
        rng = RandomSource(6)
        gen = np.random.default_rng(7)
        m = 4
        ip = init_preferences(50, m, rng)
        for _ in range(20_000):
            i = int(gen.integers(50))
            before = int(ip[i])
            if gen.random() < 0.5:
                ok = bool(gen.random() < 0.4)
                ipls_update(ip, i, ok, "inferior", m, rng)
                if ok:
                    assert ip[i] == before
                else:
                    assert ip[i] != before
            else:
                ok = bool(gen.random() < 0.4)
                b = int(gen.integers(m))
                ipls_update(ip, i, ok, "top", m, rng, best_layer=b)
                assert ip[i] == (b if ok else before)
            assert 0 <= ip[i] < m


class TestRabEvolveTop:
    def setup_method(self):
        self.problem = first_coord_problem()
        self.rng = RandomSource(8)

    def test_fittest_trial_wins(self):
        layers = [StubLayer(0, 5.0), StubLayer(1, 3.0)]
        pop = constant_population([4.0, 9.0, 9.0])
        res = rab_evolve_top(0, layers, self.problem, pop, Budget(10), self.rng)
        assert res.succeeded and res.best_layer == 1
        assert res.survivor.fitness == 3.0
        assert layers[0].feedback_log == [(0, 4.0, 5.0)]
        assert layers[1].feedback_log == [(0, 4.0, 3.0)]

    def test_target_survives_when_all_trials_worse(self):
        layers = [StubLayer(0, 5.0), StubLayer(1, 6.0)]
        pop = constant_population([4.0, 9.0, 9.0])
        res = rab_evolve_top(0, layers, self.problem, pop, Budget(10), self.rng)
        assert not res.succeeded
        assert res.survivor.fitness == 4.0
        assert len(layers[0].feedback_log) == 1 and len(layers[1].feedback_log) == 1

    def test_mixed_outcome_feedback(self):
        # enumerate the Algorithm-2 ordering: feedback per layer, then selection
        layers = [StubLayer(0, 3.0), StubLayer(1, 4.0)]
        pop = constant_population([4.0, 9.0, 9.0])
        res = rab_evolve_top(0, layers, self.problem, pop, Budget(10), self.rng)
        assert res.succeeded and res.best_layer == 0
        assert res.survivor.fitness == 3.0
        # layer 0 improved strictly; layer 1 tied (no strict improvement)
        assert layers[0].feedback_log[0][2] < layers[0].feedback_log[0][1]
        assert layers[1].feedback_log[0][2] == layers[1].feedback_log[0][1]

    def test_tie_goes_to_lowest_layer(self):
        layers = [StubLayer(0, 3.0), StubLayer(1, 3.0)]
        pop = constant_population([4.0, 9.0, 9.0])
        res = rab_evolve_top(0, layers, self.problem, pop, Budget(10), self.rng)
        assert res.best_layer == 0

    def test_chosen_trial_is_argmin_fuzz(self):
        gen = np.random.default_rng(9)
        for _ in range(100):
            vals = gen.uniform(-50.0, 50.0, 3)
            layers = [StubLayer(m, v) for m, v in enumerate(vals)]
            pop = constant_population([float(gen.uniform(-50, 50)), 90.0, 90.0])
            res = rab_evolve_top(0, layers, self.problem, pop, Budget(10), self.rng)
            assert res.best_layer == int(np.argmin(vals))

    def test_partial_batch_on_budget_exhaustion(self):
        layers = [StubLayer(0, 5.0), StubLayer(1, 1.0)]
        pop = constant_population([4.0, 9.0, 9.0])
        budget = Budget(1)
        res = rab_evolve_top(0, layers, self.problem, pop, budget, self.rng)
        assert res.exhausted
        assert res.trial_fitnesses == [5.0]          # layer 1 never evaluated
        assert not res.succeeded                     # 5 > 4
        assert len(layers[0].feedback_log) == 1
        assert layers[1].feedback_log == []
        assert budget.used == 1


class TestEvolveInferior:
    def test_success_and_failure(self):
        problem = first_coord_problem()
        rng = RandomSource(10)
        pop = constant_population([4.0, 9.0, 9.0])
        budget = Budget(10)
        res = evolve_inferior(0, StubLayer(0, 2.0), problem, pop, budget, rng)
        assert res.succeeded and res.survivor.fitness == 2.0
        assert budget.used == 1
        res = evolve_inferior(0, StubLayer(0, 8.0), problem, pop, budget, rng)
        assert not res.succeeded and res.survivor.fitness == 4.0
        assert budget.used == 2

    def test_tie_survives(self):
        problem = first_coord_problem()
        pop = constant_population([4.0, 9.0, 9.0])
        res = evolve_inferior(0, StubLayer(0, 4.0), problem, pop, Budget(5),
                              RandomSource(11))
        assert res.succeeded and res.survivor.genome[0] == 4.0

    def test_exhausted_before_evaluation(self):
        problem = first_coord_problem()
        pop = constant_population([4.0, 9.0, 9.0])
        res = evolve_inferior(0, StubLayer(0, 1.0), problem, pop, Budget(0),
                              RandomSource(12))
        assert res.exhausted and not res.succeeded and res.trial_fitness is None


def default_config(**kw):
    base = dict(layers=(LayerSpec("shade"), LayerSpec("bid")), np_size=10)
    base.update(kw)
    return MlccConfig(**base)


class TestConfigValidation:
    def test_needs_two_layers(self):
        with pytest.raises(ConfigError):
            MlccConfig(layers=(LayerSpec("shade"),), np_size=10).validate()

    def test_n_range(self):
        with pytest.raises(ConfigError):
            default_config(n_top=0.0).validate()
        with pytest.raises(ConfigError):
            default_config(n_top=1.5).validate()

    def test_bad_ablation_and_update(self):
        with pytest.raises(ConfigError):
            default_config(ablation="bogus").validate()
        with pytest.raises(ConfigError):
            default_config(update="sometimes").validate()

    def test_top_g_override_range(self):
        with pytest.raises(ConfigError):
            default_config(top_g_override=0).validate()
        with pytest.raises(ConfigError):
            default_config(top_g_override=11).validate()
        default_config(top_g_override=10).validate()

    def test_budget_must_cover_initialization(self):
        with pytest.raises(ConfigError):
            mlcc_run(default_config(), sphere_problem(3), Budget(9), seed=1)


class TestEvaluationAccounting:
    @pytest.mark.parametrize("update", ["generational", "immediate"])
    def test_full_mode_counts(self, update):
        # per complete generation: NP singles plus (M - 1) * top_g extra trials
        config = default_config(np_size=20, update=update)
        rec = mlcc_run(config, sphere_problem(4), Budget(20 + 2000), seed=3)
        deltas = np.diff(rec.eval_trace)
        for d, tg in zip(deltas[:rec.generations], rec.top_g_trace):
            assert d == 20 + tg

    @pytest.mark.parametrize("update", ["generational", "immediate"])
    def test_no_rab_counts(self, update):
        config = default_config(np_size=20, ablation="no_rab", update=update)
        rec = mlcc_run(config, sphere_problem(4), Budget(20 + 400), seed=4)
        deltas = np.diff(rec.eval_trace)[:rec.generations]
        assert np.all(deltas == 20)
        assert np.all(rec.top_g_trace[:rec.generations] == 0)

    def test_override_full_population(self):
        config = default_config(np_size=10, top_g_override=10)
        rec = mlcc_run(config, sphere_problem(3), Budget(10 + 60), seed=5)
        # every individual is a head individual: NP * M evaluations per generation
        assert np.diff(rec.eval_trace)[0] == 20

    def test_budget_never_exceeded(self):
        config = default_config(np_size=10)
        rec = mlcc_run(config, sphere_problem(3), Budget(137), seed=6)
        assert rec.evaluations == 137
        assert rec.eval_trace[-1] == 137


class TestRunBehavior:
    def test_initialization_only(self):
        config = default_config(np_size=10)
        rec = mlcc_run(config, sphere_problem(3), Budget(10), seed=7)
        assert rec.generations == 0
        assert len(rec.best_error_trace) == 1
        assert rec.evaluations == 10

    @pytest.mark.parametrize("update", ["generational", "immediate"])
    def test_determinism(self, update):
        config = default_config(update=update)
        a = mlcc_run(config, sphere_problem(3), Budget(800), seed=8)
        b = mlcc_run(config, sphere_problem(3), Budget(800), seed=8)
        da, db = a.to_json_dict(), b.to_json_dict()
        assert da == db

    def test_seed_changes_outcome(self):
        config = default_config()
        a = mlcc_run(config, sphere_problem(3), Budget(800), seed=1)
        b = mlcc_run(config, sphere_problem(3), Budget(800), seed=2)
        assert not np.array_equal(a.best_error_trace, b.best_error_trace)

    @pytest.mark.parametrize("update", ["generational", "immediate"])
    def test_trace_monotone(self, update):
        config = default_config(update=update)
        rec = mlcc_run(config, sphere_problem(4), Budget(2000), seed=9)
        assert np.all(np.diff(rec.best_error_trace) <= 0.0)

    @pytest.mark.parametrize("ablation", ["full", "no_rab", "no_ipls", "neither",
                                          "no_fitness_bias"])
    def test_all_ablations_run(self, ablation):
        config = default_config(ablation=ablation)
        rec = mlcc_run(config, sphere_problem(3), Budget(500), seed=10)
        assert rec.evaluations == 500
        assert np.all(np.diff(rec.best_error_trace) <= 0.0)

    def test_variant_iv_head_is_rank_free(self):
        # without fitness bias the multi-trial head is drawn uniformly from
        # the whole population, so over many generations every index shows up
        from mlccde.mlcc import _Engine, fitness_ranks
        problem = sphere_problem(3)
        engine = _Engine("v4", (LayerSpec("shade"), LayerSpec("bid")), 10,
                         problem, Budget(10_000), seed=20, fitness_bias=False,
                         top_g_override=2)
        engine.pop = Population(np.zeros((10, 3)), np.arange(10.0))
        ranks = fitness_ranks(engine.pop)
        seen = set()
        for _ in range(300):
            top_idx, tg = engine._draw_top_set(ranks)
            assert tg == 2 and len(top_idx) == 2
            assert len(set(top_idx.tolist())) == 2
            seen.update(top_idx.tolist())
        assert seen == set(range(10))
        biased = _Engine("full", (LayerSpec("shade"), LayerSpec("bid")), 10,
                         problem, Budget(10_000), seed=21, top_g_override=2)
        biased.pop = engine.pop
        top_idx, _ = biased._draw_top_set(ranks)
        assert np.array_equal(np.sort(ranks[top_idx]), [1, 2])

    def test_three_layer_configuration(self):
        config = MlccConfig(layers=(LayerSpec("shade"), LayerSpec("bid"),
                                    LayerSpec("fixed", strategy="rand/1")),
                            np_size=12)
        rec = mlcc_run(config, sphere_problem(3), Budget(1000), seed=11)
        assert rec.layer_names == ["shade", "bid", "de-rand-1"]
        assert rec.evaluations == 1000

    def test_layer_shares_rows_sum_to_one(self):
        config = default_config(share_interval=5)
        rec = mlcc_run(config, sphere_problem(3), Budget(900), seed=12)
        assert rec.layer_shares.shape[1] == 2
        assert rec.layer_shares.shape[0] >= 1
        assert np.allclose(rec.layer_shares.sum(axis=1), 1.0)

    def test_single_layer_run(self):
        rec = single_layer_run(LayerSpec("shade"), sphere_problem(3), Budget(600),
                               seed=13, np_size=10)
        assert rec.algorithm == "shade"
        assert rec.layer_names == ["shade"]
        assert np.allclose(rec.layer_shares, 1.0)
        assert rec.evaluations == 600

    def test_nbs_count_matches_independent_scan(self):
        # log every objective call, then recount best-so-far improvements
        log = []

        def logging_eval(x):
            x = np.asarray(x, dtype=float)
            vals = (x ** 2).sum(axis=-1)
            log.extend(np.atleast_1d(vals).tolist())
            return vals

        problem = Problem(id="logged-sphere", dimension=3,
                          bounds=Bounds.symmetric(3, 5.0), optimum_value=0.0,
                          evaluate=logging_eval)
        config = default_config()
        rec = mlcc_run(config, problem, Budget(700), seed=14)
        best = min(log[:10])                      # initialization
        improvements = 0
        for v in log[10:]:
            if v < best:
                improvements += 1
                best = v
        assert rec.rank_frequency.sum() == improvements
        assert rec.ar is None or 1.0 <= rec.ar <= 10.0

    @pytest.mark.parametrize("update", ["generational", "immediate"])
    def test_elitism_under_both_semantics(self, update):
        config = default_config(update=update)
        rec = mlcc_run(config, sphere_problem(3), Budget(1500), seed=15)
        assert rec.final_error <= rec.best_error_trace[0]

    def test_final_error_uses_reporting_floor(self):
        config = default_config(np_size=12)
        rec = mlcc_run(config, sphere_problem(2), Budget(12_000), seed=16)
        assert rec.final_error == 0.0
