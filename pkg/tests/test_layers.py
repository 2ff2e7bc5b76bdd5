import numpy as np
import pytest

from mlccde.core import Bounds, Population, RandomSource
from mlccde.layers import (BiDLayer, FixedDELayer, LayerSpec, ShadeLayer,
                           TrialProposal)


def weighted_memory_oracle(s_f, s_cr, s_df):
    """Independent restatement of the end-of-generation memory update."""
    total = sum(s_df)
    w = [d / total for d in s_df]
    lehmer = sum(wi * f ** 2 for wi, f in zip(w, s_f)) / sum(wi * f for wi, f in zip(w, s_f))
    arith = sum(wi * c for wi, c in zip(w, s_cr))
    return lehmer, arith


def make_population(np_size=10, dimension=2, seed=0, half_width=10.0):
    rng = RandomSource(seed)
    bounds = Bounds.symmetric(dimension, half_width)
    X = bounds.sample(np_size, rng)
    fits = (X ** 2).sum(axis=1)
    return Population(X, fits), bounds


class TestShadePropose:
    def test_initial_parameters_center_on_memory_init(self):
        pop, bounds = make_population(20, 3)
        layer = ShadeLayer(0, 20, bounds)
        rng = RandomSource(1)
        fs, crs = [], []
        for _ in range(400):
            batch = layer.propose_batch(np.arange(20), pop, rng)
            fs.extend(batch.f_used.tolist())
            crs.extend(batch.cr_used.tolist())
        assert abs(np.median(fs) - 0.7) < 0.02
        assert abs(np.median(crs) - 0.5) < 0.02

    def test_f_positive_and_capped(self):
        pop, bounds = make_population(10, 2)
        layer = ShadeLayer(0, 10, bounds)
        rng = RandomSource(2)
        for _ in range(200):
            batch = layer.propose_batch(np.arange(10), pop, rng)
            assert np.all(batch.f_used > 0.0) and np.all(batch.f_used <= 1.0)
            assert np.all(batch.cr_used >= 0.0) and np.all(batch.cr_used <= 1.0)

    def test_trials_within_bounds(self):
        pop, bounds = make_population(10, 4, half_width=1.0)
        layer = ShadeLayer(0, 10, bounds)
        rng = RandomSource(3)
        for _ in range(100):
            batch = layer.propose_batch(np.arange(10), pop, rng)
            assert np.all(batch.trials >= bounds.lower)
            assert np.all(batch.trials <= bounds.upper)

    def test_proposal_records_parameters(self):
        pop, bounds = make_population(8, 2)
        layer = ShadeLayer(0, 8, bounds)
        prop = layer.propose(3, pop, RandomSource(4))
        assert isinstance(prop, TrialProposal)
        assert prop.layer_id == 0
        assert 0.0 < prop.f_used <= 1.0
        assert np.array_equal(prop.target_genome, pop.genomes[3])


class TestShadeFeedback:
    def test_improvement_grows_success_sets(self):
        pop, bounds = make_population(6, 2)
        layer = ShadeLayer(0, 6, bounds)
        rng = RandomSource(5)
        prop = layer.propose(0, pop, rng)
        layer.feedback(0, prop, target_fitness=5.0, trial_fitness=4.0, rng=rng)
        assert len(layer.s_f) == len(layer.s_cr) == len(layer.s_df) == 1
        assert layer.s_df[0] == 1.0
        assert len(layer.archive) == 1

    def test_tie_is_not_an_adaptation_success(self):
        pop, bounds = make_population(6, 2)
        layer = ShadeLayer(0, 6, bounds)
        rng = RandomSource(6)
        prop = layer.propose(0, pop, rng)
        layer.feedback(0, prop, target_fitness=5.0, trial_fitness=5.0, rng=rng)
        assert not layer.s_f and len(layer.archive) == 0

    def test_archive_capacity_on_insert(self):
        pop, bounds = make_population(4, 2)
        layer = ShadeLayer(0, 4, bounds)
        rng = RandomSource(7)
        for k in range(20):
            prop = layer.propose(0, pop, rng)
            layer.feedback(0, prop, 5.0, 4.0, rng)
            assert len(layer.archive) <= 4
        assert len(layer.archive) == 4


class TestShadeEndGeneration:
    def test_worked_example(self):
        # frozen from the independent weighted-mean oracle
        pop, bounds = make_population(6, 2)
        layer = ShadeLayer(0, 6, bounds)
        layer.s_f = [0.5, 0.7]
        layer.s_cr = [0.2, 0.4]
        layer.s_df = [1.0, 3.0]
        layer.end_generation()
        assert abs(layer.m_f[0] - 0.6615384615384615) < 1e-12
        assert abs(layer.m_cr[0] - 0.35) < 1e-12
        assert layer.k == 1
        assert not layer.s_f and not layer.s_cr and not layer.s_df

    def test_empty_success_sets_leave_state(self):
        pop, bounds = make_population(6, 2)
        layer = ShadeLayer(0, 6, bounds)
        before = layer.state_signature()
        layer.end_generation()
        assert layer.state_signature() == before

    def test_single_success_lehmer_identity(self):
        pop, bounds = make_population(6, 2)
        layer = ShadeLayer(0, 6, bounds)
        layer.s_f, layer.s_cr, layer.s_df = [0.9], [0.3], [5.0]
        layer.end_generation()
        assert abs(layer.m_f[0] - 0.9) < 1e-12
        assert abs(layer.m_cr[0] - 0.3) < 1e-12

    def test_matches_oracle_on_random_sets(self):
        rng = np.random.default_rng(123)
        pop, bounds = make_population(6, 2)
        for _ in range(100):
            n = int(rng.integers(1, 12))
            s_f = rng.uniform(0.05, 1.0, n).tolist()
            s_cr = rng.uniform(0.0, 1.0, n).tolist()
            s_df = rng.uniform(1e-6, 10.0, n).tolist()
            layer = ShadeLayer(0, 6, bounds)
            layer.s_f, layer.s_cr, layer.s_df = list(s_f), list(s_cr), list(s_df)
            layer.end_generation()
            ef, ecr = weighted_memory_oracle(s_f, s_cr, s_df)
            assert abs(layer.m_f[0] - ef) <= 1e-12 * max(1.0, abs(ef))
            assert abs(layer.m_cr[0] - ecr) <= 1e-12 * max(1.0, abs(ecr))

    def test_cursor_wraps(self):
        pop, bounds = make_population(6, 2)
        layer = ShadeLayer(0, 6, bounds, history_length=2)
        for expected_k in (1, 0, 1):
            layer.s_f, layer.s_cr, layer.s_df = [0.5], [0.5], [1.0]
            layer.end_generation()
            assert layer.k == expected_k

    def test_memory_stays_in_range_under_fuzz(self):
        rng = np.random.default_rng(99)
        pop, bounds = make_population(6, 2)
        layer = ShadeLayer(0, 6, bounds, history_length=4)
        for _ in range(500):
            n = int(rng.integers(0, 6))
            layer.s_f = rng.uniform(1e-3, 1.0, n).tolist()
            layer.s_cr = rng.uniform(0.0, 1.0, n).tolist()
            layer.s_df = rng.uniform(1e-9, 100.0, n).tolist()
            layer.end_generation()
            assert np.all(layer.m_f > 0.0) and np.all(layer.m_f <= 1.0)
            assert np.all(layer.m_cr >= 0.0) and np.all(layer.m_cr <= 1.0)


class TestBiDLayer:
    def test_propose_uses_stored_pair(self):
        pop, bounds = make_population(6, 2)
        layer = BiDLayer(0, 6, bounds)
        layer.initialize(pop, RandomSource(8))
        layer.mem_f[2] = 0.65
        layer.mem_cr[2] = 0.1
        prop = layer.propose(2, pop, RandomSource(9))
        assert prop.f_used == 0.65
        assert prop.cr_used == 0.1

    def test_success_keeps_pair_failure_resamples(self):
        pop, bounds = make_population(6, 2)
        layer = BiDLayer(0, 6, bounds)
        rng = RandomSource(10)
        layer.initialize(pop, rng)
        layer.mem_f[1] = 0.42
        layer.mem_cr[1] = 0.37
        prop = layer.propose(1, pop, rng)
        layer.feedback(1, prop, target_fitness=3.0, trial_fitness=2.0, rng=rng)
        assert layer.mem_f[1] == 0.42 and layer.mem_cr[1] == 0.37
        assert len(layer.archive) == 1
        prop = layer.propose(1, pop, rng)
        layer.feedback(1, prop, target_fitness=3.0, trial_fitness=3.0, rng=rng)
        assert layer.mem_f[1] != 0.42 or layer.mem_cr[1] != 0.37

    def test_resampled_parameters_in_range(self):
        pop, bounds = make_population(6, 2)
        layer = BiDLayer(0, 6, bounds)
        rng = RandomSource(11)
        f = layer.sample_f(50_000, rng)
        cr = layer.sample_cr(50_000, rng)
        assert np.all(f > 0.0) and np.all(f <= 1.0)
        assert np.all(cr >= 0.0) and np.all(cr <= 1.0)

    def test_f_marginal_is_bimodal(self):
        # histogram over resamples shows mass at both modes and a valley between
        pop, bounds = make_population(6, 2)
        layer = BiDLayer(0, 6, bounds)
        f = layer.sample_f(100_000, RandomSource(12))
        near_low = ((f > 0.55) & (f < 0.75)).mean()
        near_high = (f > 0.9).mean()
        valley = ((f > 0.76) & (f < 0.86)).mean()
        assert near_low > 2 * valley
        assert near_high > 2 * valley

    def test_cr_marginal_is_bimodal(self):
        pop, bounds = make_population(6, 2)
        layer = BiDLayer(0, 6, bounds)
        cr = layer.sample_cr(100_000, RandomSource(13))
        near_low = (cr < 0.25).mean()
        near_high = (cr > 0.8).mean()
        valley = ((cr > 0.35) & (cr < 0.7)).mean()
        assert near_low > valley and near_high > valley

    def test_memory_persists_across_generations_on_success(self):
        pop, bounds = make_population(6, 2)
        layer = BiDLayer(0, 6, bounds)
        rng = RandomSource(14)
        layer.initialize(pop, rng)
        pair = (float(layer.mem_f[0]), float(layer.mem_cr[0]))
        for _ in range(5):
            prop = layer.propose(0, pop, rng)
            layer.feedback(0, prop, 10.0, 1.0, rng)
            layer.end_generation()
        assert (layer.mem_f[0], layer.mem_cr[0]) == pair


class TestFixedDELayer:
    def test_records_constants(self):
        pop, bounds = make_population(8, 2)
        layer = FixedDELayer(0, bounds, "rand/1", f=0.7, cr=0.5)
        layer.begin_generation(pop)
        prop = layer.propose(1, pop, RandomSource(15))
        assert prop.f_used == 0.7 and prop.cr_used == 0.5

    def test_cr_one_trial_is_repaired_mutant(self):
        pop, bounds = make_population(8, 2)
        layer = FixedDELayer(0, bounds, "rand/1", f=0.5, cr=1.0)
        layer.begin_generation(pop)
        rng = RandomSource(16)
        batch = layer.propose_batch(np.arange(8), pop, rng)
        donors = batch.aux["donors"]
        X = pop.genomes
        from mlccde.core import repair_bounds
        expect = X[donors[:, 0]] + 0.5 * (X[donors[:, 1]] - X[donors[:, 2]])
        expect = repair_bounds(expect, X[np.arange(8)], bounds)
        assert np.allclose(batch.trials, expect)

    def test_feedback_and_end_generation_are_noops(self):
        pop, bounds = make_population(8, 2)
        layer = FixedDELayer(0, bounds, "best/1")
        layer.begin_generation(pop)
        rng = RandomSource(17)
        before = layer.state_signature()
        prop = layer.propose(2, pop, rng)
        layer.feedback(2, prop, 5.0, 1.0, rng)
        layer.end_generation()
        assert layer.state_signature() == before

    def test_best_pinned_at_generation_start(self):
        genomes = np.arange(16.0).reshape(8, 2)
        pop = Population(genomes.copy(), np.arange(8.0))
        bounds = Bounds.symmetric(2, 100.0)
        layer = FixedDELayer(0, bounds, "best/1", f=0.5, cr=1.0)
        layer.begin_generation(pop)
        pop.replace(7, genomes[7], -1.0)  # new best mid-generation is ignored
        rng = RandomSource(18)
        batch = layer.propose_batch(np.array([3]), pop, rng)
        d = pop.genomes[batch.aux["donors"][0]]
        assert np.allclose(batch.trials[0], genomes[0] + 0.5 * (d[0] - d[1]))


class TestLayerIsolation:
    def test_feedback_does_not_touch_other_layers(self):
        pop, bounds = make_population(10, 2)
        rng = RandomSource(19)
        shade = ShadeLayer(0, 10, bounds)
        bid = BiDLayer(1, 10, bounds)
        bid.initialize(pop, rng)
        fixed = FixedDELayer(2, bounds)
        fixed.begin_generation(pop)
        sig_bid = bid.state_signature()
        sig_fixed = fixed.state_signature()
        prop = shade.propose(0, pop, rng)
        shade.feedback(0, prop, 9.0, 1.0, rng)
        shade.end_generation()
        assert bid.state_signature() == sig_bid
        assert fixed.state_signature() == sig_fixed
        sig_shade = shade.state_signature()
        prop = bid.propose(0, pop, rng)
        bid.feedback(0, prop, 9.0, 9.0, rng)
        assert shade.state_signature() == sig_shade


class TestSmokeEquivalence:
    def test_pinned_shade_matches_fixed_family(self):
        # memories pinned, archive empty, pbest forced to the best member:
        # every trial must be expressible as the current-to-best/1 family for
        # some F in (0, 1], with parameter medians on the fixed constants.
        pop, bounds = make_population(6, 2, seed=20)
        shade = ShadeLayer(0, 6, bounds, p_range=(1e-9, 1e-9))
        rng = RandomSource(21)
        fs, crs = [], []
        best = pop.genomes[pop.best_index()]
        for _ in range(2000):
            prop = shade.propose(2, pop, rng)
            fs.append(prop.f_used)
            crs.append(prop.cr_used)
            x = pop.genomes[2]
            r1 = pop.genomes[prop.aux["r1"]]
            r2 = pop.genomes[prop.aux["r2"]]
            mutant = x + prop.f_used * (best - x) + prop.f_used * (r1 - r2)
            from mlccde.core import repair_bounds
            mutant = repair_bounds(mutant, x, bounds)
            assert np.all(np.isclose(prop.trial, x) | np.isclose(prop.trial, mutant))
        assert abs(np.median(fs) - 0.7) < 0.02
        assert abs(np.median(crs) - 0.5) < 0.02


class TestLayerSpec:
    def test_build_dispatch(self):
        bounds = Bounds.symmetric(2, 1.0)
        assert isinstance(LayerSpec("shade").build(0, 10, bounds), ShadeLayer)
        assert isinstance(LayerSpec("bid").build(1, 10, bounds), BiDLayer)
        assert isinstance(LayerSpec("fixed", strategy="best/2").build(2, 10, bounds),
                          FixedDELayer)
        with pytest.raises(ValueError):
            LayerSpec("nope").build(0, 10, bounds)

    def test_shade_history_defaults_to_np(self):
        bounds = Bounds.symmetric(2, 1.0)
        layer = LayerSpec("shade").build(0, 37, bounds)
        assert layer.h == 37
        assert np.all(layer.m_f == 0.7) and np.all(layer.m_cr == 0.5)
