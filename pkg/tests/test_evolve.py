"""Evolution operators against closed-form and replay oracles."""

import numpy as np
import pytest

from tmaze_evo.errors import CheckpointCorruptError, ConfigError
from tmaze_evo.evolve import (
    EvolutionConfig,
    GenerationRecord,
    elite_count,
    evaluate_genotype,
    init_population,
    linear_ranking_select,
    load_checkpoint,
    mutate,
    mutation_std,
    run_evolution,
    save_history,
    selection_weights,
    two_point_crossover,
    _next_generation,
)
from tmaze_evo.layouts import desk_double_t
from tmaze_evo.rnn import GENOTYPE_LEN, RY_LEN
from tmaze_evo.seeds import STREAM_REPRO, rng_for
from tmaze_evo.world import TrialParams, TrialRunner

LAYOUT = desk_double_t()


def small_cfg(**kw):
    base = dict(population_size=4, generations=3, trials_per_genotype=1,
                elite_fraction=0.25, max_steps=60, master_seed=11)
    base.update(kw)
    return EvolutionConfig(**base)


class TestMutationStd:
    def test_documented_decay_points(self):
        assert mutation_std(0) == 0.3
        assert mutation_std(50) == 0.15
        assert mutation_std(150) == 0.075

    def test_matches_closed_form_on_random_indices(self):
        """1000 random generation indices agree with the decay formula."""
        rng = np.random.default_rng(3)
        for m in rng.integers(0, 1000, size=1000):
            want = 0.3 * (50.0 / (50.0 + float(m)))
            assert abs(mutation_std(int(m)) - want) < 1e-12

    def test_base_and_halflife_arguments(self):
        assert mutation_std(10, base=1.0, halflife=10.0) == 0.5


class _FixedCuts:
    """Stand-in generator returning preset crossover cut points."""

    def __init__(self, i, j):
        self.i, self.j = i, j

    def integers(self, low, high, size):
        return np.array([self.i, self.j])


class TestCrossover:
    def test_replay_oracle_exact(self):
        """1000 crossovers equal an independently assembled child."""
        rng = np.random.default_rng(5)
        a = rng.normal(size=GENOTYPE_LEN)
        b = rng.normal(size=GENOTYPE_LEN)
        for k in range(1000):
            i, j = np.sort(
                np.random.default_rng(k).integers(0, GENOTYPE_LEN + 1, size=2))
            want = np.concatenate([a[:i], b[i:j], a[j:]])
            got = two_point_crossover(a, b, np.random.default_rng(k))
            assert np.array_equal(got, want)

    def test_every_gene_traces_to_a_parent(self):
        """10^4 random crossovers never invent a gene value."""
        rng = np.random.default_rng(8)
        a = np.arange(137, dtype=float)
        b = np.arange(137, dtype=float) + 1000.0
        for _ in range(10_000):
            c = two_point_crossover(a, b, rng)
            assert np.all((c == a) | (c == b))

    def test_degenerate_cut_points(self):
        a = np.arange(10, dtype=float)
        b = -a
        assert np.array_equal(two_point_crossover(a, b, _FixedCuts(4, 4)), a)
        assert np.array_equal(two_point_crossover(a, b, _FixedCuts(0, 10)), b)


class TestMutate:
    def test_rate_and_moments_over_a_million_genes(self):
        """Mutated fraction and delta moments match the configured law."""
        g = np.zeros(1_000_000)
        out = mutate(g, 0.06, 0.3, np.random.default_rng(12))
        hit = out != 0.0
        frac = hit.mean()
        assert abs(frac - 0.06) < 0.001
        deltas = out[hit]
        assert abs(deltas.mean()) < 0.005
        assert abs(deltas.var() - 0.09) < 0.005

    def test_rate_zero_is_identity(self):
        g = np.random.default_rng(1).normal(size=500)
        assert np.array_equal(mutate(g, 0.0, 0.3, np.random.default_rng(2)), g)

    def test_std_zero_is_identity(self):
        g = np.random.default_rng(1).normal(size=500)
        assert np.array_equal(mutate(g, 0.5, 0.0, np.random.default_rng(2)), g)

    def test_frozen_genes_never_move(self):
        """High-rate mutation leaves masked genes bit-identical."""
        rng = np.random.default_rng(9)
        g = rng.normal(size=1000)
        frozen = np.zeros(1000, dtype=bool)
        frozen[:900] = True
        changed_free = False
        for _ in range(50):
            out = mutate(g, 0.9, 0.3, rng, frozen=frozen)
            assert np.array_equal(out[:900], g[:900])
            changed_free |= not np.array_equal(out[900:], g[900:])
        assert changed_free


class TestSelection:
    def test_two_way_closed_form(self):
        w = selection_weights([1.0, 2.0])
        assert w == pytest.approx([1 / 3, 2 / 3], abs=1e-15)

    def test_fifty_way_best_probability(self):
        w = selection_weights(np.arange(50.0))
        assert w[-1] == pytest.approx(50 / 1275, abs=1e-15)
        assert w.sum() == pytest.approx(1.0, abs=1e-12)

    def test_ranks_follow_fitness_not_position(self):
        w = selection_weights([5.0, 1.0, 3.0])
        assert w == pytest.approx([3 / 6, 1 / 6, 2 / 6], abs=1e-15)

    def test_ties_rank_lower_index_worse(self):
        w = selection_weights(np.full(5, 2.5))
        assert w == pytest.approx(np.arange(1, 6) / 15, abs=1e-15)

    def test_monte_carlo_two_way(self):
        """Best of two is drawn with frequency 2/3 over 30000 draws."""
        rng = np.random.default_rng(17)
        hits = sum(linear_ranking_select([0.0, 1.0], rng) for _ in range(30_000))
        assert hits / 30_000 == pytest.approx(2 / 3, abs=0.015)

    def test_returns_valid_index(self):
        rng = np.random.default_rng(4)
        fitness = rng.normal(size=20)
        for _ in range(200):
            assert 0 <= linear_ranking_select(fitness, rng) < 20


class TestEliteCount:
    def test_rounding_half_up(self):
        assert elite_count(EvolutionConfig(population_size=50)) == 5
        assert elite_count(EvolutionConfig(population_size=20)) == 2
        assert elite_count(EvolutionConfig(population_size=25)) == 3

    def test_zero_elites_rejected(self):
        with pytest.raises(ConfigError):
            EvolutionConfig(population_size=10, elite_fraction=0.04).validate()

    def test_bad_fields_rejected(self):
        bad = [dict(population_size=1), dict(generations=0),
               dict(trials_per_genotype=0), dict(elite_fraction=1.5),
               dict(mutation_rate=-0.1), dict(mutation_std_halflife=0.0),
               dict(max_steps=0), dict(freeze_mask="half")]
        for kw in bad:
            with pytest.raises(ConfigError):
                small_cfg(**kw).validate()


class TestInitPopulation:
    def test_population_statistics(self):
        """Gene pool of generation 0 is Gaussian(0, init_std)."""
        cfg = EvolutionConfig(population_size=10, master_seed=3)
        pop = init_population(cfg)
        assert len(pop) == 10
        genes = np.concatenate(pop)
        assert genes.size == 10 * GENOTYPE_LEN
        assert abs(genes.mean()) < 0.005
        assert abs(genes.std() - 0.3) < 0.005

    def test_output_only_freeze_shares_the_core(self):
        """Frozen inputs/recurrence identical across individuals, outputs not."""
        cfg = EvolutionConfig(population_size=6, master_seed=3,
                              freeze_mask="evolve-output-only")
        pop = init_population(cfg)
        core = slice(0, GENOTYPE_LEN - RY_LEN)
        for g in pop[1:]:
            assert np.array_equal(g[core], pop[0][core])
            assert not np.array_equal(g[core.stop:], pop[0][core.stop:])


class TestEvaluate:
    def test_null_controller_scores_zero_deterministically(self):
        """All-zero genes never leave home; repeats are bit-identical."""
        runner = TrialRunner(LAYOUT, params=TrialParams(max_steps=50))
        g = np.zeros(GENOTYPE_LEN)
        mean_a, fits_a, steps_a = evaluate_genotype(g, runner, 7, 3, 0, 0)
        mean_b, fits_b, steps_b = evaluate_genotype(g, runner, 7, 3, 0, 0)
        assert mean_a == 0.0
        assert np.array_equal(fits_a, fits_b)
        assert np.array_equal(steps_a, steps_b)


class TestReproductionReplay:
    def test_brood_matches_manual_replay(self):
        """One reproduction step equals a hand-rolled replay of its draws."""
        length = 60
        cfg = EvolutionConfig(population_size=5, elite_fraction=0.2,
                              mutation_rate=0.5, master_seed=21)
        rng = np.random.default_rng(33)
        pop = [rng.normal(size=length) for _ in range(5)]
        fitness = np.array([0.3, 2.0, 1.1, 2.0, 0.0])
        tf = fitness[:, None].repeat(2, axis=1)
        ts = np.full((5, 2), 9, dtype=np.int64)
        m = 3
        new_pop, carry = _next_generation(pop, fitness, tf, ts, cfg, m, None)

        assert len(new_pop) == 5
        assert np.array_equal(new_pop[0], pop[1])  # tied best, lower index

        ranks = sorted(range(5), key=lambda i: (fitness[i], i))
        w = np.zeros(5)
        for r, i in enumerate(ranks):
            w[i] = (r + 1) / 15
        cum = np.cumsum(w)
        replay = rng_for(21, STREAM_REPRO, m)
        std = 0.3 * 50.0 / (50.0 + m)
        for c in range(1, 5):
            pa = pop[min(int(np.searchsorted(cum, replay.random(), "right")), 4)]
            pb = pop[min(int(np.searchsorted(cum, replay.random(), "right")), 4)]
            i, j = np.sort(replay.integers(0, length + 1, size=2))
            child = np.concatenate([pa[:i], pb[i:j], pa[j:]])
            u = replay.random(length)
            delta = replay.normal(0.0, std, length)
            child = np.where(u < 0.5, child + delta, child)
            assert np.array_equal(new_pop[c], child)

        assert np.array_equal(carry[0], [2.0])
        assert np.array_equal(carry[1], tf[1][None, :])
        assert np.array_equal(carry[2], ts[1][None, :])


def tiny_run(tmp=None, **kw):
    cfg = small_cfg(**kw)
    return run_evolution(LAYOUT, cfg, checkpoint_dir=tmp), cfg


class TestRunEvolution:
    def test_history_shape_and_monotonic_best(self):
        (history, best), cfg = tiny_run()
        assert len(history) == cfg.generations
        bests = [r.best_so_far_fitness for r in history]
        assert all(b2 >= b1 for b1, b2 in zip(bests, bests[1:]))
        assert best.shape == (GENOTYPE_LEN,)
        for rec in history:
            assert rec.fitness.shape == (4,)
            assert rec.trial_fitness.shape == (4, 1)
            assert rec.mean_fitness == pytest.approx(rec.fitness.mean())

    def test_bitwise_reproducibility(self):
        (ha, ba), _ = tiny_run()
        (hb, bb), _ = tiny_run()
        assert np.array_equal(ba, bb)
        for ra, rb in zip(ha, hb):
            assert np.array_equal(ra.fitness, rb.fitness)
            assert np.array_equal(ra.trial_steps, rb.trial_steps)
            assert ra.best_so_far_fitness == rb.best_so_far_fitness
            assert ra.best_so_far_id == rb.best_so_far_id

    def test_parallel_evaluation_matches_serial(self):
        """jobs=2 reproduces the jobs=1 history bit for bit."""
        cfg = small_cfg()
        ha, ba = run_evolution(LAYOUT, cfg, jobs=1)
        hb, bb = run_evolution(LAYOUT, cfg, jobs=2)
        assert np.array_equal(ba, bb)
        for ra, rb in zip(ha, hb):
            assert np.array_equal(ra.fitness, rb.fitness)
            assert np.array_equal(ra.trial_fitness, rb.trial_fitness)

    def test_elites_carried_unchanged(self, tmp_path):
        """Each generation's best genotype reappears in the next population."""
        (history, _), cfg = tiny_run(tmp=str(tmp_path))
        for m in range(cfg.generations - 1):
            _, rec, pop, _ = load_checkpoint(
                str(tmp_path / f"checkpoint_gen{m:04d}.txt"))
            _, _, pop_next, _ = load_checkpoint(
                str(tmp_path / f"checkpoint_gen{m + 1:04d}.txt"))
            top = int(np.lexsort((np.arange(4), -rec.fitness))[0])
            assert any(np.array_equal(pop[top], g) for g in pop_next)

    def test_checkpoint_round_trip(self, tmp_path):
        (history, best), cfg = tiny_run(tmp=str(tmp_path))
        path = str(tmp_path / "checkpoint_gen0002.txt")
        _, rec, pop, best_g = load_checkpoint(path)
        last = history[-1]
        assert rec.generation == 2
        assert np.array_equal(rec.fitness, last.fitness)
        assert np.array_equal(rec.trial_fitness, last.trial_fitness)
        assert np.array_equal(rec.trial_steps, last.trial_steps)
        assert rec.best_so_far_fitness == last.best_so_far_fitness
        assert rec.best_so_far_id == last.best_so_far_id
        assert np.array_equal(best_g, best)
        assert len(pop) == 4

    def test_resume_continues_identically(self, tmp_path):
        """Resuming from generation 0 replays generations 1+ exactly."""
        (full, best_full), cfg = tiny_run(tmp=str(tmp_path / "a"))
        tail, best_tail = run_evolution(
            LAYOUT, cfg,
            resume_from=str(tmp_path / "a" / "checkpoint_gen0000.txt"))
        assert len(tail) == len(full) - 1
        for ra, rb in zip(full[1:], tail):
            assert ra.generation == rb.generation
            assert np.array_equal(ra.fitness, rb.fitness)
            assert ra.best_so_far_fitness == rb.best_so_far_fitness
        assert np.array_equal(best_full, best_tail)

    def test_tampered_checkpoint_rejected(self, tmp_path):
        _, cfg = tiny_run(tmp=str(tmp_path))
        path = tmp_path / "checkpoint_gen0001.txt"
        text = path.read_text().replace("best-so-far-fitness ",
                                        "best-so-far-fitness 9", 1)
        path.write_text(text)
        with pytest.raises(CheckpointCorruptError):
            load_checkpoint(str(path))

    def test_foreign_checkpoint_rejected_on_resume(self, tmp_path):
        _, cfg = tiny_run(tmp=str(tmp_path))
        other = small_cfg(master_seed=99)
        with pytest.raises(CheckpointCorruptError):
            run_evolution(LAYOUT, other,
                          resume_from=str(tmp_path / "checkpoint_gen0000.txt"))

    def test_stop_threshold_ends_run_early(self):
        (history, _), _ = tiny_run(stop_at_fitness=-1.0)
        assert len(history) == 1

    def test_output_only_freeze_holds_across_generations(self, tmp_path):
        (history, _), cfg = tiny_run(tmp=str(tmp_path),
                                     freeze_mask="evolve-output-only")
        _, _, pop, _ = load_checkpoint(
            str(tmp_path / f"checkpoint_gen{cfg.generations - 1:04d}.txt"))
        core = slice(0, GENOTYPE_LEN - RY_LEN)
        for g in pop[1:]:
            assert np.array_equal(g[core], pop[0][core])

    def test_reevaluated_elites_still_monotonic(self):
        (history, _), _ = tiny_run(reevaluate_elites=True)
        bests = [r.best_so_far_fitness for r in history]
        assert all(b2 >= b1 for b1, b2 in zip(bests, bests[1:]))


class TestHistoryFile:
    def test_exact_csv_bytes(self, tmp_path):
        recs = [
            GenerationRecord(0, np.array([0.5]), np.zeros((1, 1)),
                             np.zeros((1, 1), dtype=np.int64), 0.5, 0.5,
                             (0, 0), 60.0),
            GenerationRecord(1, np.array([1.25]), np.zeros((1, 1)),
                             np.zeros((1, 1), dtype=np.int64), 1.25, 1.25,
                             (1, 0), 42.5),
        ]
        path = tmp_path / "history.csv"
        save_history(recs, str(path))
        want = ("generation,best_so_far_fitness,mean_fitness,"
                "best_elapsed_steps\n"
                "0,0.5,0.5,60.0\n"
                "1,1.25,1.25,42.5\n")
        assert path.read_text() == want
