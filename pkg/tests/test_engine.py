import json
import math
import statistics

import numpy as np
import pytest

from gramnas.engine import (
    EvolutionConfig,
    checkpoint_load,
    checkpoint_save,
    elite_count,
    evolve,
    initial_state,
    latest_checkpoint,
    next_generation,
    tournament_select,
)
from gramnas.errors import ConfigMismatch, UnevaluatedIndividual
from gramnas.evaluator import FitnessReport, SurrogateEvaluator
from gramnas.genotype import Individual, audit, decode_individual
from gramnas.grammar import fixture_path
from gramnas.phenotype import parse_rendered, render
from gramnas.stats import aggregate_runs, pearson, read_stats_csv, stats_to_csv


@pytest.fixture(scope="module")
def surrogate():
    return SurrogateEvaluator(parse_rendered(fixture_path("surrogate_target.txt").read_text()))


def cfg(**kw):
    base = dict(population_size=12, generations=6, tournament_size=3, elite_fraction=0.1, master_seed=3)
    base.update(kw)
    return EvolutionConfig(**base)


def scored(fitnesses):
    return [Individual([], fitness=f, id=i) for i, f in enumerate(fitnesses)]


# --- selection ---------------------------------------------------------------


def test_tournament_closed_form():
    rng = np.random.default_rng(0)
    pop = scored([0.1, 0.9])
    wins = sum(tournament_select(pop, 3, rng).id == 1 for _ in range(10_000))
    assert abs(wins / 10_000 - 0.875) <= 0.02


@pytest.mark.parametrize("fitnesses,k", [([0.5] * 5, 3), ([0.1, 0.4, 0.9, 0.3], 1)])
def test_tournament_uniform_cases(fitnesses, k):
    rng = np.random.default_rng(1)
    pop = scored(fitnesses)
    counts = np.bincount([tournament_select(pop, k, rng).id for _ in range(10_000)], minlength=len(pop))
    assert np.all(np.abs(counts / 10_000 - 1 / len(pop)) <= 0.03)


def test_tournament_requires_fitness():
    with pytest.raises(UnevaluatedIndividual):
        tournament_select([Individual([], id=0)], 1, np.random.default_rng(0))


def test_elite_count():
    assert elite_count(0.01, 100) == 1
    assert elite_count(0.0, 100) == 0
    assert elite_count(0.1, 12) == 2


def test_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(population_size=3, tournament_size=4)
    with pytest.raises(ValueError):
        EvolutionConfig(elite_fraction=1.0)
    c = cfg()
    assert EvolutionConfig.from_dict(c.to_dict()) == c


# --- stats -------------------------------------------------------------------


def test_pearson_examples():
    assert pearson([1, 2, 3], [2, 4, 6]) == pytest.approx(1.0, abs=1e-15)
    assert pearson([1, 2, 3], [3, 2, 1]) == pytest.approx(-1.0, abs=1e-15)
    assert math.isnan(pearson([1, 1, 1], [1, 2, 3]))
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])


def test_pearson_matches_statistics_module():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(3, 60))
        x, y = rng.normal(size=n), rng.normal(size=n) + rng.normal() * np.arange(n)
        assert abs(pearson(x, y) - statistics.correlation(x.tolist(), y.tolist())) <= 1e-12


def test_aggregate_runs():
    runs = [{"generation": np.arange(3.0), "best_fitness": np.array(v)} for v in ([0, 1, 2], [2, 3, 4.0])]
    agg = aggregate_runs(runs)
    assert agg["best_fitness_mean"].tolist() == [1, 2, 3]
    assert agg["best_fitness_std"].tolist() == [1, 1, 1]


# --- evolution ---------------------------------------------------------------


def test_generation_zero_only(dense_grammar, dense_structure, surrogate):
    result = evolve(dense_grammar, dense_structure, cfg(generations=0), surrogate)
    assert [row.generation for row in result.stats] == [0]
    assert len(result.population) == 12 and all(i.fitness is not None for i in result.population)


def test_run_invariants(dense_grammar, dense_structure, surrogate):
    seen = []

    def check(state):
        assert len(state.population) == 12
        for ind in state.population:
            audit(dense_grammar, ind, dense_structure)
        seen.append(state)

    result = evolve(dense_grammar, dense_structure, cfg(generations=8), surrogate, on_generation=check)
    best = [row.best_fitness for row in result.stats]
    assert all(b >= a for a, b in zip(best, best[1:]))
    assert result.best_individual.fitness == best[-1] == max(best)
    assert result.best_descriptor == decode_individual(dense_grammar, result.best_individual)
    for prev, cur in zip(seen, seen[1:]):
        top = min(prev.population, key=lambda i: (-i.fitness, i.id))
        assert top.id in {i.id for i in cur.population}
        ids = [i.id for i in cur.population]
        assert len(set(ids)) == len(ids)


def test_runs_are_deterministic_for_any_worker_count(dense_grammar, dense_structure, surrogate):
    a = evolve(dense_grammar, dense_structure, cfg(), surrogate)
    b = evolve(dense_grammar, dense_structure, cfg(parallel_evaluations=4), surrogate)
    assert stats_to_csv(a.stats) == stats_to_csv(b.stats)
    assert render(a.best_descriptor) == render(b.best_descriptor)
    c = evolve(dense_grammar, dense_structure, cfg(master_seed=4), surrogate)
    assert stats_to_csv(c.stats) != stats_to_csv(a.stats)


def test_without_variation_offspring_are_copies(dense_grammar, dense_structure, surrogate):
    c = cfg(operators=cfg().operators.__class__(crossover_rate=0, mutation_rate=0))
    state = initial_state(dense_grammar, dense_structure, c, surrogate)
    for _ in range(3):
        before = {render(decode_individual(dense_grammar, i)) for i in state.population}
        state = next_generation(state, dense_grammar, c, surrogate)
        assert {render(decode_individual(dense_grammar, i)) for i in state.population} <= before


def test_evaluator_failures_score_zero(dense_grammar, dense_structure):
    class Flaky:
        def evaluate(self, nd, budget):
            if len(nd.layers) % 2:
                raise RuntimeError("boom")
            return FitnessReport(0.5, True)

    result = evolve(dense_grammar, dense_structure, cfg(generations=2), Flaky())
    for ind in result.population:
        assert ind.fitness in (0.0, 0.5)
        if ind.fitness == 0.0:
            assert ind.diagnostics["reason"].startswith("evaluator-error")


# --- checkpoints -------------------------------------------------------------


def test_checkpoint_resume_replays_exactly(dense_grammar, dense_structure, surrogate, tmp_path):
    c = cfg(generations=12)
    full = tmp_path / "full"
    part = tmp_path / "part"
    full.mkdir()
    part.mkdir()
    evolve(dense_grammar, dense_structure, c, surrogate, run_dir=full)
    evolve(dense_grammar, dense_structure, c, surrogate, run_dir=part, stop_after=5)
    assert latest_checkpoint(part).name == "gen_5.json"
    ck = checkpoint_load(latest_checkpoint(part), c)
    evolve(ck.grammar, ck.structure, ck.config, surrogate, run_dir=part, resume=ck.state)
    assert (part / "stats.csv").read_bytes() == (full / "stats.csv").read_bytes()
    assert (part / "gen_12.json").read_bytes() == (full / "gen_12.json").read_bytes()
    rows = read_stats_csv(part / "stats.csv")
    assert rows["generation"].tolist() == list(range(13))


def test_checkpoint_of_generation_zero(dense_grammar, dense_structure, surrogate, tmp_path):
    c = cfg()
    state = initial_state(dense_grammar, dense_structure, c, surrogate)
    path = checkpoint_save(state, tmp_path / "gen_0.json", dense_grammar, dense_structure, c)
    back = checkpoint_load(path, c)
    assert back.state.population == state.population
    assert back.grammar == dense_grammar and back.structure == dense_structure
    assert json.loads(path.read_text())["generation"] == 0


def test_checkpoint_config_mismatch(dense_grammar, dense_structure, surrogate, tmp_path):
    c = cfg()
    state = initial_state(dense_grammar, dense_structure, c, surrogate)
    path = checkpoint_save(state, tmp_path / "gen_0.json", dense_grammar, dense_structure, c)
    with pytest.raises(ConfigMismatch):
        checkpoint_load(path, cfg(population_size=13))
    checkpoint_load(path, cfg(parallel_evaluations=3))
