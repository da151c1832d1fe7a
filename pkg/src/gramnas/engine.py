"""Generational evolution with tournament selection, elitism and per-generation checkpoints.

Randomness is drawn from streams keyed by (master seed, purpose, counters) so
a run is reproducible from its seed alone, evaluations can run in any order,
and a run resumed from a checkpoint continues exactly as if uninterrupted.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as streams
from .errors import ConfigMismatch, GramnasError, UnevaluatedIndividual
from .evaluator import EvaluationBudget, FitnessEvaluator, FitnessReport
from .genotype import Individual, decode_individual, deep_copy, random_individual
from .grammar import Grammar, parse_grammar
from .operators import OperatorConfig, apply_variation
from .phenotype import NetworkDescriptor, hidden_layer_count
from .stats import GenerationStats, stats_to_csv
from .structure import GaStructure, parse_structure, require_valid

__all__ = [
    "EvolutionConfig",
    "EngineState",
    "RunResult",
    "tournament_select",
    "elite_count",
    "compute_stats",
    "initial_state",
    "next_generation",
    "evolve",
    "checkpoint_save",
    "checkpoint_load",
]

log = logging.getLogger(__name__)
CHECKPOINT_FORMAT = 1


@dataclass(frozen=True)
class EvolutionConfig:
    population_size: int = 100
    generations: int = 100
    tournament_size: int = 3
    elite_fraction: float = 0.01
    operators: OperatorConfig = field(default_factory=OperatorConfig)
    budget: EvaluationBudget = field(default_factory=EvaluationBudget)
    master_seed: int = 0
    parallel_evaluations: int = 1

    def __post_init__(self):
        if self.population_size < 1 or self.generations < 0:
            raise ValueError("population_size must be >= 1 and generations >= 0")
        if not 1 <= self.tournament_size <= self.population_size:
            raise ValueError("tournament_size must lie in [1, population_size]")
        if not 0 <= self.elite_fraction < 1:
            raise ValueError("elite_fraction must lie in [0, 1)")
        if elite_count(self.elite_fraction, self.population_size) >= self.population_size:
            raise ValueError("elites would fill the whole population")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.parallel_evaluations < 1:
            raise ValueError("parallel_evaluations must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvolutionConfig":
        d = dict(d)
        ops = OperatorConfig(**d.pop("operators", {}))
        budget = EvaluationBudget(**d.pop("budget", {}))
        return cls(operators=ops, budget=budget, **d)

    def config_hash(self) -> str:
        """Hash of everything that affects results (worker count excluded)."""
        d = self.to_dict()
        d.pop("parallel_evaluations")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def elite_count(fraction: float, population_size: int) -> int:
    # round before ceil so 0.01 * 100 is 1, not 2
    return math.ceil(round(fraction * population_size, 9))


@dataclass
class EngineState:
    generation: int
    population: list[Individual]
    next_id: int
    stats: list[GenerationStats]
    best: Individual


@dataclass
class RunResult:
    best_individual: Individual
    best_descriptor: NetworkDescriptor
    stats: list[GenerationStats]
    checkpoints: list[Path]
    population: list[Individual]


def tournament_select(population: Sequence[Individual], k: int, rng: np.random.Generator) -> Individual:
    """Best of ``k`` uniform draws with replacement; ties among the draws are broken at random."""
    if not population:
        raise ValueError("empty population")
    if any(ind.fitness is None for ind in population):
        raise UnevaluatedIndividual("tournament over an unevaluated individual")
    draws = rng.integers(len(population), size=k)
    best = max(population[i].fitness for i in draws)
    tied = [int(i) for i in draws if population[i].fitness == best]
    return population[tied[int(rng.integers(len(tied)))]]


def _rank_key(ind: Individual):
    return (-ind.fitness, ind.id)


def compute_stats(population: Sequence[Individual], generation: int) -> GenerationStats:
    best = min(population, key=_rank_key)
    hidden = [ind.diagnostics["hidden_layers"] for ind in population]
    return GenerationStats(
        generation=generation,
        best_fitness=float(best.fitness),
        mean_fitness=float(np.mean([ind.fitness for ind in population])),
        best_hidden_layers=int(best.diagnostics["hidden_layers"]),
        mean_hidden_layers=float(np.mean(hidden)),
        best_id=int(best.id),
    )


def _evaluate_one(ind: Individual, g: Grammar, evaluator: FitnessEvaluator, cfg: EvolutionConfig):
    try:
        nd = decode_individual(g, ind)
    except GramnasError as exc:
        return FitnessReport.invalid(f"decode: {exc}"), 0
    budget = replace(cfg.budget, eval_seed=streams.derive_seed(cfg.master_seed, "eval", ind.id))
    try:
        report = evaluator.evaluate(nd, budget)
    except Exception as exc:  # evaluator failures never abort a run
        log.warning("evaluation of individual %s failed: %s", ind.id, exc)
        report = FitnessReport.invalid(f"evaluator-error: {exc}")
    return report, hidden_layer_count(nd)


def evaluate_population(
    individuals: Sequence[Individual], g: Grammar, evaluator: FitnessEvaluator, cfg: EvolutionConfig
) -> None:
    """Evaluate every individual lacking a fitness, in place."""
    todo = [ind for ind in individuals if ind.fitness is None]
    if cfg.parallel_evaluations > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallel_evaluations) as pool:
            results = list(pool.map(lambda ind: _evaluate_one(ind, g, evaluator, cfg), todo))
    else:
        results = [_evaluate_one(ind, g, evaluator, cfg) for ind in todo]
    for ind, (report, hidden) in zip(todo, results):
        ind.fitness = float(report.fitness)
        ind.diagnostics = {
            "valid": report.valid,
            "train_accuracy": report.train_accuracy,
            "reason": report.reason,
            "hidden_layers": hidden,
        }


def initial_state(g: Grammar, s: GaStructure, cfg: EvolutionConfig, evaluator: FitnessEvaluator) -> EngineState:
    require_valid(g, s)
    population = []
    for i in range(cfg.population_size):
        ind = random_individual(g, s, streams.stream(cfg.master_seed, "init", i), cfg.operators.depth_limit, ind_id=i)
        population.append(ind)
    evaluate_population(population, g, evaluator, cfg)
    stats = compute_stats(population, 0)
    best = deep_copy(min(population, key=_rank_key))
    return EngineState(0, population, cfg.population_size, [stats], best)


def next_generation(state: EngineState, g: Grammar, cfg: EvolutionConfig, evaluator: FitnessEvaluator) -> EngineState:
    gen = state.generation + 1
    pop = state.population
    n_elite = elite_count(cfg.elite_fraction, cfg.population_size)
    elites = [deep_copy(ind) for ind in sorted(pop, key=_rank_key)[:n_elite]]
    selector = streams.stream(cfg.master_seed, "select", gen)
    offspring: list[Individual] = []
    pair = 0
    while len(elites) + len(offspring) < cfg.population_size:
        parents = (
            tournament_select(pop, cfg.tournament_size, selector),
            tournament_select(pop, cfg.tournament_size, selector),
        )
        children = apply_variation(parents, g, cfg.operators, streams.stream(cfg.master_seed, "vary", gen, pair))
        pair += 1
        offspring.extend(children[: cfg.population_size - len(elites) - len(offspring)])
    next_id = state.next_id
    for child in offspring:
        child.id = next_id
        next_id += 1
    evaluate_population(offspring, g, evaluator, cfg)
    population = elites + offspring
    stats = compute_stats(population, gen)
    champion = min(population, key=_rank_key)
    best = deep_copy(champion) if champion.fitness > state.best.fitness else state.best
    return EngineState(gen, population, next_id, state.stats + [stats], best)


# --- checkpoints ------------------------------------------------------------


def checkpoint_save(state: EngineState, path, g: Grammar, s: GaStructure, cfg: EvolutionConfig) -> Path:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "generation": state.generation,
        "config": cfg.to_dict(),
        "config_hash": cfg.config_hash(),
        "grammar": str(g),
        "structure": s.to_text(),
        "next_id": state.next_id,
        "population": [ind.to_dict() for ind in state.population],
        "best": state.best.to_dict(),
        "stats": [row.to_dict() for row in state.stats],
    }
    path = Path(path)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(doc), encoding="utf-8")
    tmp.replace(path)
    return path


@dataclass
class Checkpoint:
    state: EngineState
    config: EvolutionConfig
    grammar: Grammar
    structure: GaStructure


def checkpoint_load(path, cfg: Optional[EvolutionConfig] = None) -> Checkpoint:
    """Read a checkpoint; with ``cfg`` given, refuse one written under a different configuration."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: unsupported checkpoint format {doc.get('format')!r}")
    if cfg is not None and cfg.config_hash() != doc["config_hash"]:
        raise ConfigMismatch(f"{path} was written with a different configuration")
    state = EngineState(
        doc["generation"],
        [Individual.from_dict(d) for d in doc["population"]],
        doc["next_id"],
        [GenerationStats.from_dict(d) for d in doc["stats"]],
        Individual.from_dict(doc["best"]),
    )
    return Checkpoint(
        state, EvolutionConfig.from_dict(doc["config"]), parse_grammar(doc["grammar"]), parse_structure(doc["structure"])
    )


def latest_checkpoint(run_dir) -> Optional[Path]:
    found = sorted(Path(run_dir).glob("gen_*.json"), key=lambda p: int(p.stem.split("_")[1]))
    return found[-1] if found else None


# --- driver -----------------------------------------------------------------


def evolve(
    g: Grammar,
    s: GaStructure,
    cfg: EvolutionConfig,
    evaluator: FitnessEvaluator,
    *,
    run_dir=None,
    resume: Optional[EngineState] = None,
    stop_after: Optional[int] = None,
    on_generation: Optional[Callable[[EngineState], None]] = None,
) -> RunResult:
    """Run (or continue) evolution up to ``cfg.generations``.

    With ``run_dir`` set, ``gen_<n>.json`` checkpoints and ``stats.csv`` are
    written after every generation. ``stop_after`` ends the loop early at that
    generation, leaving a resumable run behind.
    """
    require_valid(g, s)
    run_dir = Path(run_dir) if run_dir is not None else None
    checkpoints: list[Path] = []

    def record(state: EngineState) -> None:
        if run_dir is not None:
            checkpoints.append(checkpoint_save(state, run_dir / f"gen_{state.generation}.json", g, s, cfg))
            (run_dir / "stats.csv").write_text(stats_to_csv(state.stats), encoding="utf-8")
        if on_generation is not None:
            on_generation(state)
        last = state.stats[-1]
        log.info("gen %d best %.4f mean %.4f", last.generation, last.best_fitness, last.mean_fitness)

    if resume is None:
        state = initial_state(g, s, cfg, evaluator)
        record(state)
    else:
        state = resume
    limit = cfg.generations if stop_after is None else min(stop_after, cfg.generations)
    while state.generation < limit:
        state = next_generation(state, g, cfg, evaluator)
        record(state)
    return RunResult(state.best, decode_individual(g, state.best), state.stats, checkpoints, state.population)
