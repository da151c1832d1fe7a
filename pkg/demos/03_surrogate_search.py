"""
Search against a surrogate target
=================================

No training here: fitness is similarity to a fixed descriptor, which makes
the engine cheap to watch.
"""

# %%
from gramnas.engine import EvolutionConfig, evolve
from gramnas.evaluator import SurrogateEvaluator
from gramnas.grammar import fixture_path, load_grammar
from gramnas.phenotype import parse_rendered, render
from gramnas.stats import pearson
from gramnas.structure import load_structure

g = load_grammar(fixture_path("dense.grammar"))
s = load_structure(fixture_path("dense.structure"))
target = parse_rendered(fixture_path("surrogate_target.txt").read_text())
print(render(target))

# %%
cfg = EvolutionConfig(population_size=20, generations=30, master_seed=0)
result = evolve(g, s, cfg, SurrogateEvaluator(target))
for row in result.stats[::5] + result.stats[-1:]:
    print(row.generation, round(row.best_fitness, 4), round(row.mean_fitness, 4), row.best_hidden_layers)

# %%
print(render(result.best_descriptor))

# %%
# How closely does depth track fitness along the run?
best = [r.best_fitness for r in result.stats]
depth = [r.mean_hidden_layers for r in result.stats]
print(pearson(best, depth))
