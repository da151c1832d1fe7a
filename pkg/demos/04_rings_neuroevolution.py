"""
Neuroevolution on the rings problem
===================================

Dense networks trained with SGD for every fitness call. Evolve a few
generations, retrain the winner a couple of times and ensemble the copies.
Takes several seconds.
"""

# %%
import numpy as np

from gramnas.datasets import make_toy_dataset
from gramnas.engine import EvolutionConfig, evolve
from gramnas.evaluator import (
    DenseEvaluator,
    EvaluationBudget,
    ensemble_predict,
    fit_dense,
    test_accuracy,
    with_seed,
)
from gramnas.grammar import fixture_path, load_grammar
from gramnas.phenotype import render
from gramnas.structure import load_structure

g = load_grammar(fixture_path("dense.grammar"))
s = load_structure(fixture_path("dense.structure"))
data = make_toy_dataset("rings", 1000, 0.15, seed=0)
print(data.sizes)

# %%
budget = EvaluationBudget(epochs=10, batch_size=25, learning_rate=0.02, momentum=0.9)
cfg = EvolutionConfig(population_size=10, generations=10, budget=budget, master_seed=0)
result = evolve(g, s, cfg, DenseEvaluator(data))
for row in result.stats:
    print(row.generation, round(row.best_fitness, 3), round(row.mean_fitness, 3))
print(render(result.best_descriptor))

# %%
models = [fit_dense(result.best_descriptor, data, with_seed(budget, k))[0] for k in range(3)]
print([round(test_accuracy(m, data), 3) for m in models])
ensemble = np.mean(ensemble_predict(models, data.x_test) == data.y_test)
print("ensemble", ensemble)
