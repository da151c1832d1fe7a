"""
Variation operators
===================

Crossover at the module level, mutation at both levels, and the lineage
log every offspring carries.
"""

# %%
import numpy as np

from gramnas.genotype import decode_individual, random_individual
from gramnas.grammar import fixture_path, load_grammar
from gramnas.operators import (
    OperatorConfig,
    apply_variation,
    bitmask_crossover,
    mutate_numeric,
    mutate_replicate_layer,
    one_point_crossover,
)
from gramnas.phenotype import render
from gramnas.structure import load_structure

g = load_grammar(fixture_path("dense.grammar"))
s = load_structure(fixture_path("dense.structure"))
rng = np.random.default_rng(1)
a = random_individual(g, s, rng, ind_id=0)
b = random_individual(g, s, rng, ind_id=1)
print(render(decode_individual(g, a)))
print(render(decode_individual(g, b)))

# %%
c1, c2 = one_point_crossover(a, b, rng, module=0, cut=1)
print(c1.lineage)
print(render(decode_individual(g, c1)))

# %%
# With mask 0 for the first module and 1 for the second, the first child takes
# b's hidden layers and a's softmax layer.
c1, _ = bitmask_crossover(a, b, rng, mask=[0, 1])
print(render(decode_individual(g, c1)))

# %%
# A replicated layer is a second slot pointing at the same record, so a later
# numeric mutation of that record shows up in both places.
rep = mutate_replicate_layer(a, 0, g, rng)
print(rep.modules[0].slots)
for _ in range(5):
    rep = mutate_numeric(rep, g, rng)
    print(rep.lineage["ops"][-1])
print(render(decode_individual(g, rep)))

# %%
cfg = OperatorConfig()
children = [c for _ in range(500) for c in apply_variation((a, b), g, cfg, rng)]
print("crossover", np.mean([c.lineage["crossover"] for c in children]))
print("mutated", np.mean([c.lineage["mutated"] for c in children]))
