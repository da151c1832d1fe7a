"""
Grammar, genotype and phenotype
===============================

Load the convolutional grammar, sample a few individuals and look at how a
layer record turns into a descriptor line.
"""

# %%
import numpy as np

from gramnas.genotype import decode_individual, random_individual
from gramnas.grammar import fixture_path, load_grammar
from gramnas.phenotype import check_shapes, export_json, render
from gramnas.structure import load_structure

g = load_grammar(fixture_path("cnn.grammar"))
s = load_structure(fixture_path("cnn.structure"))
print(g)
print({nt: g.alternatives_count(nt) for nt in g.nonterminals})

# %%
# A module is a list of slots; each slot points at a layer record holding
# the expansion choices per non-terminal and the sampled numbers.
rng = np.random.default_rng(0)
ind = random_individual(g, s, rng)
print([len(m) for m in ind.modules])
first = ind.modules[0].slot_record(0)
print(first.choices)
print(first.params)

# %%
nd = decode_individual(g, ind)
print(render(nd))

# %%
# Shapes on 32x32 RGB input. Deep stacks of valid-padded pools shrink to zero.
for line in check_shapes(nd, (32, 32, 3)).lines():
    print(line)

# %%
print(export_json(nd)[:300], "...")
