import numpy as np
import pytest

from gramnas.genotype import Individual, LayerRecord, ModuleGenotype
from gramnas.grammar import fixture_path, load_grammar, parse_grammar
from gramnas.structure import load_structure


@pytest.fixture(scope="session")
def cnn_grammar():
    return load_grammar(fixture_path("cnn.grammar"))


@pytest.fixture(scope="session")
def cnn_structure():
    return load_structure(fixture_path("cnn.structure"))


@pytest.fixture(scope="session")
def four_module_structure():
    return load_structure(fixture_path("cnn_learning.structure"))


@pytest.fixture(scope="session")
def dense_grammar():
    return load_grammar(fixture_path("dense.grammar"))


@pytest.fixture(scope="session")
def dense_structure():
    return load_structure(fixture_path("dense.structure"))


@pytest.fixture(scope="session")
def bit_grammar():
    return parse_grammar("<bit> ::= b:0 | b:1\n")


def bitstring_individual(bits, ind_id=None):
    """One module of ``len(bits)`` slots over the bit grammar, one record per slot."""
    module = ModuleGenotype(0, "bit", 1, 10)
    for b in bits:
        module.slots.append(module.add_record(LayerRecord("bit", {"bit": [int(b)]})))
    return Individual([module], id=ind_id)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
