"""Crossover and mutation over two-level individuals.

All operators leave their inputs untouched and return new individuals whose
``lineage`` records what was done (operator, module, cut point or mask,
mutation site), so checkpoints can be audited afterwards.
"""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import AtMaxLayers, AtMinLayers, Inapplicable, NoEligibleSite, StructureMismatch
from .genotype import (
    DEFAULT_DEPTH_LIMIT,
    Individual,
    LayerRecord,
    ModuleGenotype,
    Node,
    ParamLeaf,
    random_layer,
    record_to_tree,
    sample_tree,
    tree_to_record,
)
from .grammar import Grammar

__all__ = [
    "OperatorConfig",
    "one_point_crossover",
    "bitmask_crossover",
    "mutate_add_layer",
    "mutate_replicate_layer",
    "mutate_remove_layer",
    "mutate_grammatical",
    "mutate_numeric",
    "apply_variation",
    "MUTATIONS",
]


@dataclass(frozen=True)
class OperatorConfig:
    crossover_rate: float = 0.7
    mutation_rate: float = 0.3
    bitmask_vs_onepoint: float = 0.5
    gaussian_sigma_fraction: float = 0.15
    depth_limit: int = DEFAULT_DEPTH_LIMIT

    def __post_init__(self):
        for name in ("crossover_rate", "mutation_rate", "bitmask_vs_onepoint"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not self.gaussian_sigma_fraction > 0:
            raise ValueError("gaussian_sigma_fraction must be positive")
        if self.depth_limit < 1:
            raise ValueError("depth_limit must be positive")

    to_dict = asdict


def _fresh(ind: Individual, op: dict, parents: Optional[Sequence[Individual]] = None) -> Individual:
    """Unevaluated copy of ``ind`` with ``op`` logged.

    Offspring that have not been registered yet (``id is None``) keep extending
    their lineage, so crossover followed by mutation is logged as one history.
    """
    child = Individual([m.copy() for m in ind.modules])
    if parents is not None or ind.id is not None or ind.lineage is None:
        child.lineage = {"parents": [p.id for p in (parents or (ind,))], "ops": []}
    else:
        child.lineage = copy.deepcopy(ind.lineage)
    child.lineage["ops"].append(op)
    return child


def _check_compatible(p1: Individual, p2: Individual) -> None:
    sig1 = [(m.structure_index, m.symbol, m.min_layers, m.max_layers) for m in p1.modules]
    sig2 = [(m.structure_index, m.symbol, m.min_layers, m.max_layers) for m in p2.modules]
    if sig1 != sig2:
        raise StructureMismatch("parents were built from different GA structures")


def _transplant(dest: ModuleGenotype, src: ModuleGenotype, rids: Sequence[int]) -> list[int]:
    """Deep-copy ``src`` records into ``dest`` under new ids; sharing among ``rids`` is kept."""
    mapping: dict[int, int] = {}
    out = []
    for rid in rids:
        if rid not in mapping:
            mapping[rid] = dest.add_record(src.records[rid].copy())
        out.append(mapping[rid])
    return out


def _splice(head: ModuleGenotype, tail: ModuleGenotype, cut: int) -> ModuleGenotype:
    out = head.copy()
    out.slots = out.slots[:cut]
    for rid in set(out.records) - set(out.slots):
        del out.records[rid]
    out.slots += _transplant(out, tail, tail.slots[cut:])
    return out


def one_point_crossover(
    p1: Individual,
    p2: Individual,
    rng: np.random.Generator,
    *,
    module: Optional[int] = None,
    cut: Optional[int] = None,
) -> tuple[Individual, Individual]:
    """Exchange the tails of one module; the cut lies in ``[1, L-1]`` for the shorter module length L.

    ``module``/``cut`` pin the otherwise random choices.
    """
    _check_compatible(p1, p2)
    m = int(rng.integers(len(p1.modules))) if module is None else module
    a, b = p1.modules[m], p2.modules[m]
    shortest = min(len(a), len(b))
    if shortest < 2:
        op = {"op": "one_point", "module": m, "cut": None}
        return _fresh(p1, op, (p1, p2)), _fresh(p2, op, (p1, p2))
    if cut is None:
        cut = int(rng.integers(1, shortest))
    elif not 1 <= cut < shortest:
        raise ValueError(f"cut {cut} outside [1, {shortest - 1}]")
    op = {"op": "one_point", "module": m, "cut": cut}
    o1, o2 = _fresh(p1, op, (p1, p2)), _fresh(p2, op, (p1, p2))
    o1.modules[m] = _splice(a, b, cut)
    o2.modules[m] = _splice(b, a, cut)
    return o1, o2


def bitmask_crossover(
    p1: Individual,
    p2: Individual,
    rng: np.random.Generator,
    *,
    mask: Optional[Sequence[int]] = None,
) -> tuple[Individual, Individual]:
    """Swap whole modules: offspring 1 takes module i from ``p1`` where the bit is 1, else from ``p2``."""
    _check_compatible(p1, p2)
    n = len(p1.modules)
    bits = [int(b) for b in (rng.integers(0, 2, size=n) if mask is None else mask)]
    if len(bits) != n or any(b not in (0, 1) for b in bits):
        raise ValueError(f"mask must be {n} bits, got {bits}")
    op = {"op": "bitmask", "mask": "".join(map(str, bits))}
    o1, o2 = _fresh(p1, op, (p1, p2)), _fresh(p2, op, (p1, p2))
    for i, bit in enumerate(bits):
        first, second = (p1, p2) if bit else (p2, p1)
        o1.modules[i] = first.modules[i].copy()
        o2.modules[i] = second.modules[i].copy()
    return o1, o2


# --- GA-level mutations -----------------------------------------------------


def mutate_add_layer(ind: Individual, module_index: int, g: Grammar, rng: np.random.Generator,
                     depth_limit: int = DEFAULT_DEPTH_LIMIT) -> Individual:
    module = ind.modules[module_index]
    if len(module) >= module.max_layers:
        raise AtMaxLayers(f"module {module.symbol} already has {module.max_layers} layers")
    position = int(rng.integers(len(module) + 1))
    child = _fresh(ind, {"op": "add_layer", "module": module_index, "position": position})
    target = child.modules[module_index]
    rid = target.add_record(random_layer(g, target.symbol, rng, depth_limit))
    target.slots.insert(position, rid)
    return child


def mutate_replicate_layer(ind: Individual, module_index: int, g: Grammar, rng: np.random.Generator) -> Individual:
    """Insert a second reference to an existing layer; later edits to it show up in both slots."""
    module = ind.modules[module_index]
    if len(module) >= module.max_layers:
        raise AtMaxLayers(f"module {module.symbol} already has {module.max_layers} layers")
    source = int(rng.integers(len(module)))
    position = int(rng.integers(len(module) + 1))
    child = _fresh(
        ind, {"op": "replicate_layer", "module": module_index, "source": source, "position": position}
    )
    target = child.modules[module_index]
    target.slots.insert(position, target.slots[source])
    return child


def mutate_remove_layer(ind: Individual, module_index: int, rng: np.random.Generator) -> Individual:
    module = ind.modules[module_index]
    if len(module) <= module.min_layers:
        raise AtMinLayers(f"module {module.symbol} is at its minimum of {module.min_layers} layers")
    position = int(rng.integers(len(module)))
    child = _fresh(ind, {"op": "remove_layer", "module": module_index, "position": position})
    child.modules[module_index].remove_slot(position)
    return child


# --- DSGE-level mutations ---------------------------------------------------


def _walk(node: Node, path=()):
    yield path, node
    for i, child in enumerate(node.children):
        if isinstance(child, Node):
            yield from _walk(child, path + (i,))
        else:
            yield path + (i,), child


def _at(root: Node, path):
    node = root
    for i in path:
        node = node.children[i]
    return node


def _numeric_sites(record: LayerRecord) -> int:
    return sum(len(values) for _, values in record.params)


def _grammatical_sites(record: LayerRecord, g: Grammar) -> int:
    return sum(len(seq) for nt, seq in record.choices.items() if g.alternatives_count(nt) >= 2)


def _pick_site(ind: Individual, rng: np.random.Generator, count) -> Optional[tuple[int, int, int]]:
    """Uniform site over distinct records: (module index, record id, index within the record)."""
    table = [
        (mi, rid, count(module.records[rid]))
        for mi, module in enumerate(ind.modules)
        for rid in sorted(module.records)
    ]
    total = sum(n for _, _, n in table)
    if total == 0:
        return None
    k = int(rng.integers(total))
    for mi, rid, n in table:
        if k < n:
            return mi, rid, k
        k -= n
    raise AssertionError("unreachable")


def mutate_grammatical(ind: Individual, g: Grammar, rng: np.random.Generator,
                       depth_limit: int = DEFAULT_DEPTH_LIMIT) -> Individual:
    """Switch one expansion choice to a different alternative and regrow the subtree below it."""
    site = _pick_site(ind, rng, lambda r: _grammatical_sites(r, g))
    if site is None:
        raise NoEligibleSite("no non-terminal with two or more alternatives")
    mi, rid, k = site
    tree = record_to_tree(g, ind.modules[mi].records[rid])
    eligible = [(path, node) for path, node in _walk(tree)
                if isinstance(node, Node) and g.alternatives_count(node.symbol) >= 2]
    path, node = eligible[k]
    j = int(rng.integers(g.alternatives_count(node.symbol) - 1))
    new_choice = j if j < node.choice else j + 1
    regrown = sample_tree(g, node.symbol, rng, depth_limit, _depth=len(path) + 1, choice=new_choice)
    child = _fresh(
        ind,
        {"op": "grammatical", "module": mi, "record": rid, "site": list(path),
         "symbol": node.symbol, "from": node.choice, "to": new_choice},
    )
    node.choice, node.children = regrown.choice, regrown.children
    child.modules[mi].records[rid] = tree_to_record(tree)
    return child


def mutate_numeric(ind: Individual, g: Grammar, rng: np.random.Generator,
                   cfg: Optional[OperatorConfig] = None) -> Individual:
    """Redraw one integer uniformly, or nudge one float by a clamped Gaussian step."""
    cfg = cfg or OperatorConfig()
    site = _pick_site(ind, rng, _numeric_sites)
    if site is None:
        raise NoEligibleSite("no parameter values to mutate")
    mi, rid, k = site
    tree = record_to_tree(g, ind.modules[mi].records[rid])
    values = [(path, j) for path, leaf in _walk(tree) if isinstance(leaf, ParamLeaf) for j in range(len(leaf.values))]
    path, j = values[k]
    leaf = _at(tree, path)
    block, old = leaf.block, leaf.values[j]
    if block.kind == "int":
        new = int(rng.integers(block.min, block.max, endpoint=True))
    else:
        step = rng.normal(0.0, cfg.gaussian_sigma_fraction * (block.max - block.min))
        new = float(min(max(old + step, block.min), block.max))
    child = _fresh(
        ind,
        {"op": "numeric", "module": mi, "record": rid, "site": list(path), "index": j,
         "param": block.name, "from": old, "to": new},
    )
    leaf.values[j] = new
    child.modules[mi].records[rid] = tree_to_record(tree)
    return child


def _has_site(ind: Individual, count) -> bool:
    return any(count(r) for m in ind.modules for r in m.records.values())


MUTATIONS = ("add_layer", "replicate_layer", "remove_layer", "grammatical", "numeric")


def _applicable(ind: Individual, g: Grammar) -> dict[str, list]:
    """Mutation name -> module indices it may act on ([None] for DSGE-level ones)."""
    grows = [i for i, m in enumerate(ind.modules) if len(m) < m.max_layers]
    shrinks = [i for i, m in enumerate(ind.modules) if len(m) > m.min_layers]
    out = {"add_layer": grows, "replicate_layer": grows, "remove_layer": shrinks}
    out["grammatical"] = [None] if _has_site(ind, lambda r: _grammatical_sites(r, g)) else []
    out["numeric"] = [None] if _has_site(ind, _numeric_sites) else []
    return out


def mutate(ind: Individual, g: Grammar, rng: np.random.Generator, cfg: OperatorConfig) -> Optional[Individual]:
    """Apply one mutation, uniform over the categories that can act on ``ind``.

    Returns ``None`` when no category applies.
    """
    options = {name: mods for name, mods in _applicable(ind, g).items() if mods}
    if not options:
        return None
    names = [n for n in MUTATIONS if n in options]
    name = names[int(rng.integers(len(names)))]
    mods = options[name]
    module = mods[int(rng.integers(len(mods)))]
    ops: dict[str, Callable[[], Individual]] = {
        "add_layer": lambda: mutate_add_layer(ind, module, g, rng, cfg.depth_limit),
        "replicate_layer": lambda: mutate_replicate_layer(ind, module, g, rng),
        "remove_layer": lambda: mutate_remove_layer(ind, module, rng),
        "grammatical": lambda: mutate_grammatical(ind, g, rng, cfg.depth_limit),
        "numeric": lambda: mutate_numeric(ind, g, rng, cfg),
    }
    try:
        return ops[name]()
    except Inapplicable:  # pre-checked above; kept as a guard
        return None


def apply_variation(
    parents: tuple[Individual, Individual],
    g: Grammar,
    cfg: OperatorConfig,
    rng: np.random.Generator,
) -> tuple[Individual, Individual]:
    """Crossover with probability ``crossover_rate``, then mutate each child with ``mutation_rate``."""
    p1, p2 = parents
    crossed = rng.random() < cfg.crossover_rate
    if crossed:
        if rng.random() < cfg.bitmask_vs_onepoint:
            o1, o2 = bitmask_crossover(p1, p2, rng)
        else:
            o1, o2 = one_point_crossover(p1, p2, rng)
    else:
        op = {"op": "copy"}
        o1, o2 = _fresh(p1, op, (p1, p2)), _fresh(p2, op, (p1, p2))
    out = []
    for child in (o1, o2):
        mutated = rng.random() < cfg.mutation_rate
        if mutated:
            result = mutate(child, g, rng, cfg)
            child = result if result is not None else child
        child.lineage["crossover"] = crossed
        child.lineage["mutated"] = mutated
        out.append(child)
    return out[0], out[1]
