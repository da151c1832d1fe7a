"""Two-level genotype: GA-level modules of layer slots over DSGE-style layer records.

A :class:`LayerRecord` stores, for each non-terminal, the ordered list of
expansion indices used when it was expanded, plus the materialised numeric
values of every parameter block, both in depth-first left-to-right order.
Slots in a module refer to records by integer id, so two slots can share one
record (replication by reference).
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Optional, Union

import numpy as np

from .errors import DepthExceeded, InvalidGenotype
from .grammar import Grammar, NonTerminal, ParamBlock
from .phenotype import LayerDescriptor, NetworkDescriptor, ROUTED_SECTIONS
from .structure import GaStructure, require_valid

__all__ = [
    "LayerRecord",
    "ModuleGenotype",
    "Individual",
    "random_layer",
    "random_individual",
    "decode_layer",
    "decode_individual",
    "deep_copy",
    "audit",
    "format_values",
]

Number = Union[int, float]
DEFAULT_DEPTH_LIMIT = 50


@dataclass
class LayerRecord:
    start: str
    choices: dict[str, list[int]] = field(default_factory=dict)
    params: list[tuple[str, list[Number]]] = field(default_factory=list)

    def copy(self) -> "LayerRecord":
        return LayerRecord(
            self.start, {k: list(v) for k, v in self.choices.items()}, [(n, list(v)) for n, v in self.params]
        )

    def to_dict(self) -> dict:
        return {
            "start": self.start,
            "choices": {k: list(v) for k, v in self.choices.items()},
            "params": [[name, list(values)] for name, values in self.params],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayerRecord":
        return cls(
            d["start"],
            {k: [int(i) for i in v] for k, v in d["choices"].items()},
            [(name, list(values)) for name, values in d["params"]],
        )


@dataclass
class ModuleGenotype:
    structure_index: int
    symbol: str
    min_layers: int
    max_layers: int
    slots: list[int] = field(default_factory=list)
    records: dict[int, LayerRecord] = field(default_factory=dict)
    next_record_id: int = 0

    def __len__(self) -> int:
        return len(self.slots)

    def refcount(self, rid: int) -> int:
        return self.slots.count(rid)

    def add_record(self, record: LayerRecord) -> int:
        rid = self.next_record_id
        self.next_record_id += 1
        self.records[rid] = record
        return rid

    def slot_record(self, position: int) -> LayerRecord:
        return self.records[self.slots[position]]

    def remove_slot(self, position: int) -> int:
        rid = self.slots.pop(position)
        if rid not in self.slots:
            del self.records[rid]
        return rid

    def copy(self) -> "ModuleGenotype":
        return ModuleGenotype(
            self.structure_index,
            self.symbol,
            self.min_layers,
            self.max_layers,
            list(self.slots),
            {rid: r.copy() for rid, r in self.records.items()},
            self.next_record_id,
        )

    def to_dict(self) -> dict:
        return {
            "structure_index": self.structure_index,
            "symbol": self.symbol,
            "min_layers": self.min_layers,
            "max_layers": self.max_layers,
            "slots": list(self.slots),
            "records": {str(k): r.to_dict() for k, r in sorted(self.records.items())},
            "next_record_id": self.next_record_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModuleGenotype":
        return cls(
            d["structure_index"],
            d["symbol"],
            d["min_layers"],
            d["max_layers"],
            [int(s) for s in d["slots"]],
            {int(k): LayerRecord.from_dict(r) for k, r in d["records"].items()},
            d.get("next_record_id", 1 + max((int(k) for k in d["records"]), default=-1)),
        )


@dataclass
class Individual:
    modules: list[ModuleGenotype]
    fitness: Optional[float] = None
    id: Optional[int] = None
    lineage: Optional[dict[str, Any]] = None
    diagnostics: Optional[dict[str, Any]] = None

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "modules": [m.to_dict() for m in self.modules],
            "fitness": self.fitness,
            "lineage": self.lineage,
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Individual":
        return cls(
            [ModuleGenotype.from_dict(m) for m in d["modules"]],
            d.get("fitness"),
            d.get("id"),
            d.get("lineage"),
            d.get("diagnostics"),
        )


def deep_copy(ind: Individual) -> Individual:
    # genotype parts are plain containers; a structural copy is much faster than copy.deepcopy
    return Individual(
        [m.copy() for m in ind.modules],
        ind.fitness,
        ind.id,
        copy.deepcopy(ind.lineage),
        copy.deepcopy(ind.diagnostics),
    )


# --- derivation trees -------------------------------------------------------
# Operators that need to know *where* a choice or value sits in the derivation
# (grammatical and numeric mutation) work on an explicit tree and flatten back.


@dataclass
class Node:
    symbol: str
    choice: int
    children: list  # Node | TerminalAttr | ParamLeaf


@dataclass
class ParamLeaf:
    block: ParamBlock
    values: list[Number]


def _draw_values(block: ParamBlock, rng: np.random.Generator) -> list[Number]:
    if block.kind == "int":
        return [int(v) for v in rng.integers(block.min, block.max, size=block.count, endpoint=True)]
    return [float(v) for v in rng.uniform(block.min, block.max, size=block.count)]


def sample_tree(
    g: Grammar,
    symbol: str,
    rng: np.random.Generator,
    depth_limit: int = DEFAULT_DEPTH_LIMIT,
    _depth: int = 1,
    choice: Optional[int] = None,
) -> Node:
    """Random derivation of ``symbol``; ``choice`` pins the top-level alternative."""
    if _depth > depth_limit:
        raise DepthExceeded(f"derivation of <{symbol}> nested deeper than {depth_limit}")
    prod = g[symbol]
    if choice is None:
        choice = int(rng.integers(len(prod.alternatives)))
    children: list = []
    for sym in prod.alternatives[choice]:
        if isinstance(sym, NonTerminal):
            children.append(sample_tree(g, sym.name, rng, depth_limit, _depth + 1))
        elif isinstance(sym, ParamBlock):
            children.append(ParamLeaf(sym, _draw_values(sym, rng)))
        else:
            children.append(sym)
    return Node(symbol, choice, children)


def tree_to_record(root: Node) -> LayerRecord:
    record = LayerRecord(root.symbol)

    def walk(node: Node) -> None:
        record.choices.setdefault(node.symbol, []).append(node.choice)
        for child in node.children:
            if isinstance(child, Node):
                walk(child)
            elif isinstance(child, ParamLeaf):
                record.params.append((child.block.name, list(child.values)))

    walk(root)
    return record


def record_to_tree(g: Grammar, record: LayerRecord) -> Node:
    """Replay ``record`` against ``g``; raises :class:`InvalidGenotype` on any mismatch."""
    cursors = {nt: 0 for nt in record.choices}
    param_pos = 0

    def expand(symbol: str, depth: int) -> Node:
        nonlocal param_pos
        if depth > 10_000:
            raise InvalidGenotype("replay does not terminate")
        if symbol not in g:
            raise InvalidGenotype(f"record references unknown non-terminal <{symbol}>")
        seq = record.choices.get(symbol, [])
        pos = cursors.get(symbol, 0)
        if pos >= len(seq):
            raise InvalidGenotype(f"ran out of choices for <{symbol}>")
        choice = seq[pos]
        cursors[symbol] = pos + 1
        n_alts = g.alternatives_count(symbol)
        if not (isinstance(choice, (int, np.integer)) and 0 <= choice < n_alts):
            raise InvalidGenotype(f"choice {choice!r} for <{symbol}> outside [0, {n_alts})")
        children: list = []
        for sym in g[symbol].alternatives[choice]:
            if isinstance(sym, NonTerminal):
                children.append(expand(sym.name, depth + 1))
            elif isinstance(sym, ParamBlock):
                if param_pos >= len(record.params):
                    raise InvalidGenotype(f"ran out of parameter values at [{sym.name}]")
                name, values = record.params[param_pos]
                param_pos += 1
                if name != sym.name or len(values) != sym.count:
                    raise InvalidGenotype(f"parameter entry {name!r} does not match block {sym}")
                for v in values:
                    if isinstance(v, bool) or not sym.contains(v):
                        raise InvalidGenotype(f"value {v!r} outside {sym}")
                children.append(ParamLeaf(sym, list(values)))
            else:
                children.append(sym)
        return Node(symbol, int(choice), children)

    root = expand(record.start, 1)
    extra = [nt for nt, seq in record.choices.items() if cursors.get(nt, 0) != len(seq)]
    if extra:
        raise InvalidGenotype(f"unused choices for {sorted(extra)}")
    if param_pos != len(record.params):
        raise InvalidGenotype(f"{len(record.params) - param_pos} unused parameter entries")
    return root


def format_values(block_kind: str, values: list[Number]) -> str:
    if block_kind == "int":
        return ",".join(str(int(v)) for v in values)
    return ",".join(repr(float(v)) for v in values)


def tree_pairs(root: Node) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []

    def walk(node: Node) -> None:
        for child in node.children:
            if isinstance(child, Node):
                walk(child)
            elif isinstance(child, ParamLeaf):
                pairs.append((child.block.name, format_values(child.block.kind, child.values)))
            else:
                pairs.append((child.key, child.value))

    walk(root)
    return pairs


# --- public operations ------------------------------------------------------


def random_layer(
    g: Grammar, start: str, rng: np.random.Generator, depth_limit: int = DEFAULT_DEPTH_LIMIT
) -> LayerRecord:
    """Sample a fresh derivation of ``start``: uniform choices, uniform parameter values."""
    return tree_to_record(sample_tree(g, start, rng, depth_limit))


def random_individual(
    g: Grammar,
    s: GaStructure,
    rng: np.random.Generator,
    depth_limit: int = DEFAULT_DEPTH_LIMIT,
    ind_id: Optional[int] = None,
) -> Individual:
    require_valid(g, s)
    modules = []
    for index, (symbol, lo, hi) in enumerate(s):
        module = ModuleGenotype(index, symbol, lo, hi)
        for _ in range(int(rng.integers(lo, hi, endpoint=True))):
            module.slots.append(module.add_record(random_layer(g, symbol, rng, depth_limit)))
        modules.append(module)
    return Individual(modules, id=ind_id)


def decode_layer(g: Grammar, r: LayerRecord) -> list[tuple[str, str]]:
    return tree_pairs(record_to_tree(g, r))


def decode_individual(g: Grammar, ind: Individual) -> NetworkDescriptor:
    layers: list[LayerDescriptor] = []
    sections: dict[str, list[tuple[str, str]]] = {name: [] for name in ROUTED_SECTIONS}
    for module in ind.modules:
        cache: dict[int, list[tuple[str, str]]] = {}
        for rid in module.slots:
            if rid not in module.records:
                raise InvalidGenotype(f"slot refers to missing record {rid}")
            if rid not in cache:
                cache[rid] = decode_layer(g, module.records[rid])
            pairs = cache[rid]
            if pairs and pairs[0][0] in sections:
                sections[pairs[0][0]].extend(pairs)
            else:
                layers.append(LayerDescriptor(tuple(pairs)))
    return NetworkDescriptor(
        tuple(layers),
        learning=tuple(sections["learning"]),
        augmentation=tuple(sections["augmentation"]),
    )


def audit(g: Grammar, ind: Individual, s: Optional[GaStructure] = None) -> None:
    """Check every genotype invariant, raising :class:`InvalidGenotype` on the first breach."""
    if s is not None and len(ind.modules) != len(s):
        raise InvalidGenotype(f"{len(ind.modules)} modules for a {len(s)}-entry structure")
    for i, module in enumerate(ind.modules):
        if module.structure_index != i:
            raise InvalidGenotype(f"module {i} carries structure index {module.structure_index}")
        if s is not None and (module.symbol, module.min_layers, module.max_layers) != tuple(s[i]):
            raise InvalidGenotype(f"module {i} does not match structure entry {tuple(s[i])}")
        if not module.min_layers <= len(module.slots) <= module.max_layers:
            raise InvalidGenotype(
                f"module {module.symbol}: {len(module.slots)} slots outside "
                f"[{module.min_layers}, {module.max_layers}]"
            )
        referenced = set(module.slots)
        if referenced != set(module.records):
            raise InvalidGenotype(
                f"module {module.symbol}: dangling {sorted(referenced - set(module.records))}, "
                f"orphans {sorted(set(module.records) - referenced)}"
            )
        if module.records and module.next_record_id <= max(module.records):
            raise InvalidGenotype(f"module {module.symbol}: record id counter behind table")
        for rid, record in module.records.items():
            if record.start != module.symbol:
                raise InvalidGenotype(f"record {rid} starts at <{record.start}>, module is <{module.symbol}>")
            record_to_tree(g, record)
