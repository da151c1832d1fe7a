"""GA-level network structure: which start symbols form the modules, and their size bounds."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, NamedTuple, Union

from .errors import MinExceedsMax, NonPositiveBound, StructureError, UnknownNonTerminal
from .grammar import Grammar

__all__ = ["StructureEntry", "GaStructure", "parse_structure", "load_structure", "validate_structure"]


class StructureEntry(NamedTuple):
    symbol: str
    min_layers: int
    max_layers: int


class GaStructure(tuple):
    """Ordered tuple of :class:`StructureEntry`; order defines module order."""

    def __new__(cls, entries: Iterable = ()):
        return super().__new__(cls, (StructureEntry(str(s), int(lo), int(hi)) for s, lo, hi in entries))

    @property
    def min_total(self) -> int:
        return sum(e.min_layers for e in self)

    def to_text(self) -> str:
        return "".join(f"{e.symbol} {e.min_layers} {e.max_layers}\n" for e in self)

    def __repr__(self) -> str:
        return f"GaStructure({list(map(tuple, self))})"


def parse_structure(text: str) -> GaStructure:
    """Parse ``name min max`` lines. Bounds are checked by :func:`validate_structure`."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise StructureError([f"line {lineno}: expected 'name min max', got {line!r}"])
        name, lo, hi = parts
        if name.startswith("<") and name.endswith(">"):
            name = name[1:-1]
        try:
            entries.append((name, int(lo), int(hi)))
        except ValueError:
            raise StructureError([f"line {lineno}: bounds must be integers in {line!r}"]) from None
    if not entries:
        raise StructureError(["structure defines no modules"])
    return GaStructure(entries)


def load_structure(path: Union[str, Path]) -> GaStructure:
    return parse_structure(Path(path).read_text(encoding="utf-8"))


def validate_structure(g: Grammar, s: Iterable) -> list[Exception]:
    """Return every violation found (empty list means the structure is usable with ``g``)."""
    problems: list[Exception] = []
    for name, lo, hi in s:
        if name not in g:
            problems.append(UnknownNonTerminal(name, "structure entry"))
        if lo < 1:
            problems.append(NonPositiveBound(name, lo))
        if lo > hi:
            problems.append(MinExceedsMax(name, lo, hi))
    return problems


def require_valid(g: Grammar, s: GaStructure) -> None:
    problems = validate_structure(g, s)
    if problems:
        raise StructureError(problems)
