"""Context-free layer grammars with attribute terminals and numeric parameter blocks.

Grammar text looks like::

    <pooling> ::= <pool-type> [kernel-size,int,1,1,5]
                  [stride,int,1,1,3] <padding>
    <padding> ::= padding:same | padding:valid

``<name>`` is a non-terminal, ``key:value`` a fixed attribute and
``[name,kind,count,min,max]`` a block of ``count`` numbers drawn from
``[min, max]``. A rule may continue on lines that start with ``|`` or
with indentation. ``#`` comments run to the end of the line.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Union

from .errors import (
    DuplicateLhs,
    EmptyAlternative,
    MalformedParamBlock,
    MalformedRule,
    UnknownNonTerminal,
)

__all__ = [
    "NonTerminal",
    "TerminalAttr",
    "ParamBlock",
    "Symbol",
    "Production",
    "Grammar",
    "parse_grammar",
    "load_grammar",
    "fixture_path",
    "alternatives_count",
    "min_derivation_depth",
]


@dataclass(frozen=True)
class NonTerminal:
    name: str

    def __str__(self) -> str:
        return f"<{self.name}>"


@dataclass(frozen=True)
class TerminalAttr:
    key: str
    value: str

    def __str__(self) -> str:
        return f"{self.key}:{self.value}"


@dataclass(frozen=True)
class ParamBlock:
    name: str
    kind: str  # "int" | "float"
    count: int
    min: Union[int, float]
    max: Union[int, float]

    def __post_init__(self):
        if self.kind not in ("int", "float"):
            raise MalformedParamBlock(f"[{self.name}]: unknown kind {self.kind!r}")
        if self.count < 1:
            raise MalformedParamBlock(f"[{self.name}]: count must be >= 1")
        if self.min > self.max:
            raise MalformedParamBlock(f"[{self.name}]: min {self.min} > max {self.max}")

    def contains(self, value) -> bool:
        if self.kind == "int" and not float(value).is_integer():
            return False
        return self.min <= value <= self.max

    def __str__(self) -> str:
        return f"[{self.name},{self.kind},{self.count},{_fmt(self.min)},{_fmt(self.max)}]"


Symbol = Union[NonTerminal, TerminalAttr, ParamBlock]


@dataclass(frozen=True)
class Production:
    lhs: str
    alternatives: tuple[tuple[Symbol, ...], ...]

    def __str__(self) -> str:
        alts = " | ".join(" ".join(str(s) for s in alt) for alt in self.alternatives)
        return f"<{self.lhs}> ::= {alts}"


@dataclass(frozen=True)
class Grammar:
    """Immutable grammar; ``productions`` keeps source order of definition."""

    productions: Mapping[str, Production]

    @property
    def nonterminals(self) -> frozenset[str]:
        return frozenset(self.productions)

    @property
    def terminals(self) -> frozenset[Symbol]:
        return frozenset(
            sym
            for prod in self.productions.values()
            for alt in prod.alternatives
            for sym in alt
            if not isinstance(sym, NonTerminal)
        )

    def __contains__(self, name: str) -> bool:
        return name in self.productions

    def __getitem__(self, name: str) -> Production:
        try:
            return self.productions[name]
        except KeyError:
            raise UnknownNonTerminal(name) from None

    def alternatives_count(self, name: str) -> int:
        return len(self[name].alternatives)

    def __str__(self) -> str:
        return "\n".join(str(p) for p in self.productions.values()) + "\n"

    def __hash__(self):
        return hash(tuple(self.productions.values()))


def alternatives_count(g: Grammar, nt: str) -> int:
    return g.alternatives_count(nt)


def _fmt(x) -> str:
    return str(x) if isinstance(x, int) else repr(float(x))


_TOKEN = re.compile(r"<[^<>\s]*>|\[[^\]]*\]|\||[^\s|]+")
_NAME = re.compile(r"^[^\s<>\[\]|:,]+$")


def _parse_number(text: str, kind: str, block: str):
    try:
        if kind == "int":
            value = float(text)
            if not value.is_integer():
                raise ValueError
            return int(value)
        value = float(text)
    except ValueError:
        raise MalformedParamBlock(f"{block}: {text!r} is not a valid {kind}") from None
    if not math.isfinite(value):
        raise MalformedParamBlock(f"{block}: bound {text!r} is not finite")
    return value


def _parse_symbol(tok: str, lineno: int) -> Symbol:
    if tok.startswith("<"):
        name = tok[1:-1]
        if not tok.endswith(">") or not _NAME.match(name):
            raise MalformedRule(f"line {lineno}: bad non-terminal {tok!r}")
        return NonTerminal(name)
    if tok.startswith("["):
        if not tok.endswith("]"):
            raise MalformedParamBlock(f"line {lineno}: unterminated block {tok!r}")
        fields = [f.strip() for f in tok[1:-1].split(",")]
        if len(fields) != 5:
            raise MalformedParamBlock(
                f"line {lineno}: {tok!r} needs 5 fields (name,kind,count,min,max), got {len(fields)}"
            )
        name, kind, count, lo, hi = fields
        if not name or not _NAME.match(name):
            raise MalformedParamBlock(f"line {lineno}: bad block name in {tok!r}")
        if kind not in ("int", "float"):
            raise MalformedParamBlock(f"line {lineno}: unknown kind {kind!r} in {tok!r}")
        try:
            n = int(count)
        except ValueError:
            raise MalformedParamBlock(f"line {lineno}: bad count in {tok!r}") from None
        if n < 1:
            raise MalformedParamBlock(f"line {lineno}: count must be >= 1 in {tok!r}")
        lo_v = _parse_number(lo, kind, tok)
        hi_v = _parse_number(hi, kind, tok)
        if lo_v > hi_v:
            raise MalformedParamBlock(f"line {lineno}: min > max in {tok!r}")
        return ParamBlock(name, kind, n, lo_v, hi_v)
    key, sep, value = tok.partition(":")
    if not sep or not key or not value:
        raise MalformedRule(f"line {lineno}: terminal {tok!r} is not of the form key:value")
    return TerminalAttr(key, value)


def _split_rules(text: str) -> list[tuple[int, str, str]]:
    rules: list[list] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        if "::=" in line:
            lhs, _, rhs = line.partition("::=")
            lhs = lhs.strip()
            if not (lhs.startswith("<") and lhs.endswith(">")) or not _NAME.match(lhs[1:-1]):
                raise MalformedRule(f"line {lineno}: left-hand side {lhs!r} is not <name>")
            rules.append([lineno, lhs[1:-1], rhs])
        elif line[0].isspace() or line.lstrip().startswith("|"):
            if not rules:
                raise MalformedRule(f"line {lineno}: continuation before any rule")
            rules[-1][2] += " " + line
        else:
            raise MalformedRule(f"line {lineno}: missing '::=' in {line.strip()!r}")
    return [tuple(r) for r in rules]


def parse_grammar(text: str) -> Grammar:
    """Parse grammar source text into a validated :class:`Grammar`."""
    productions: dict[str, Production] = {}
    lines: dict[str, int] = {}
    for lineno, lhs, body in _split_rules(text):
        if lhs in productions:
            raise DuplicateLhs(f"line {lineno}: <{lhs}> already defined on line {lines[lhs]}")
        alternatives: list[tuple[Symbol, ...]] = []
        current: list[Symbol] = []
        tokens = _TOKEN.findall(body)
        for tok in tokens + ["|"]:
            if tok == "|":
                if not current:
                    raise EmptyAlternative(f"line {lineno}: empty alternative in <{lhs}>")
                alternatives.append(tuple(current))
                current = []
            else:
                current.append(_parse_symbol(tok, lineno))
        productions[lhs] = Production(lhs, tuple(alternatives))
        lines[lhs] = lineno

    for prod in productions.values():
        for alt in prod.alternatives:
            for sym in alt:
                if isinstance(sym, NonTerminal) and sym.name not in productions:
                    raise UnknownNonTerminal(sym.name, f"referenced from <{prod.lhs}>")
    if not productions:
        raise MalformedRule("grammar defines no rules")
    return Grammar(productions)


def load_grammar(path: Union[str, Path]) -> Grammar:
    return parse_grammar(Path(path).read_text(encoding="utf-8"))


def fixture_path(name: str) -> Path:
    """Path of a grammar/structure file shipped in ``gramnas/data``."""
    return Path(str(resources.files("gramnas") / "data" / name))


def min_derivation_depth(g: Grammar) -> dict[str, float]:
    """Smallest nesting depth at which each non-terminal reaches an all-terminal string.

    Non-productive non-terminals map to ``inf``.
    """
    depth = {nt: math.inf for nt in g.productions}
    changed = True
    while changed:
        changed = False
        for nt, prod in g.productions.items():
            for alt in prod.alternatives:
                d = 1 + max(
                    (depth[s.name] for s in alt if isinstance(s, NonTerminal)), default=0
                )
                if d < depth[nt]:
                    depth[nt] = d
                    changed = True
    return depth


def reachable(g: Grammar, starts: Iterable[str]) -> set[str]:
    seen: set[str] = set()
    stack = list(starts)
    while stack:
        nt = stack.pop()
        if nt in seen:
            continue
        seen.add(nt)
        for alt in g[nt].alternatives:
            stack.extend(s.name for s in alt if isinstance(s, NonTerminal))
    return seen
