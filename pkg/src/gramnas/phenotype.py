"""Decoded networks: layer descriptors, text rendering, shape propagation and JSON export."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .errors import LastLayerNotDense, MissingAttr

__all__ = [
    "LayerDescriptor",
    "NetworkDescriptor",
    "ShapeReport",
    "render",
    "parse_rendered",
    "check_shapes",
    "apply_output_override",
    "export_json",
    "descriptor_from_json",
    "hidden_layer_count",
]

# first-pair keys whose layers are routed out of the layer list
ROUTED_SECTIONS = ("learning", "augmentation")
SPATIAL_KINDS = ("conv", "pool-avg", "pool-max")

Pairs = tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class LayerDescriptor:
    attrs: Pairs

    def __post_init__(self):
        keys = [k for k, _ in self.attrs]
        if len(keys) != len(set(keys)):
            raise ValueError(f"duplicate attribute keys in layer {keys}")

    @property
    def kind(self) -> Optional[str]:
        if self.attrs and self.attrs[0][0] == "layer":
            return self.attrs[0][1]
        return None

    def get(self, key: str, default=None):
        for k, v in self.attrs:
            if k == key:
                return v
        return default

    def require(self, key: str, index: int) -> str:
        value = self.get(key)
        if value is None:
            raise MissingAttr(f"layer {index} ({self.kind}) has no {key!r} attribute")
        return value

    def with_attr(self, key: str, value: str) -> "LayerDescriptor":
        return LayerDescriptor(tuple((k, value if k == key else v) for k, v in self.attrs))


@dataclass(frozen=True)
class NetworkDescriptor:
    layers: tuple[LayerDescriptor, ...]
    learning: Pairs = ()
    augmentation: Pairs = ()
    output_units_override: Optional[int] = field(default=None, compare=False)


def _line(pairs: Pairs) -> str:
    return " ".join(f"{k}:{v}" for k, v in pairs)


def render(nd: NetworkDescriptor) -> str:
    """One line per layer, then the learning and augmentation lines when present."""
    lines = [_line(layer.attrs) for layer in nd.layers]
    lines += [_line(section) for section in (nd.learning, nd.augmentation) if section]
    return "\n".join(lines) + "\n"


def parse_rendered(text: str) -> NetworkDescriptor:
    layers, sections = [], {name: () for name in ROUTED_SECTIONS}
    for line in text.splitlines():
        if not line.strip():
            continue
        pairs = tuple(tuple(tok.split(":", 1)) for tok in line.split())
        if pairs[0][0] in sections:
            sections[pairs[0][0]] += pairs
        else:
            layers.append(LayerDescriptor(pairs))
    return NetworkDescriptor(tuple(layers), sections["learning"], sections["augmentation"])


def hidden_layer_count(nd: NetworkDescriptor) -> int:
    return sum(1 for layer in nd.layers if layer.get("act") != "softmax")


# --- shapes -----------------------------------------------------------------

Shape = Union[tuple[int, int, int], tuple[int]]


@dataclass(frozen=True)
class ShapeReport:
    valid: bool
    per_layer_shapes: tuple[Shape, ...]
    failure: Optional[tuple[int, str]] = None

    def lines(self) -> list[str]:
        out = [f"{i}: {'x'.join(map(str, shape))}" for i, shape in enumerate(self.per_layer_shapes)]
        if self.failure:
            out.append(f"invalid at layer {self.failure[0]}: {self.failure[1]}")
        else:
            out.append("valid")
        return out


def spatial_out(n: int, kernel: int, stride: int, padding: str) -> int:
    if padding == "same":
        return -(-n // stride)
    if padding == "valid":
        return (n - kernel) // stride + 1
    raise ValueError(f"unknown padding {padding!r}")


def _int_attr(layer: LayerDescriptor, key: str, index: int) -> int:
    raw = layer.require(key, index)
    try:
        return int(raw)
    except ValueError:
        raise MissingAttr(f"layer {index}: {key}={raw!r} is not an integer") from None


def check_shapes(nd: NetworkDescriptor, input_shape: tuple[int, int, int] = (32, 32, 3)) -> ShapeReport:
    """Propagate ``(height, width, channels)`` through the network.

    Conv/pool use the usual same/valid conventions; an fc layer flattens.
    Stops at the first non-positive dimension or spatial layer after an fc.
    """
    shape: Shape = tuple(int(d) for d in input_shape)
    shapes: list[Shape] = []
    if any(d < 1 for d in shape):
        return ShapeReport(False, (), (-1, f"non-positive input shape {shape}"))
    for i, layer in enumerate(nd.layers):
        kind = layer.kind
        if kind in SPATIAL_KINDS:
            if len(shape) != 3:
                return ShapeReport(False, tuple(shapes), (i, f"{kind} after fully-connected layer"))
            if kind == "conv":
                k = _int_attr(layer, "filter-shape", i)
                channels = _int_attr(layer, "num-filters", i)
            else:
                k = _int_attr(layer, "kernel-size", i)
                channels = shape[2]
            s = _int_attr(layer, "stride", i)
            pad = layer.require("padding", i)
            h, w = (spatial_out(d, k, s, pad) for d in shape[:2])
            shape = (h, w, channels)
        elif kind == "fc":
            shape = (_int_attr(layer, "num-units", i),)
        shapes.append(shape)
        if any(d < 1 for d in shape):
            return ShapeReport(False, tuple(shapes), (i, f"non-positive dimension {shape}"))
    return ShapeReport(True, tuple(shapes))


def apply_output_override(nd: NetworkDescriptor, units: int) -> NetworkDescriptor:
    """Resize the final dense layer, e.g. when reusing a network on a task with more classes."""
    if units < 1:
        raise ValueError("units must be positive")
    if not nd.layers or nd.layers[-1].kind != "fc":
        raise LastLayerNotDense("the last layer is not fully-connected")
    last = nd.layers[-1]
    last.require("num-units", len(nd.layers) - 1)
    layers = nd.layers[:-1] + (last.with_attr("num-units", str(units)),)
    return replace(nd, layers=layers, output_units_override=units)


# --- JSON -------------------------------------------------------------------

_INT = re.compile(r"^[+-]?\d+$")


def _typed(value: str):
    parts = value.split(",")
    if len(parts) > 1:
        return [_typed(p) for p in parts]
    if value in ("True", "False"):
        return value == "True"
    if _INT.match(value):
        return int(value)
    try:
        f = float(value)
    except ValueError:
        return value
    return f if math.isfinite(f) else value


def _untyped(value) -> str:
    if isinstance(value, list):
        return ",".join(_untyped(v) for v in value)
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _layer_json(layer: LayerDescriptor) -> dict:
    attrs = layer.attrs
    out: dict = {}
    if layer.kind is not None:
        out["kind"] = layer.kind
        attrs = attrs[1:]
    out.update((k, _typed(v)) for k, v in attrs)
    return out


def export_json(nd: NetworkDescriptor) -> str:
    doc = {
        "layers": [_layer_json(layer) for layer in nd.layers],
        "learning": {k: _typed(v) for k, v in nd.learning},
        "augmentation": {k: _typed(v) for k, v in nd.augmentation},
    }
    return json.dumps(doc, separators=(",", ":"))


def descriptor_from_json(text: str) -> NetworkDescriptor:
    doc = json.loads(text)
    layers = []
    for entry in doc["layers"]:
        pairs = []
        for k, v in entry.items():
            pairs.append(("layer", v) if k == "kind" else (k, _untyped(v)))
        layers.append(LayerDescriptor(tuple(pairs)))
    return NetworkDescriptor(
        tuple(layers),
        tuple((k, _untyped(v)) for k, v in doc.get("learning", {}).items()),
        tuple((k, _untyped(v)) for k, v in doc.get("augmentation", {}).items()),
    )
