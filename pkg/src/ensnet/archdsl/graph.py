"""Expansion of an :class:`ArchSpec` into a primitive layer graph.

Node kinds: ``input``, ``conv``, ``proj`` (1x1 shortcut projection inside a
residual unit), ``pool``, ``lrn``, ``batchnorm``, ``relu``, ``dense``,
``concat``, ``add`` and ``softmax``. Nodes are stored in topological order;
``inputs`` hold indices of earlier nodes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

from .ast import FC, LRN, ArchSpec, Conv, Inception, Pool, Residual
from .parser import ArchError

Shape = tuple[int, int, int]  # (w, h, c)

class ShapeError(ArchError):
    pass


@dataclass
class Node:
    index: int
    kind: str
    label: str
    inputs: tuple[int, ...]
    attrs: dict = field(default_factory=dict)


@dataclass
class LayerGraph:
    nodes: list[Node]
    classes: int
    batchnorm: bool
    input_shape: Shape
    shapes: Optional[list[Shape]] = None

    @property
    def sink(self) -> Node:
        return self.nodes[-1]

    def by_kind(self, kind: str) -> list[Node]:
        return [n for n in self.nodes if n.kind == kind]

    def node(self, label: str) -> Node:
        for n in self.nodes:
            if n.label == label:
                return n
        raise KeyError(label)

    def consumers(self, index: int) -> list[int]:
        return [n.index for n in self.nodes if index in n.inputs]

    @property
    def head(self) -> Node:
        """The final dense layer."""
        dense = self.by_kind("dense")
        if not dense:
            raise ArchError("graph has no dense layer")
        return dense[-1]

    def weighted_layers(self) -> int:
        """Main-path conv plus dense layers (shortcut projections excluded)."""
        return len(self.by_kind("conv")) + len(self.by_kind("dense"))

    def shape_of(self, label: str) -> Shape:
        if self.shapes is None:
            raise ArchError("shapes not inferred yet")
        return self.shapes[self.node(label).index]


class _Builder:
    def __init__(self, in_channels: int) -> None:
        self.nodes: list[Node] = []
        self.chans: list[int] = []
        self.counters: dict[str, int] = {}
        self.in_channels = in_channels

    def add(self, kind: str, inputs, label: str | None = None, **attrs) -> int:
        if label is None:
            n = self.counters.get(kind, 0) + 1
            self.counters[kind] = n
            label = f"{kind}{n}"
        idx = len(self.nodes)
        self.nodes.append(Node(idx, kind, label, tuple(inputs), attrs))
        if kind == "input":
            c = self.in_channels
        elif kind in ("conv", "proj"):
            c = attrs["q"]
        elif kind == "dense":
            c = attrs["units"]
        elif kind == "concat":
            c = sum(self.chans[i] for i in inputs)
        else:
            c = self.chans[inputs[0]]
        self.chans.append(c)
        return idx

    def conv(self, src, k, s, q, p, bn, label, relu=True) -> int:
        x = self.add("conv", [src], label, k=k, s=s, q=q, p=p)
        if bn:
            x = self.add("batchnorm", [x], label + "/bn")
        if relu:
            x = self.add("relu", [x], label + "/relu")
        return x


def expand(spec: ArchSpec, classes: int, batchnorm: bool | None = None) -> LayerGraph:
    """Unroll ``spec`` into primitive layers with ``e`` bound to ``classes``.

    ``batchnorm`` defaults to True for specs containing residual units.
    """
    if classes < 2:
        raise ArchError(f"class count must be >= 2, got {classes}")
    if batchnorm is None:
        batchnorm = spec.has_residual
    b = _Builder(spec.input.c)
    x = b.add("input", [], "input")
    fcs = [e for e in spec.elements if isinstance(e, FC)]
    n_conv = n_pool = n_fc = n_inc = n_res = 0
    for el in spec.elements:
        if isinstance(el, Conv):
            n_conv += 1
            x = b.conv(x, el.k, el.s, el.q, el.p, batchnorm, f"conv{n_conv}")
        elif isinstance(el, Pool):
            n_pool += 1
            x = b.add("pool", [x], f"pool{n_pool}", r=el.r, s=el.s, p=el.p, mode=el.mode)
        elif isinstance(el, LRN):
            x = b.add("lrn", [x])
        elif isinstance(el, FC):
            n_fc += 1
            units = classes if el.symbolic else el.units
            x = b.add("dense", [x], f"fc{n_fc}", units=units)
            if el is not fcs[-1]:
                x = b.add("relu", [x], f"fc{n_fc}/relu")
        elif isinstance(el, Inception):
            n_inc += 1
            x = _inception(b, x, el, batchnorm, f"inc{n_inc}")
        elif isinstance(el, Residual):
            for _ in range(el.repeat):
                n_res += 1
                x = _residual(b, x, el, batchnorm, f"res{n_res}")
        else:  # pragma: no cover
            raise ArchError(f"unknown element {el!r}")
    if not b.nodes or b.nodes[x].kind not in ("dense", "relu") or not fcs:
        raise ArchError("architecture must end in a fully connected layer")
    b.add("softmax", [x], "softmax")
    inp = spec.input
    return LayerGraph(b.nodes, classes, batchnorm, (inp.w, inp.h, inp.c))


def _inception(b: _Builder, x: int, d: Inception, bn: bool, name: str) -> int:
    br1 = b.conv(x, 1, 1, d.c1, 0, bn, f"{name}/1x1")
    r3 = b.conv(x, 1, 1, d.cr3, 0, bn, f"{name}/3x3_reduce")
    br3 = b.conv(r3, 3, 1, d.c3, 1, bn, f"{name}/3x3")
    r5 = b.conv(x, 1, 1, d.cr5, 0, bn, f"{name}/5x5_reduce")
    br5 = b.conv(r5, 5, 1, d.c5, 2, bn, f"{name}/5x5")
    mp = b.add("pool", [x], f"{name}/pool", r=3, s=1, p=1, mode="max")
    brm = b.conv(mp, 1, 1, d.crM, 0, bn, f"{name}/pool_proj")
    return b.add("concat", [br1, br3, br5, brm], f"{name}/concat")


def _residual(b: _Builder, x: int, r: Residual, bn: bool, name: str) -> int:
    stride = r.stride
    # downsampling happens once, on the first spatial (k > 1) conv
    spatial = next((i for i, c in enumerate(r.convs) if c.k > 1), 0)
    y = x
    last = len(r.convs) - 1
    for i, c in enumerate(r.convs):
        s = stride if i == spatial else 1
        p = c.p if c.pad_explicit else c.k // 2
        y = b.conv(y, c.k, s, c.q, p, bn, f"{name}/conv{i + 1}", relu=i != last)
    out_c = r.convs[-1].q
    shortcut = x
    if stride != 1 or b.chans[x] != out_c:
        shortcut = b.add("proj", [x], f"{name}/proj", k=1, s=stride, q=out_c, p=0)
        if bn:
            shortcut = b.add("batchnorm", [shortcut], f"{name}/proj/bn")
    y = b.add("add", [y, shortcut], f"{name}/add")
    return b.add("relu", [y], f"{name}/relu")


def _out_side(n: int, k: int, s: int, p: int) -> int:
    return (n + 2 * p - k) // s + 1


@dataclass
class ShapeTrace:
    entries: list[tuple[str, Shape]]
    feature_length: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "layers": [{"label": lab, "shape": list(shp)} for lab, shp in self.entries],
                "feature_length": self.feature_length,
            },
            indent=2,
        )


def infer_shapes(graph: LayerGraph) -> ShapeTrace:
    """Compute every node's (w, h, c) output shape; also stored on ``graph.shapes``."""
    shapes: list[Shape] = []
    for n in graph.nodes:
        ins = [shapes[i] for i in n.inputs]
        if n.kind == "input":
            out = graph.input_shape
        elif n.kind in ("conv", "proj", "pool"):
            w, h, c = ins[0]
            k = n.attrs["r"] if n.kind == "pool" else n.attrs["k"]
            s, p = n.attrs["s"], n.attrs["p"]
            if n.kind == "pool" and n.attrs["mode"] == "avg" and (k > w + 2 * p or k > h + 2 * p):
                raise ShapeError(
                    f"{n.label}: average-pool window {k} larger than input {w}x{h} plus padding {p}"
                )
            ow, oh = _out_side(w, k, s, p), _out_side(h, k, s, p)
            if ow <= 0 or oh <= 0:
                raise ShapeError(f"{n.label}: nonpositive output size {ow}x{oh} from input {w}x{h}")
            out = (ow, oh, c if n.kind == "pool" else n.attrs["q"])
        elif n.kind == "dense":
            out = (1, 1, n.attrs["units"])
        elif n.kind == "concat":
            if len({(s[0], s[1]) for s in ins}) != 1:
                raise ShapeError(f"{n.label}: concat inputs disagree on spatial size {ins}")
            out = (ins[0][0], ins[0][1], sum(s[2] for s in ins))
        elif n.kind == "add":
            if len(set(ins)) != 1:
                raise ShapeError(f"{n.label}: add inputs disagree on shape {ins}")
            out = ins[0]
        else:
            out = ins[0]
        shapes.append(out)
    graph.shapes = shapes
    w, h, c = shapes[-1]
    return ShapeTrace([(n.label, s) for n, s in zip(graph.nodes, shapes)], w * h * c)


@dataclass
class ParamReport:
    layers: list[tuple[str, int]]
    total: int

    def to_json(self) -> str:
        return json.dumps(
            {"layers": [{"label": lab, "count": c} for lab, c in self.layers], "total": self.total},
            indent=2,
        )


def param_shapes(graph: LayerGraph, node: Node) -> dict[str, tuple[int, ...]]:
    """Parameter array shapes for one node (empty for parameterless layers)."""
    if graph.shapes is None:
        raise ArchError("shapes not inferred yet")
    if node.kind in ("conv", "proj"):
        c_in = graph.shapes[node.inputs[0]][2]
        k, q = node.attrs["k"], node.attrs["q"]
        return {"W": (k, k, c_in, q), "b": (q,)}
    if node.kind == "dense":
        w, h, c = graph.shapes[node.inputs[0]]
        return {"W": (w * h * c, node.attrs["units"]), "b": (node.attrs["units"],)}
    if node.kind == "batchnorm":
        c = graph.shapes[node.index][2]
        return {"gamma": (c,), "beta": (c,)}
    return {}


def count_params(graph: LayerGraph) -> ParamReport:
    if graph.shapes is None:
        raise ArchError("count_params needs inferred shapes; call infer_shapes first")
    layers = []
    for n in graph.nodes:
        shapes = param_shapes(graph, n)
        count = 0
        for shp in shapes.values():
            size = 1
            for d in shp:
                size *= d
            count += size
        layers.append((n.label, count))
    return ParamReport(layers, sum(c for _, c in layers))


def compile_arch(spec: ArchSpec, classes: int, batchnorm: bool | None = None) -> LayerGraph:
    """expand + infer_shapes in one call."""
    graph = expand(spec, classes, batchnorm)
    infer_shapes(graph)
    return graph
