"""Executable networks built from an expanded :class:`LayerGraph`."""

from __future__ import annotations

import copy

import numpy as np

from ..archdsl import ArchSpec, LayerGraph, compile_arch, param_shapes
from ..tensor import layers as L
from ..tensor.checkpoint import load_checkpoint, save_checkpoint
from ..tensor.core import Tensor


def he_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _make_layer(graph: LayerGraph, node, rng: np.random.Generator) -> L.Layer:
    kind = node.kind
    a = node.attrs
    if kind in ("conv", "proj"):
        shp = param_shapes(graph, node)["W"]
        k, _, c_in, q = shp
        return L.Conv2D(a["k"], a["s"], a["p"], c_in, q, weight=he_uniform(rng, shp, k * k * c_in))
    if kind == "dense":
        shp = param_shapes(graph, node)["W"]
        return L.Dense(shp[0], shp[1], weight=he_uniform(rng, shp, shp[0]))
    if kind == "pool":
        return L.Pool2D(a["r"], a["s"], a["p"], a["mode"])
    if kind == "relu":
        return L.ReLU()
    if kind == "lrn":
        return L.LRN()
    if kind == "batchnorm":
        return L.BatchNorm(graph.shapes[node.index][2])
    if kind == "concat":
        return L.Concat()
    if kind == "add":
        return L.Add()
    if kind == "softmax":
        return L.Softmax()
    raise ValueError(f"no layer for node kind {kind!r}")


class Network:
    """A layer graph plus initialized parameters.

    ``forward`` returns softmax scores; ``logits`` stops at the final dense
    layer. Parameters are drawn He-uniform (biases zero) from a single
    ``seed``-ed stream in graph order.
    """

    def __init__(self, graph: LayerGraph, seed: int = 0, spec: ArchSpec | None = None):
        if graph.shapes is None:
            raise ValueError("graph needs inferred shapes")
        self.graph = graph
        self.spec = spec
        rng = np.random.default_rng(seed)
        self.layers: list[L.Layer | None] = [
            None if n.kind == "input" else _make_layer(graph, n, rng) for n in graph.nodes
        ]
        self._acts: list[np.ndarray | None] = []

    @classmethod
    def from_spec(cls, spec: ArchSpec, classes: int, seed: int = 0) -> "Network":
        return cls(compile_arch(spec, classes), seed=seed, spec=spec)

    @property
    def classes(self) -> int:
        return self.graph.classes

    @property
    def input_shape(self) -> tuple[int, int, int]:
        """(h, w, c) as expected by ``forward``."""
        w, h, c = self.graph.input_shape
        return (h, w, c)

    @property
    def head_index(self) -> int:
        return self.graph.head.index

    # -- parameters ----------------------------------------------------

    def named_params(self) -> list[tuple[str, Tensor]]:
        out = []
        for node, layer in zip(self.graph.nodes, self.layers):
            if layer is not None:
                out.extend((f"{node.label}.{k}", t) for k, t in layer.params.items())
        return out

    def params(self) -> list[Tensor]:
        return [t for _, t in self.named_params()]

    def zero_grad(self) -> None:
        for t in self.params():
            t.zero_grad()

    def state(self) -> dict[str, np.ndarray]:
        """Every parameter and batch-norm buffer, keyed ``label.name``."""
        out: dict[str, np.ndarray] = {}
        for node, layer in zip(self.graph.nodes, self.layers):
            if layer is None:
                continue
            for k, t in layer.params.items():
                out[f"{node.label}.{k}"] = t.value
            for k, v in layer.buffers.items():
                out[f"{node.label}.{k}"] = v
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        mine = self.state()
        if set(mine) != set(state):
            missing = sorted(set(mine) - set(state))
            extra = sorted(set(state) - set(mine))
            raise ValueError(f"state mismatch; missing {missing[:3]}, unexpected {extra[:3]}")
        for node, layer in zip(self.graph.nodes, self.layers):
            if layer is None:
                continue
            for k, t in layer.params.items():
                arr = state[f"{node.label}.{k}"]
                if arr.shape != t.shape:
                    raise ValueError(f"{node.label}.{k}: shape {arr.shape} != {t.shape}")
                t.value = np.array(arr, dtype=np.float64)
            for k in layer.buffers:
                layer.buffers[k] = np.array(state[f"{node.label}.{k}"], dtype=np.float64)

    def save(self, path) -> None:
        save_checkpoint(path, self.state())

    def load(self, path) -> None:
        records, _ = load_checkpoint(path)
        self.load_state(records)

    def clone(self) -> "Network":
        return copy.deepcopy(self)

    # -- execution -----------------------------------------------------

    def _run(self, x: np.ndarray, train: bool, stop: int) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 4 or x.shape[1:] != self.input_shape:
            raise ValueError(f"input shape {x.shape[1:]} does not match network input {self.input_shape}")
        acts: list[np.ndarray | None] = [None] * len(self.graph.nodes)
        for node, layer in zip(self.graph.nodes, self.layers):
            if node.index > stop:
                break
            if layer is None:
                acts[node.index] = x
                continue
            ins = [acts[i] for i in node.inputs]
            arg = ins if node.kind in ("concat", "add") else ins[0]
            acts[node.index] = layer.forward(arg, train=train)
        self._acts = acts
        return acts[stop]

    def logits(self, x, train: bool = False) -> np.ndarray:
        return self._run(x, train, self.head_index)

    def forward(self, x, train: bool = False) -> np.ndarray:
        return self._run(x, train, len(self.graph.nodes) - 1)

    def features(self, x, label: str) -> np.ndarray:
        """Activation of the node called ``label`` (inference mode)."""
        return self._run(x, False, self.graph.node(label).index)

    def backward_from(self, index: int, dout: np.ndarray) -> np.ndarray:
        """Backpropagate ``dout`` arriving at node ``index``; returns the input gradient."""
        grads: list[np.ndarray | None] = [None] * len(self.graph.nodes)
        grads[index] = dout
        for node in reversed(self.graph.nodes[: index + 1]):
            g = grads[node.index]
            if g is None or node.kind == "input":
                continue
            dx = self.layers[node.index].backward(g)
            if node.kind not in ("concat", "add"):
                dx = [dx]
            for i, d in zip(node.inputs, dx):
                grads[i] = d if grads[i] is None else grads[i] + d
        return grads[0]

    def loss_and_grad(self, x, labels, train: bool = True) -> float:
        """Softmax cross-entropy on a batch; fills parameter gradients (zeroed first)."""
        self.zero_grad()
        z = self.logits(x, train=train)
        loss, dz, _ = L.softmax_cross_entropy(z, np.asarray(labels))
        self.backward_from(self.head_index, dz)
        return loss
