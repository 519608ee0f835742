"""ViT workload description and layer-graph expansion.

A model is described by a handful of hyperparameters and expanded into
static VMM layers (executed on ACIM), dynamic VMM operators (QK^T and PV,
executed on DCIM) and vector operators, connected by dependency edges that
follow the native per-block execution order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Optional, Sequence, Union

import numpy as np


class WorkloadError(ValueError):
    pass


class LayerKind(str, Enum):
    WQ = "WQ"
    WK = "WK"
    WV = "WV"
    WO = "WO"
    W1 = "W1"
    W2 = "W2"


KIND_ORDER = {kind: i for i, kind in enumerate(LayerKind)}
MHA_KINDS = (LayerKind.WQ, LayerKind.WK, LayerKind.WV, LayerKind.WO)
QKV_KINDS = frozenset({LayerKind.WQ, LayerKind.WK, LayerKind.WV})


@dataclass(frozen=True)
class ViTModelSpec:
    name: str
    d: int
    D: int
    N: int
    H: int
    L: int
    weight_bits: int = 8
    act_bits: int = 8

    def __post_init__(self):
        if self.d <= 0 or self.N <= 0 or self.H <= 0 or self.L <= 0:
            raise WorkloadError(f"{self.name}: d, N, H and L must be positive")
        if self.D < self.d:
            raise WorkloadError(f"{self.name}: FFN dim D={self.D} smaller than d={self.d}")
        if self.D % self.d:
            raise WorkloadError(
                f"{self.name}: FFN dim D={self.D} is not a multiple of d={self.d}; "
                "FFN layers cannot be partitioned into d x d sub-layers")
        if self.d % self.H:
            raise WorkloadError(f"{self.name}: H={self.H} does not divide d={self.d}")
        if self.weight_bits <= 0 or self.act_bits <= 0:
            raise WorkloadError(f"{self.name}: bit widths must be positive")

    @property
    def k(self) -> int:
        """Number of d x d sub-layers each FFN matrix is split into."""
        return self.D // self.d

    @property
    def d_head(self) -> int:
        return self.d // self.H

    @property
    def act_bytes(self) -> int:
        return -(-self.act_bits // 8)


VIT_S16 = ViTModelSpec("ViT-S/16", d=384, D=1536, N=12, H=6, L=197)
VIT_B16 = ViTModelSpec("ViT-B/16", d=768, D=3072, N=12, H=12, L=197)
VIT_L16 = ViTModelSpec("ViT-L/16", d=1024, D=4096, N=24, H=16, L=197)

MODELS = {m.name: m for m in (VIT_S16, VIT_B16, VIT_L16)}
_ALIASES = {"vit-s": VIT_S16, "vit-b": VIT_B16, "vit-l": VIT_L16}


def get_model(name: str) -> ViTModelSpec:
    if name in MODELS:
        return MODELS[name]
    key = name.lower().split("/")[0]
    if key in _ALIASES:
        return _ALIASES[key]
    raise WorkloadError(f"unknown model {name!r}; known: {sorted(MODELS)}")


@dataclass(frozen=True)
class StaticLayer:
    block_index: int
    kind: LayerKind
    sub_index: Optional[int]
    rows: int
    cols: int

    @property
    def key(self) -> tuple:
        return (self.block_index, KIND_ORDER[self.kind], -1 if self.sub_index is None else self.sub_index)

    @property
    def name(self) -> str:
        if self.sub_index is None:
            return f"b{self.block_index}.{self.kind.value}"
        return f"b{self.block_index}.{self.kind.value}_{self.sub_index}"

    @property
    def is_mha(self) -> bool:
        return self.kind in MHA_KINDS

    def __lt__(self, other: "StaticLayer") -> bool:
        return self.key < other.key


@dataclass(frozen=True)
class DynamicOp:
    block_index: int
    head_index: int
    kind: str  # "QKT" or "PV"
    L: int
    d_head: int

    @property
    def name(self) -> str:
        return f"b{self.block_index}.h{self.head_index}.{self.kind}"

    @property
    def macs(self) -> int:
        return self.L * self.L * self.d_head


@dataclass(frozen=True)
class VectorOp:
    block_index: int
    kind: str  # Softmax_local, GlobalNorm, LayerNorm, GELU, ResidualAdd
    element_count: int
    tag: str = ""

    @property
    def name(self) -> str:
        suffix = f".{self.tag}" if self.tag else ""
        return f"b{self.block_index}.{self.kind}{suffix}"


Node = Union[StaticLayer, DynamicOp, VectorOp]


@dataclass(frozen=True)
class LayerGraph:
    spec: ViTModelSpec
    static_layers: tuple[StaticLayer, ...]
    dynamic_ops: tuple[DynamicOp, ...]
    vector_ops: tuple[VectorOp, ...]
    edges: tuple[tuple[str, str], ...] = field(repr=False)

    def nodes(self) -> Iterator[Node]:
        yield from self.static_layers
        yield from self.dynamic_ops
        yield from self.vector_ops

    def layer(self, name: str) -> StaticLayer:
        for layer in self.static_layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def block_layers(self, block: int) -> list[StaticLayer]:
        return [l for l in self.static_layers if l.block_index == block]


def static_layers(spec: ViTModelSpec) -> list[StaticLayer]:
    """All static layers in canonical (block, kind, sub) order."""
    d, k = spec.d, spec.k
    out = []
    for b in range(spec.N):
        for kind in MHA_KINDS:
            out.append(StaticLayer(b, kind, None, d, d))
        for kind in (LayerKind.W1, LayerKind.W2):
            for i in range(k):
                out.append(StaticLayer(b, kind, i, d, d))
    return out


def concurrent(a: StaticLayer, b: StaticLayer) -> bool:
    """True when both layers may be active at the same time.

    Only the Q/K/V projections of one block share an input and run together;
    every other pair is ordered by a data dependency.
    """
    return (a != b and a.block_index == b.block_index
            and a.kind in QKV_KINDS and b.kind in QKV_KINDS)


def expand_model(spec: ViTModelSpec) -> LayerGraph:
    layers = static_layers(spec)
    dyn: list[DynamicOp] = []
    vec: list[VectorOp] = []
    edges: list[tuple[str, str]] = []
    L, d, D, H = spec.L, spec.d, spec.D, spec.H
    prev_tail: Optional[str] = None

    for b in range(spec.N):
        q, k_, v, o = (f"b{b}.{kd.value}" for kd in MHA_KINDS)
        if prev_tail is not None:
            edges += [(prev_tail, q), (prev_tail, k_), (prev_tail, v)]
        softmax = VectorOp(b, "Softmax_local", H * L * L)
        gnorm = VectorOp(b, "GlobalNorm", L * d)
        vec.append(softmax)
        for h in range(H):
            qkt = DynamicOp(b, h, "QKT", L, spec.d_head)
            dyn.append(qkt)
            edges += [(q, qkt.name), (k_, qkt.name), (qkt.name, softmax.name)]
        for h in range(H):
            pv = DynamicOp(b, h, "PV", L, spec.d_head)
            dyn.append(pv)
            edges += [(softmax.name, pv.name), (v, pv.name), (pv.name, gnorm.name)]
        vec.append(gnorm)
        edges.append((gnorm.name, o))
        res1 = VectorOp(b, "ResidualAdd", L * d, "attn")
        ln1 = VectorOp(b, "LayerNorm", L * d, "attn")
        gelu = VectorOp(b, "GELU", L * D)
        res2 = VectorOp(b, "ResidualAdd", L * d, "ffn")
        ln2 = VectorOp(b, "LayerNorm", L * d, "ffn")
        vec += [res1, ln1, gelu, res2, ln2]
        edges += [(o, res1.name), (res1.name, ln1.name)]
        chain = [ln1.name]
        chain += [f"b{b}.W1_{i}" for i in range(spec.k)]
        chain.append(gelu.name)
        chain += [f"b{b}.W2_{i}" for i in range(spec.k)]
        chain += [res2.name, ln2.name]
        edges += list(zip(chain[:-1], chain[1:]))
        prev_tail = ln2.name

    return LayerGraph(spec, tuple(layers), tuple(dyn), tuple(vec), tuple(edges))


def ffn_partition(weight: np.ndarray, k: int, kind: Union[LayerKind, str]) -> list[np.ndarray]:
    """Split an FFN weight into k square d x d blocks.

    W1 (d x D) is split along columns, W2 (D x d) along rows.
    """
    kind = LayerKind(kind)
    if kind not in (LayerKind.W1, LayerKind.W2):
        raise WorkloadError(f"only W1/W2 are partitioned, got {kind.value}")
    axis = 1 if kind is LayerKind.W1 else 0
    n = weight.shape[axis]
    if k <= 0 or n % k:
        raise WorkloadError(f"{kind.value} dimension {n} not divisible into k={k} parts")
    return np.split(weight, k, axis=axis)


@dataclass(frozen=True)
class MacCount:
    static: int
    dynamic: int
    vector: int
    bias: int

    @property
    def macs(self) -> int:
        return self.static + self.dynamic

    @property
    def ops(self) -> int:
        # one MAC is two operations; every non-VMM element counts once
        return 2 * self.macs + self.vector + self.bias


def mac_count(spec: ViTModelSpec) -> MacCount:
    N, L, d, D, H = spec.N, spec.L, spec.d, spec.D, spec.H
    static = N * L * (4 * d * d + 2 * d * D)
    dynamic = 2 * N * H * L * L * spec.d_head
    vector = N * (H * L * L + L * d + 4 * L * d + L * D)
    bias = N * L * (5 * d + D)
    return MacCount(static, dynamic, vector, bias)


def total_static_weights(spec: ViTModelSpec) -> int:
    return spec.N * (4 * spec.d * spec.d + 2 * spec.d * spec.D)


def sorted_layers(layers: Sequence[StaticLayer]) -> list[StaticLayer]:
    return sorted(layers, key=lambda l: l.key)
