"""Group-level parallelism: LayerSet construction and column interleaving.

A GLP LayerSet bundles up to M same-shape, never-concurrent static layers.
Their columns are interleaved so that every ADC group holds one column of
each member, which lets a single layer's inference drive every group.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .workload import (MHA_KINDS, LayerKind, StaticLayer, ViTModelSpec,
                       concurrent, static_layers)


class MappingError(RuntimeError):
    pass


def interleave(weights: Sequence[np.ndarray]) -> np.ndarray:
    """Column-interleave x equally shaped matrices into C_in x (x*C_out).

    Column j of member i lands at position j*x + i.
    """
    if not weights:
        raise ValueError("nothing to interleave")
    shape = weights[0].shape
    for w in weights:
        if w.shape != shape:
            raise ValueError(f"shape mismatch: {w.shape} vs {shape}")
    stacked = np.stack(weights, axis=2)  # C_in, C_out, x
    return stacked.reshape(shape[0], shape[1] * len(weights))


def deinterleave(aug: np.ndarray, x: int) -> list[np.ndarray]:
    if aug.shape[1] % x:
        raise ValueError(f"{aug.shape[1]} columns do not split into {x} members")
    return [aug[:, i::x] for i in range(x)]


@dataclass
class GLPLayerSet:
    members: list[StaticLayer]
    capacity: int
    origin_stage: int

    @property
    def free(self) -> int:
        return self.capacity - len(self.members)

    def accepts(self, layer: StaticLayer) -> bool:
        return self.free > 0 and not any(concurrent(layer, m) for m in self.members)

    def add(self, layer: StaticLayer) -> None:
        if not self.accepts(layer):
            raise MappingError(f"cannot add {layer.name} to set {[m.name for m in self.members]}")
        self.members.append(layer)

    def to_dict(self) -> dict:
        return {"members": [m.name for m in self.members],
                "capacity": self.capacity, "stage": self.origin_stage}


@dataclass
class LayerSetPlan:
    spec: ViTModelSpec
    M: int
    glp_sets: list[GLPLayerSet]
    baseline_set: list[StaticLayer]
    stage_counts: dict = field(default_factory=dict)
    slack: int = 0
    remainder: dict = field(default_factory=dict)  # kind -> (R, p, q)

    @property
    def ffn_sets(self) -> list[GLPLayerSet]:
        return [s for s in self.glp_sets if s.origin_stage == 1]

    @property
    def mha_sets(self) -> list[GLPLayerSet]:
        return [s for s in self.glp_sets if s.origin_stage == 3]

    def all_layers(self) -> list[StaticLayer]:
        return [m for s in self.glp_sets for m in s.members] + list(self.baseline_set)

    def check(self) -> None:
        """Raise MappingError unless the plan covers every layer exactly once
        and every set is homogeneous, within capacity and non-concurrent."""
        expected = static_layers(self.spec)
        got = self.all_layers()
        if len(got) != len(set(got)):
            raise MappingError("a layer appears more than once")
        if set(got) != set(expected):
            missing = sorted(set(expected) - set(got))
            raise MappingError(f"{len(missing)} layers never placed, e.g. {missing[0].name}")
        for s in self.glp_sets:
            if len(s.members) > s.capacity:
                raise MappingError("set over capacity")
            shapes = {(m.rows, m.cols) for m in s.members}
            if len(shapes) > 1:
                raise MappingError(f"mixed shapes {shapes}")
            for i, a in enumerate(s.members):
                for b in s.members[i + 1:]:
                    if concurrent(a, b):
                        raise MappingError(f"{a.name} and {b.name} are concurrent")

    def to_dict(self) -> dict:
        return {
            "model": self.spec.name,
            "group_size": self.M,
            "stage_counts": dict(self.stage_counts),
            "slack_per_collection": self.slack,
            "remainder": {k: list(v) for k, v in self.remainder.items()},
            "glp_sets": [s.to_dict() for s in self.glp_sets],
            "baseline_set": [l.name for l in self.baseline_set],
        }


def build_layersets(spec: ViTModelSpec, M: int) -> LayerSetPlan:
    """Four-stage LayerSet construction.

    1. FFN sub-layers with the same index i are collected across blocks and
       packed M at a time.
    2. Slack left in each collection's last set is filled with whole
       Q/K/V/O quadruples, one quadruple per block in block order, spread so
       no set receives two of Q/K/V from the same block.
    3. Remaining MHA layers of each type are packed M at a time; a leftover
       q is packed into three Q/K/V sets (O spread among them) only when
       3M == 4N.
    4. Whatever is left goes to the baseline (layer-wise) set.
    """
    if M < 1:
        raise ValueError("group size must be >= 1")
    N, k = spec.N, spec.k
    d = spec.d

    def layer(b, kind, sub=None):
        return StaticLayer(b, kind, sub, d, d)

    # Stage 1
    ffn_sets: list[GLPLayerSet] = []
    slack_sets: list[GLPLayerSet] = []
    n_per = -(-2 * N // M)
    for i in range(k):
        coll = [layer(b, kind, i) for b in range(N) for kind in (LayerKind.W1, LayerKind.W2)]
        sets = [GLPLayerSet(coll[j:j + M], M, 1) for j in range(0, 2 * N, M)]
        ffn_sets += sets
        if sets[-1].free:
            slack_sets.append(sets[-1])
    z = M * n_per - 2 * N

    # Stage 2
    remaining = {kind: [layer(b, kind) for b in range(N)] for kind in MHA_KINDS}
    filled_layers = 0
    quads = 0
    if z and slack_sets:
        target = min(z * -(-k // 4), N)
        cursor = 0
        for b in range(target):
            for kind in MHA_KINDS:
                lay = layer(b, kind)
                for step in range(len(slack_sets)):
                    s = slack_sets[(cursor + step) % len(slack_sets)]
                    if s.accepts(lay):
                        s.add(lay)
                        remaining[kind].remove(lay)
                        filled_layers += 1
                        cursor = (cursor + step + 1) % len(slack_sets)
                        break
            quads += 1

    # Stage 3
    mha_sets: list[GLPLayerSet] = []
    leftovers: dict[LayerKind, list[StaticLayer]] = {}
    remainder = {}
    for kind in MHA_KINDS:
        rest = remaining[kind]
        p, q = divmod(len(rest), M)
        remainder[kind.value] = (len(rest), p, q)
        for j in range(p):
            mha_sets.append(GLPLayerSet(rest[j * M:(j + 1) * M], M, 3))
        leftovers[kind] = rest[p * M:]
    baseline: list[StaticLayer] = []
    if any(leftovers.values()) and 3 * M == 4 * N:
        trio = [GLPLayerSet(list(leftovers[kind]), M, 3) for kind in MHA_KINDS[:3]]
        for j, lay in enumerate(leftovers[LayerKind.WO]):
            # round-robin, earlier sets get the extras; overflow goes to baseline
            for step in range(3):
                s = trio[(j + step) % 3]
                if s.accepts(lay):
                    s.add(lay)
                    break
            else:
                baseline.append(lay)
        for s in trio:
            overflow = s.members[M:]
            del s.members[M:]
            baseline += overflow
        mha_sets += [s for s in trio if s.members]
    else:
        for kind in MHA_KINDS:
            baseline += leftovers[kind]

    # Stage 4
    baseline.sort(key=lambda l: l.key)
    plan = LayerSetPlan(
        spec=spec, M=M, glp_sets=ffn_sets + mha_sets, baseline_set=baseline,
        slack=z, remainder=remainder,
        stage_counts={
            "ffn_sets": len(ffn_sets),
            "slack_layers_filled": filled_layers,
            "slack_quadruples": quads,
            "mha_sets": len(mha_sets),
            "baseline": len(baseline),
        })
    plan.check()
    return plan


def layerwise_plan(spec: ViTModelSpec, M: int) -> LayerSetPlan:
    """Every layer mapped layer-wise (no GLP sets)."""
    layers = static_layers(spec)
    return LayerSetPlan(spec=spec, M=M, glp_sets=[], baseline_set=layers,
                        stage_counts={"ffn_sets": 0, "slack_layers_filled": 0,
                                      "slack_quadruples": 0, "mha_sets": 0,
                                      "baseline": len(layers)})


def make_plan(spec: ViTModelSpec, M: int, mapping: str) -> LayerSetPlan:
    if mapping == "glp":
        return build_layersets(spec, M)
    if mapping == "layerwise":
        return layerwise_plan(spec, M)
    raise ValueError(f"unknown mapping kind {mapping!r}")
