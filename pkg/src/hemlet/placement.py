"""Physical placement of LayerSets onto ACIM chiplets.

Each placed matrix (a padded GLP augmented matrix or one baseline layer) is
cut into row tiles of ``sa_rows`` and column chunks of one subarray's worth
of logical columns. Chunks are laid out on consecutive subarrays, row tiles
of one chunk adjacent, filling PEs and chiplets in order.

A logical column spans ``slices`` physical columns (bit slices). A group is
M logical slots; each slice position of a group has its own ADC, so a group
owns ``slices`` ADCs and converts one slot per ADC per step.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .glp import LayerSetPlan, MappingError
from .hwconfig import ACIMConfig, SystemConfig
from .workload import StaticLayer, ViTModelSpec

COORD_FIELDS = ("chiplet", "pe", "subarray", "group", "slot")


@dataclass(frozen=True)
class PlacedMatrix:
    kind: str  # "glp" or "baseline"
    members: tuple[StaticLayer, ...]
    rows: int
    member_cols: int
    width: int  # logical columns, padded to M per member column for GLP
    row_tiles: int
    chunks: int
    base_sa: int

    @property
    def n_subarrays(self) -> int:
        return self.row_tiles * self.chunks


@dataclass(frozen=True)
class LayerFootprint:
    """Where one layer's columns live: per-subarray column counts and the
    serialization degree (max columns of this layer in any one group)."""
    layer: StaticLayer
    sa_ids: np.ndarray  # (row_tiles, chunks) global subarray ids
    cols: np.ndarray  # (chunks,) logical columns of this layer in each chunk
    degree: np.ndarray  # (chunks,) serialization degree per chunk
    groups: np.ndarray  # (chunks,) groups touched per chunk
    row_tiles: int

    @property
    def n_subarrays(self) -> int:
        return self.sa_ids.size


@dataclass
class MappingPlan:
    spec: ViTModelSpec
    acim: ACIMConfig
    layerset: LayerSetPlan
    matrices: list[PlacedMatrix]
    n_acim_chiplets: int
    used_subarrays: int
    _index: dict = field(default_factory=dict, repr=False)

    @property
    def M(self) -> int:
        return self.acim.group_size

    @property
    def slices(self) -> int:
        return self.acim.slices(self.spec.weight_bits)

    @property
    def lcols(self) -> int:
        return self.acim.logical_cols(self.spec.weight_bits)

    def locate(self, layer: StaticLayer) -> tuple[PlacedMatrix, int]:
        try:
            return self._index[layer]
        except KeyError:
            raise MappingError(f"layer {layer.name} is not placed") from None

    def positions(self, layer: StaticLayer) -> np.ndarray:
        """Logical column position of each of the layer's columns inside its matrix."""
        mat, slot = self.locate(layer)
        j = np.arange(layer.cols)
        if mat.kind == "glp":
            return j * self.M + slot
        return j

    def split_subarray(self, sa: np.ndarray):
        per_pe = self.acim.sa_per_pe
        per_chip = self.acim.sa_per_chiplet
        return sa // per_chip, (sa // per_pe) % self.acim.pe_per_chiplet, sa % per_pe

    def column_coords(self, layer: StaticLayer) -> np.ndarray:
        """(row_tiles, cols, 5) array of (chiplet, pe, subarray, group, slot)."""
        mat, _ = self.locate(layer)
        pos = self.positions(layer)
        chunk, inner = np.divmod(pos, self.lcols)
        r = np.arange(mat.row_tiles)[:, None]
        sa = mat.base_sa + chunk[None, :] * mat.row_tiles + r
        chip, pe, local = self.split_subarray(sa)
        group = np.broadcast_to(inner // self.M, sa.shape)
        slot = np.broadcast_to(inner % self.M, sa.shape)
        return np.stack([chip, pe, local, group, slot], axis=-1)

    def footprint(self, layer: StaticLayer) -> LayerFootprint:
        key = ("fp", layer)
        if key in self._index:
            return self._index[key]
        mat, _ = self.locate(layer)
        pos = self.positions(layer)
        chunk, inner = np.divmod(pos, self.lcols)
        gid = chunk * (self.lcols // self.M) + inner // self.M
        chunks = np.unique(chunk)
        cols = np.bincount(chunk, minlength=mat.chunks)[chunks]
        per_group = np.bincount(gid, minlength=mat.chunks * (self.lcols // self.M))
        per_group = per_group.reshape(mat.chunks, -1)[chunks]
        degree = per_group.max(axis=1)
        groups = (per_group > 0).sum(axis=1)
        sa = mat.base_sa + chunks[None, :] * mat.row_tiles + np.arange(mat.row_tiles)[:, None]
        fp = LayerFootprint(layer, sa, cols, degree, groups, mat.row_tiles)
        self._index[key] = fp
        return fp

    def layers(self) -> list[StaticLayer]:
        return [m for mat in self.matrices for m in mat.members]

    def to_dict(self, explicit_columns: bool = False) -> dict:
        out = {
            "model": self.spec.name,
            "group_size": self.M,
            "slices_per_weight": self.slices,
            "logical_cols_per_subarray": self.lcols,
            "n_acim_chiplets": self.n_acim_chiplets,
            "used_subarrays": self.used_subarrays,
            "matrices": [],
        }
        for mat in self.matrices:
            rec = {"kind": mat.kind, "members": [m.name for m in mat.members],
                   "rows": mat.rows, "member_cols": mat.member_cols, "width": mat.width,
                   "row_tiles": mat.row_tiles, "chunks": mat.chunks,
                   "first_subarray": mat.base_sa, "n_subarrays": mat.n_subarrays}
            if explicit_columns:
                rec["columns"] = {m.name: self.column_coords(m).tolist() for m in mat.members}
            out["matrices"].append(rec)
        return out

    def to_json(self, explicit_columns: bool = False) -> str:
        return json.dumps(self.to_dict(explicit_columns), indent=1)


def place(plan: LayerSetPlan, spec: ViTModelSpec, config: SystemConfig) -> MappingPlan:
    """Place GLP sets first, then baseline layers, on consecutive subarrays.

    With ``config.n_acim_chiplets == 0`` the chiplet count is the smallest
    that holds the whole plan.
    """
    acim = config.acim
    M = acim.group_size
    lcols = acim.logical_cols(spec.weight_bits)
    if lcols < M or lcols % M:
        raise MappingError(f"{lcols} logical columns per subarray do not form groups of {M}")
    per_chip = acim.sa_per_chiplet
    limit = config.n_acim_chiplets * per_chip if config.n_acim_chiplets else None

    matrices: list[PlacedMatrix] = []
    index: dict = {}
    cursor = 0

    def add(kind, members, width):
        nonlocal cursor
        rows = members[0].rows
        tiles = -(-rows // acim.sa_rows)
        chunks = -(-width // lcols)
        mat = PlacedMatrix(kind, tuple(members), rows, members[0].cols, width, tiles, chunks, cursor)
        if limit is not None and cursor + mat.n_subarrays > limit:
            raise MappingError(
                f"ACIM capacity exhausted: {members[0].name} needs subarrays "
                f"{cursor}..{cursor + mat.n_subarrays - 1}, only {limit} available "
                f"on {config.n_acim_chiplets} chiplets")
        cursor += mat.n_subarrays
        matrices.append(mat)
        for slot, m in enumerate(members):
            index[m] = (mat, slot)

    for s in plan.glp_sets:
        if s.members:
            add("glp", list(s.members), s.capacity * s.members[0].cols)
    for layer in plan.baseline_set:
        add("baseline", [layer], layer.cols)

    n_chip = config.n_acim_chiplets or max(1, -(-cursor // per_chip))
    return MappingPlan(spec, acim, plan, matrices, n_chip, cursor, index)


@dataclass(frozen=True)
class LayerStats:
    name: str
    groups_active: int
    serialization_degree: int
    subarrays: int


@dataclass
class MappingStats:
    layers: list[LayerStats]
    cells_used: int
    cells_allocated: int
    stage_counts: dict

    @property
    def cells_wasted(self) -> int:
        return self.cells_allocated - self.cells_used

    @property
    def mean_degree(self) -> float:
        return float(np.mean([l.serialization_degree for l in self.layers]))

    def table(self) -> str:
        lines = ["layer\tgroups_active\tdegree\tsubarrays"]
        lines += [f"{l.name}\t{l.groups_active}\t{l.serialization_degree}\t{l.subarrays}" for l in self.layers]
        return "\n".join(lines)


def mapping_stats(mapping: MappingPlan) -> MappingStats:
    out = []
    used = 0
    for layer in sorted(mapping.layers(), key=lambda l: l.key):
        fp = mapping.footprint(layer)
        out.append(LayerStats(layer.name, int(fp.groups.sum()) * fp.row_tiles,
                              int(fp.degree.max()), fp.n_subarrays))
        used += layer.rows * layer.cols * mapping.slices
    a = mapping.acim
    allocated = mapping.used_subarrays * a.sa_rows * a.sa_cols
    return MappingStats(out, used, allocated, dict(mapping.layerset.stage_counts))
