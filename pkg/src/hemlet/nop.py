"""Contention-free 2D-mesh network-on-package model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .hwconfig import NoPConfig, SystemConfig


class MeshCoord(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class Transfer:
    src: MeshCoord
    dst: MeshCoord
    bytes: int
    tag: str = ""

    def __post_init__(self):
        if self.bytes < 0:
            raise ValueError(f"negative payload: {self.bytes}")


def route_hops(src: MeshCoord, dst: MeshCoord) -> int:
    # XY dimension-order routing: every hop moves one step toward dst
    return abs(src[0] - dst[0]) + abs(src[1] - dst[1])


def transfer_cost(t: Transfer, nop: NoPConfig) -> tuple[float, float]:
    """(latency ns, energy pJ) of one transfer.

    Bandwidth is in GB/s, i.e. bytes per ns. Same-chiplet moves cost nothing
    here; buffers account for them.
    """
    if t.src == t.dst:
        return 0.0, 0.0
    latency = route_hops(t.src, t.dst) * nop.t_hop + t.bytes / nop.bw
    return latency, t.bytes * 8 * nop.e_bit


@dataclass(frozen=True)
class Floorplan:
    mesh: tuple[int, int]
    idp: tuple[MeshCoord, ...]
    dcim: tuple[MeshCoord, ...]
    acim: tuple[MeshCoord, ...]


def floorplan(config: SystemConfig, n_acim: int) -> Floorplan:
    """Place chiplets on the mesh.

    IDP chiplets go to the grid center, DCIM chiplets take the free cells
    nearest the IDP, ACIM chiplets fill the remaining cells nearest-first in
    row-major order.
    """
    total = n_acim + config.n_dcim_chiplets + config.n_idp_chiplets
    if config.nop.mesh_x:
        mx, my = config.nop.mesh_x, config.nop.mesh_y
    else:
        mx, my = config.replace(n_acim_chiplets=n_acim).mesh_dims()
    if mx * my < total:
        raise ValueError(f"mesh {mx}x{my} cannot hold {total} chiplets")
    center = MeshCoord(mx // 2, my // 2)
    cells = sorted((MeshCoord(x, y) for y in range(my) for x in range(mx)),
                   key=lambda c: (route_hops(c, center), c.y, c.x))
    n_idp, n_dcim = config.n_idp_chiplets, config.n_dcim_chiplets
    idp = tuple(cells[:n_idp])
    dcim = tuple(cells[n_idp:n_idp + n_dcim])
    acim = tuple(cells[n_idp + n_dcim:total])
    return Floorplan((mx, my), idp, dcim, acim)
