"""Per-operation latency and energy models for ACIM, DCIM and SIMD units."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..hwconfig import ACIMConfig, DCIMConfig, IDPConfig, SystemConfig
from ..placement import MappingPlan
from ..workload import DynamicOp, StaticLayer


def acim_layer_latency(layer: StaticLayer, mapping: MappingPlan, acim: ACIMConfig,
                       tokens: int) -> tuple[float, float]:
    """(ns, pJ) of one layer's array work for ``tokens`` input vectors.

    Each input bit needs one wordline activation plus, per group, as many
    sequential ADC conversions as the layer owns columns in that group.
    Subarrays work in parallel; partial-sum adds are charged elsewhere.
    """
    fp = mapping.footprint(layer)
    bits = mapping.spec.act_bits
    per_token = bits * (acim.t_row + float(fp.degree.max()) * acim.t_adc)
    slices = mapping.slices
    cells = layer.rows * layer.cols * slices * bits * tokens
    conversions = layer.cols * slices * fp.row_tiles * bits * tokens
    return per_token * tokens, cells * acim.e_mac_row + conversions * acim.e_adc


def simd_cost(ops: int, simd: IDPConfig) -> tuple[float, float]:
    """(ns, pJ) for ``ops`` element operations on a SIMD unit."""
    return -(-ops // simd.simd_width) * simd.t_simd, ops * simd.e_simd


@dataclass(frozen=True)
class AcimStep:
    """Per-token costs of one ACIM execution step (layers active together).

    Phases run back to back: buffer traffic, intra-chiplet transport, array
    compute, partial-sum adds on the chiplet SIMD.
    """
    layers: tuple[StaticLayer, ...]
    chiplets: tuple[int, ...]
    sa_ns: float
    buffer_ns: float
    ic_ns: float
    simd_ns: float
    e_sa: float
    e_buffer: float
    e_ic: float
    e_simd: float
    in_bytes: dict  # chiplet -> bytes per token it must receive
    out_bytes: dict  # chiplet -> bytes per token it sends back
    out_cols_by_head: dict  # chiplet -> {head: columns} (Q/K/V steps only)
    macs: int  # per token
    adc_busy_ns: float  # summed ADC occupancy per token
    simd_ops: int  # per token


def acim_step(layers: Sequence[StaticLayer], inputs: Sequence[str], mapping: MappingPlan,
              config: SystemConfig, d_head: int = 0) -> AcimStep:
    """Build per-token costs for layers executed together.

    ``inputs[i]`` names the activation tensor feeding ``layers[i]``; layers
    sharing a tensor on one chiplet receive it once.
    """
    acim = config.acim
    spec = mapping.spec
    bits, ab = spec.act_bits, spec.act_bytes
    slices = mapping.slices
    per_pe, per_chip = acim.sa_per_pe, acim.sa_per_chiplet

    n_sa = mapping.used_subarrays
    n_pe = -(-n_sa // per_pe)
    n_chip = mapping.n_acim_chiplets
    degree_by_sa = np.zeros(n_sa)
    pe_local = np.zeros(n_pe)  # local buffer bytes per token
    pe_in = np.zeros(n_pe)  # input bytes broadcast into each PE
    pe_out = np.zeros(n_pe)
    chip_in = np.zeros(n_chip)
    chip_out = np.zeros(n_chip)
    chip_psum = np.zeros(n_chip, dtype=np.int64)
    chip_seen_input: set = set()
    heads: dict[int, dict[int, int]] = defaultdict(lambda: defaultdict(int))
    e_sa = 0.0
    adc_busy = 0.0
    macs = 0

    for layer, inp in zip(layers, inputs):
        fp = mapping.footprint(layer)
        R = fp.row_tiles
        tile_rows = np.minimum(acim.sa_rows, layer.rows - np.arange(R) * acim.sa_rows)
        sa = fp.sa_ids
        cols = fp.cols
        np.add.at(degree_by_sa, sa.ravel(), np.broadcast_to(fp.degree, sa.shape).ravel())
        pes = sa // per_pe
        np.add.at(pe_local, pes.ravel(), (tile_rows[:, None] + cols[None, :] * ab).ravel())
        np.add.at(pe_out, pes.ravel(), np.broadcast_to(cols * ab, sa.shape).ravel())
        np.add.at(chip_psum, sa[0] // per_chip, cols * (R - 1))
        for r in range(R):
            pe_in[np.unique(pes[r])] += tile_rows[r] * ab
            for chip in np.unique(sa[r] // per_chip):
                if (int(chip), inp, r) not in chip_seen_input:
                    chip_seen_input.add((int(chip), inp, r))
                    chip_in[chip] += tile_rows[r] * ab
        coords = mapping.column_coords(layer)[..., 0]  # (R, C) chiplet of each column tile
        for chip in np.unique(coords):
            mask = (coords == chip).any(axis=0)
            chip_out[chip] += int(mask.sum()) * ab
            if d_head:
                h_ids = np.nonzero(mask)[0] // d_head
                for h, n in zip(*np.unique(h_ids, return_counts=True)):
                    heads[int(chip)][int(h)] += int(n) * ab
        e_sa += (layer.rows * layer.cols * slices * bits * acim.e_mac_row
                 + layer.cols * slices * R * bits * acim.e_adc)
        adc_busy += layer.cols * slices * R * bits * acim.t_adc
        macs += layer.rows * layer.cols

    chiplets = tuple(int(c) for c in np.nonzero(chip_in)[0])
    active = degree_by_sa[degree_by_sa > 0]
    sa_ns = bits * (acim.t_row + float(active.max()) * acim.t_adc)
    t_cb, e_cb = config.chiplet_buffer
    t_lb, e_lb = config.local_buffer
    t_ic, e_ic = config.intra_ic
    buffer_ns = t_cb * float((chip_in + chip_out).max()) + t_lb * float(pe_local.max())
    ic_ns = t_ic * float(chip_in.max() + pe_out.max())
    e_buffer = e_cb * 2 * float((chip_in + chip_out).sum()) + e_lb * float(pe_local.sum())
    e_ic_total = e_ic * float(pe_in.sum() + pe_out.sum())
    simd = config.idp
    psum_ops = int(chip_psum.sum())
    simd_ns = float(chip_psum.max()) / simd.simd_width * simd.t_simd
    return AcimStep(
        layers=tuple(layers), chiplets=chiplets, sa_ns=sa_ns, buffer_ns=buffer_ns,
        ic_ns=ic_ns, simd_ns=simd_ns, e_sa=e_sa, e_buffer=e_buffer, e_ic=e_ic_total,
        e_simd=psum_ops * simd.e_simd,
        in_bytes={c: int(chip_in[c]) for c in chiplets},
        out_bytes={int(c): int(chip_out[c]) for c in np.nonzero(chip_out)[0]},
        out_cols_by_head={c: dict(h) for c, h in heads.items()},
        macs=macs, adc_busy_ns=adc_busy, simd_ops=psum_ops)


@dataclass(frozen=True)
class DcimCost:
    write_ns: float
    compute_ns: float
    write_pJ: float
    compute_pJ: float
    macs: int
    write_phases: int

    @property
    def ns(self) -> float:
        return self.write_ns + self.compute_ns

    @property
    def pJ(self) -> float:
        return self.write_pJ + self.compute_pJ


def _blocks(L: int, bl: int) -> list[int]:
    return [min(bl, L - s) for s in range(0, L, bl)]


def dcim_op_cost(op: DynamicOp, dcim: DCIMConfig, block_tokens: int, act_bits: int = 8) -> DcimCost:
    """Blocked dynamic VMM on one DCIM PE group.

    QKT keeps a Q block stationary (d_head rows x B columns) and streams all
    L key vectors; PV keeps a V block stationary (B rows x d_head columns)
    and streams L probability vectors. Each block is written once, then every
    streamed vector takes ``act_bits`` bit-serial cycles.
    """
    L, dh = op.L, op.d_head
    cols_per_sa = max(1, dcim.sa_cols // act_bits)
    w_ns = w_pj = c_ns = c_pj = 0.0
    macs = 0
    blocks = _blocks(L, block_tokens)
    for b in blocks:
        if op.kind == "QKT":
            rows, cols = dh, b
        elif op.kind == "PV":
            rows, cols = b, dh
        else:
            raise ValueError(f"unknown dynamic op {op.kind}")
        col_chunks = -(-cols // cols_per_sa)
        w_ns += min(rows, dcim.sa_rows) * dcim.t_write
        w_pj += rows * col_chunks * dcim.e_write
        c_ns += L * act_bits * dcim.t_cycle
        m = L * b * dh
        c_pj += m * dcim.e_mac
        macs += m
    return DcimCost(w_ns, c_ns, w_pj, c_pj, macs, len(blocks))


def dcim_op_latency(op: DynamicOp, dcim: DCIMConfig, block_tokens: int, act_bits: int = 8) -> tuple[float, float]:
    c = dcim_op_cost(op, dcim, block_tokens, act_bits)
    return c.ns, c.pJ


def dcim_pes_per_head(d_head: int, dcim: DCIMConfig, block_tokens: int, act_bits: int = 8) -> int:
    """PEs one head occupies: a stationary Q block plus a stationary V block."""
    cols_per_sa = max(1, dcim.sa_cols // act_bits)
    q_sa = -(-d_head // dcim.sa_rows) * -(-block_tokens // cols_per_sa)
    v_sa = -(-block_tokens // dcim.sa_rows) * -(-d_head // cols_per_sa)
    return -(-q_sa // dcim.sa_per_pe) + -(-v_sa // dcim.sa_per_pe)
