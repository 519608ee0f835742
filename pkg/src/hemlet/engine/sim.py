"""Build and execute the task graph of one inference.

Three dataflows are modeled:

NATIVE     every step round-trips through the IDP global buffer; each static
           step receives its whole input, computes, then returns its output.
PIPELINED  NATIVE, but static steps stream B_L-token blocks through the
           chiplet buffer so transfers overlap array compute.
HEMLET     PIPELINED, plus Q/K/V go straight from ACIM to DCIM, and the
           attention of a head runs entirely on one DCIM chiplet with a
           blocked local softmax and a final normalization.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from ..glp import make_plan
from ..hwconfig import SystemConfig, dcim_buffer_needed
from ..nop import Floorplan, MeshCoord, Transfer, floorplan, transfer_cost
from ..numerics import softmax_op_counts
from ..placement import MappingPlan, place
from ..workload import MHA_KINDS, DynamicOp, LayerKind, StaticLayer, ViTModelSpec, mac_count
from .costs import AcimStep, acim_step, dcim_op_cost, dcim_pes_per_head, simd_cost
from .events import EventSimulator, Task

CATEGORIES = ("SA", "Buffer", "IC", "SIMD", "DCIM-write")


class DataflowMode(str, Enum):
    NATIVE = "native"
    PIPELINED = "pipelined"
    HEMLET = "hemlet"


class SimulationError(RuntimeError):
    pass


def _ps(ns: float) -> int:
    return int(round(ns * 1000.0))


@dataclass
class SimReport:
    model: str
    config: str
    bw_GBps: float
    mapping: str
    mode: str
    latency_ns: float
    energy_pJ: float
    energy_breakdown: dict
    busy_ns: dict
    acim_busy_ns: dict
    adc_utilization: float
    macs_static: int
    macs_dynamic: int
    ops: int
    nop_bytes_by_tag: dict
    nop_log: list = field(repr=False, default_factory=list)  # (block, tag, bytes)
    layer_timings: dict = field(repr=False, default_factory=dict)
    n_acim_chiplets: int = 0
    n_dcim_chiplets: int = 0
    peak: bool = False
    events: Optional[list] = field(repr=False, default=None)

    @property
    def macs(self) -> int:
        return self.macs_static + self.macs_dynamic

    @property
    def tops(self) -> float:
        return self.ops / self.latency_ns / 1e3

    @property
    def tops_per_w(self) -> float:
        # ops per pJ equals TOPS/W
        return self.ops / self.energy_pJ

    def to_dict(self) -> dict:
        return {
            "model": self.model, "config": self.config, "bw_GBps": self.bw_GBps,
            "mapping": self.mapping, "mode": self.mode, "peak": self.peak,
            "latency_ns": self.latency_ns, "energy_pJ": self.energy_pJ,
            "energy_breakdown": self.energy_breakdown, "busy_ns": self.busy_ns,
            "acim_busy_ns": self.acim_busy_ns, "adc_utilization": self.adc_utilization,
            "macs_static": self.macs_static, "macs_dynamic": self.macs_dynamic,
            "ops": self.ops, "tops": self.tops, "tops_per_w": self.tops_per_w,
            "nop_bytes_by_tag": self.nop_bytes_by_tag,
            "n_acim_chiplets": self.n_acim_chiplets, "n_dcim_chiplets": self.n_dcim_chiplets,
            "layer_timings": {k: list(v) for k, v in self.layer_timings.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def resolve_acim_chiplets(spec: ViTModelSpec, config: SystemConfig) -> SystemConfig:
    """Fix the ACIM chiplet count when the config leaves it automatic.

    The count is the larger of what the layer-wise and the GLP placements
    need, so both mappings are compared on the same hardware.
    """
    if config.n_acim_chiplets:
        return config
    need = max(place(make_plan(spec, config.acim.group_size, kind), spec, config).n_acim_chiplets
               for kind in ("layerwise", "glp"))
    return config.replace(n_acim_chiplets=need)


class _Builder:
    def __init__(self, spec: ViTModelSpec, config: SystemConfig, mapping: MappingPlan,
                 fplan: Floorplan, mode: DataflowMode, peak: bool):
        self.spec, self.config, self.mapping, self.fp = spec, config, mapping, fplan
        self.mode, self.peak = mode, peak
        self.sim = EventSimulator()
        self.nop_log: list[tuple[int, str, int]] = []
        self.sa_tasks: dict[int, tuple[AcimStep, int]] = {}
        self.step_layers: dict[int, tuple[StaticLayer, ...]] = {}
        self.steps: dict[tuple, AcimStep] = {}
        self.block = 0
        self.n_dcim = config.n_dcim_chiplets
        self.heads = [[h for h in range(spec.H) if h % self.n_dcim == k] for k in range(self.n_dcim)]

    # --- nodes -------------------------------------------------------------
    def coord(self, node: str) -> MeshCoord:
        if node == "idp0":
            return self.fp.idp[0]
        pool = self.fp.acim if node.startswith("acim") else self.fp.dcim
        return pool[int(node[4:])]

    def add(self, task: Task) -> int:
        return self.sim.add(task)

    def transfer(self, src: str, dst: str, nbytes: int, tag: str, deps) -> int:
        t = Transfer(self.coord(src), self.coord(dst), nbytes, tag)
        ns, e_nop = transfer_cost(t, self.config.nop)
        e_buf = 0.0
        idp = self.config.idp
        _, e_cb = self.config.chiplet_buffer
        for node, rd in ((src, True), (dst, False)):
            if node.startswith("idp"):
                e_buf += nbytes * (idp.e_buf_r if rd else idp.e_buf_w)
            elif node.startswith("dcim"):
                e_buf += nbytes * e_cb
        if self.config.nop.link_contention:
            res = tuple(self._links(t.src, t.dst))
        else:
            res = (f"ch:{src}->{dst}",)
        self.nop_log.append((self.block, tag, nbytes))
        return self.add(Task(f"{tag}:{src}->{dst}", _ps(ns), res, tuple(deps), "transfer", "IC",
                             {"IC": e_nop, "Buffer": e_buf}, tag=tag, nbytes=nbytes))

    @staticmethod
    def _links(a: MeshCoord, b: MeshCoord):
        x, y = a
        while x != b.x:
            nx = x + (1 if b.x > x else -1)
            yield f"link:{x},{y}->{nx},{y}"
            x = nx
        while y != b.y:
            ny = y + (1 if b.y > y else -1)
            yield f"link:{x},{y}->{x},{ny}"
            y = ny

    def simd(self, unit: str, ops: int, name: str, deps) -> int:
        ns, e = simd_cost(ops, self.config.idp)
        return self.add(Task(name, _ps(ns), (f"{unit}.simd",), tuple(deps), "simd", "SIMD", {"SIMD": e}))

    # --- static steps ------------------------------------------------------
    def step(self, layers: list[StaticLayer], inputs: list[str]) -> AcimStep:
        key = tuple(layers)
        if key not in self.steps:
            qkv = layers[0].kind in (LayerKind.WQ, LayerKind.WK, LayerKind.WV)
            self.steps[key] = acim_step(layers, inputs, self.mapping, self.config,
                                        d_head=self.spec.d_head if qkv else 0)
        return self.steps[key]

    def compute(self, st: AcimStep, tokens: int, name: str, deps) -> tuple[int, int]:
        """Chain of buffer, transport, array and partial-sum tasks.
        Returns (buffer task id, last task id)."""
        res = tuple(f"acim{c}" for c in st.chiplets)
        buf = self.add(Task(f"{name}.buf", _ps(st.buffer_ns * tokens), res, tuple(deps), "buffer",
                            "Buffer", {"Buffer": st.e_buffer * tokens}))
        ic = self.add(Task(f"{name}.ic", _ps(st.ic_ns * tokens), res, (buf,), "transfer", "IC",
                           {"IC": st.e_ic * tokens}))
        sa = self.add(Task(f"{name}.sa", _ps(st.sa_ns * tokens), res, (ic,), "compute", "SA",
                           {"SA": st.e_sa * tokens}, macs=st.macs * tokens,
                           layers=tuple(l.name for l in st.layers)))
        self.sa_tasks[sa] = (st, tokens)
        last = sa
        if st.simd_ops:
            last = self.add(Task(f"{name}.psum", _ps(st.simd_ns * tokens), res, (sa,), "simd", "SIMD",
                                 {"SIMD": st.e_simd * tokens}))
        return buf, last

    def static_stage(self, st: AcimStep, name: str, tag_in: str, tag_out: str, deps,
                     to_dcim: bool = False) -> list[int]:
        L = self.spec.L
        if self.peak:
            _, last = self.compute(st, L, name, deps)
            return [last]
        if self.mode is DataflowMode.NATIVE:
            blocks = [L]
        else:
            bl = self.config.block_tokens
            blocks = [min(bl, L - s) for s in range(0, L, bl)]
        outs: list[int] = []
        prev_buf: Optional[int] = None
        for i, tokens in enumerate(blocks):
            # the chiplet buffer takes block i+1 once block i moved on to the PEs
            in_deps = list(deps) + ([prev_buf] if prev_buf is not None else [])
            ins = [self.transfer("idp0", f"acim{c}", st.in_bytes[c] * tokens, tag_in, in_deps)
                   for c in st.chiplets]
            prev_buf, last = self.compute(st, tokens, f"{name}.blk{i}", ins)
            if to_dcim:
                for c, per_head in sorted(st.out_cols_by_head.items()):
                    for k in range(self.n_dcim):
                        nb = sum(per_head.get(h, 0) for h in self.heads[k]) * tokens
                        if nb:
                            outs.append(self.transfer(f"acim{c}", f"dcim{k}", nb, tag_out, [last]))
            else:
                for c, nb in sorted(st.out_bytes.items()):
                    outs.append(self.transfer(f"acim{c}", "idp0", nb * tokens, tag_out, [last]))
        return outs

    # --- attention ---------------------------------------------------------
    def dcim_rounds(self, k: int, kind: str, deps, with_softmax: bool = False) -> list[int]:
        spec, cfg = self.spec, self.config
        heads = self.heads[k]
        if not heads:
            return list(deps)
        per_head = dcim_pes_per_head(spec.d_head, cfg.dcim, cfg.block_tokens, spec.act_bits)
        conc = max(1, cfg.dcim.pe_per_chiplet // per_head)
        prev = list(deps)
        res = (f"dcim{k}",)
        for r0 in range(0, len(heads), conc):
            n = len(heads[r0:r0 + conc])
            for op_kind in (("QKT", "PV") if kind == "both" else (kind,)):
                op = DynamicOp(self.block, heads[r0], op_kind, spec.L, spec.d_head)
                c = dcim_op_cost(op, cfg.dcim, cfg.block_tokens, spec.act_bits)
                w = self.add(Task(f"b{self.block}.dcim{k}.{op_kind}.w{r0}", _ps(c.write_ns), res,
                                  tuple(prev), "compute", "DCIM-write", {"DCIM-write": c.write_pJ * n}))
                m = self.add(Task(f"b{self.block}.dcim{k}.{op_kind}.r{r0}", _ps(c.compute_ns), res,
                                  (w,), "compute", "SA", {"SA": c.compute_pJ * n}, macs=c.macs * n))
                prev = [m]
                if with_softmax:
                    cnt = softmax_op_counts(spec.L, cfg.block_tokens, spec.d_head)
                    if op_kind == "QKT":
                        ops = n * spec.L * (cnt.exp + cnt.sum + cnt.rescale)
                        prev = [self.simd(f"dcim{k}", ops, f"b{self.block}.dcim{k}.softmax_local", prev)]
                    else:
                        ops = n * spec.L * cnt.divide
                        prev = [self.simd(f"dcim{k}", ops, f"b{self.block}.dcim{k}.global_norm", prev)]
        return prev

    def attention_native(self, qkv_outs: list[int]) -> list[int]:
        spec = self.spec
        L, dh, ab = spec.L, spec.d_head, spec.act_bytes
        b = self.block
        p_prime = []
        for k in range(self.n_dcim):
            nh = len(self.heads[k])
            if not nh:
                continue
            t = self.transfer("idp0", f"dcim{k}", 3 * L * dh * nh * ab, "QKV→DCIM", qkv_outs)
            done = self.dcim_rounds(k, "QKT", [t])
            p_prime.append(self.transfer(f"dcim{k}", "idp0", nh * L * L * ab, "P′→IDP", done))
        sm = self.simd("idp0", 3 * spec.H * L * L, f"b{b}.softmax", p_prime)
        s_outs = []
        for k in range(self.n_dcim):
            nh = len(self.heads[k])
            if not nh:
                continue
            t = self.transfer("idp0", f"dcim{k}", nh * L * L * ab, "P→DCIM", [sm])
            done = self.dcim_rounds(k, "PV", [t])
            s_outs.append(self.transfer(f"dcim{k}", "idp0", nh * L * dh * ab, "S→IDP", done))
        return s_outs

    def attention_hemlet(self, qkv_outs: list[int]) -> list[int]:
        spec = self.spec
        s_outs = []
        for k in range(self.n_dcim):
            nh = len(self.heads[k])
            if not nh:
                continue
            done = self.dcim_rounds(k, "both", qkv_outs, with_softmax=True)
            s_outs.append(self.transfer(f"dcim{k}", "idp0", nh * spec.L * spec.d_head * spec.act_bytes,
                                        "S→IDP", done))
        return s_outs

    # --- whole model -------------------------------------------------------
    def build(self) -> None:
        spec = self.spec
        L, d, D, k = spec.L, spec.d, spec.D, spec.k
        deps: list[int] = []
        for b in range(spec.N):
            self.block = b
            q, kk, v, o = (StaticLayer(b, kd, None, d, d) for kd in MHA_KINDS)
            w1 = [StaticLayer(b, LayerKind.W1, i, d, d) for i in range(k)]
            w2 = [StaticLayer(b, LayerKind.W2, i, d, d) for i in range(k)]
            st_qkv = self.step([q, kk, v], ["X", "X", "X"])
            st_o = self.step([o], ["S"])
            st_1 = self.step(w1, ["Z"] * k)
            st_2 = self.step(w2, [f"H{i}" for i in range(k)])
            if self.peak:
                for st, nm in ((st_qkv, "qkv"), (st_o, "wo"), (st_1, "w1"), (st_2, "w2")):
                    deps = self.static_stage(st, f"b{b}.{nm}", "", "", deps)
                continue

            hemlet = self.mode is DataflowMode.HEMLET
            outs = self.static_stage(st_qkv, f"b{b}.qkv", "X→ACIM",
                                     "QKV→DCIM" if hemlet else "QKV→IDP", deps, to_dcim=hemlet)
            s_outs = self.attention_hemlet(outs) if hemlet else self.attention_native(outs)
            outs = self.static_stage(st_o, f"b{b}.wo", "S→ACIM", "A→IDP", s_outs)
            ln1 = self.simd("idp0", 2 * L * d, f"b{b}.res_ln1", outs)
            outs = self.static_stage(st_1, f"b{b}.w1", "Z→ACIM", "H1→IDP", [ln1])
            gelu = self.simd("idp0", L * D, f"b{b}.gelu", outs)
            outs = self.static_stage(st_2, f"b{b}.w2", "H1′→ACIM", "H2→IDP", [gelu])
            ln2 = self.simd("idp0", (k - 1) * L * d + 2 * L * d, f"b{b}.psum_res_ln2", outs)
            deps = [ln2]


def run(spec: ViTModelSpec, config: SystemConfig, mapping_kind: str = "glp",
        mode: Union[DataflowMode, str] = DataflowMode.HEMLET, *, peak: bool = False,
        event_log: bool = False, mapping: Optional[MappingPlan] = None) -> SimReport:
    """Simulate one inference and report latency, energy and breakdowns."""
    mode = DataflowMode(mode)
    config = resolve_acim_chiplets(spec, config)
    if mapping is None:
        mapping = place(make_plan(spec, config.acim.group_size, mapping_kind), spec, config)
    if mode is DataflowMode.HEMLET and not peak:
        need = dcim_buffer_needed(spec, config)
        if config.dcim.chiplet_buffer_bytes < need:
            raise SimulationError(
                f"DCIM chiplet buffer {config.dcim.chiplet_buffer_bytes} B cannot hold Q/K/V "
                f"of its heads ({need} B)")
    fplan = floorplan(config, mapping.n_acim_chiplets)
    bld = _Builder(spec, config, mapping, fplan, mode, peak)
    bld.build()
    sim = bld.sim
    makespan = sim.run()

    energy = dict.fromkeys(CATEGORIES, 0.0)
    busy = dict.fromkeys(CATEGORIES, 0.0)
    acim_busy = {"SA": 0.0, "Buffer": 0.0, "IC": 0.0}
    macs_static = macs_dynamic = 0
    for i, t in enumerate(sim.tasks):
        for cat, e in t.energy.items():
            energy[cat] += e
        busy[t.category] += t.duration / 1000.0
        if t.resources and t.resources[0].startswith("acim") and t.category in acim_busy:
            acim_busy[t.category] += t.duration / 1000.0
        if t.macs:
            if t.resources[0].startswith("acim"):
                macs_static += t.macs
            else:
                macs_dynamic += t.macs

    # ADC utilization: conversion time over (all ADCs x time any array is busy)
    a = config.acim
    n_adc = mapping.n_acim_chiplets * a.sa_per_chiplet * a.groups_per_sa(spec.weight_bits) * mapping.slices
    adc_busy = sum(st.adc_busy_ns * tok for st, tok in bld.sa_tasks.values())
    active = sum(e - s for s, e in sim.busy_intervals(
        lambda t: t.category == "SA" and bool(t.resources) and t.resources[0].startswith("acim")))
    util = adc_busy / (n_adc * active / 1000.0) if active else 0.0

    timings: dict[str, list] = {}
    for tid, (st, _) in bld.sa_tasks.items():
        for l in st.layers:
            span = timings.setdefault(l.name, [sim.start[tid], sim.end[tid]])
            span[0] = min(span[0], sim.start[tid])
            span[1] = max(span[1], sim.end[tid])
    by_tag: dict[str, int] = defaultdict(int)
    for _, tag, nb in bld.nop_log:
        by_tag[tag] += nb

    return SimReport(
        model=spec.name, config=config.label, bw_GBps=config.nop.bw, mapping=mapping_kind,
        mode=mode.value, latency_ns=makespan / 1000.0, energy_pJ=sum(energy.values()),
        energy_breakdown=energy, busy_ns=busy, acim_busy_ns=acim_busy,
        adc_utilization=min(util, 1.0), macs_static=macs_static, macs_dynamic=macs_dynamic,
        ops=mac_count(spec).ops, nop_bytes_by_tag=dict(sorted(by_tag.items())),
        nop_log=bld.nop_log,
        layer_timings={k: (v[0] / 1000.0, v[1] / 1000.0) for k, v in sorted(timings.items())},
        n_acim_chiplets=mapping.n_acim_chiplets, n_dcim_chiplets=config.n_dcim_chiplets,
        peak=peak, events=sim.events() if event_log else None)


def breakdown_speedup(report_a: SimReport, report_b: SimReport) -> dict:
    """Per-category speedup of b over a: busy(a) / busy(b) for SA, Buffer and IC."""
    out = {}
    for cat in ("SA", "Buffer", "IC"):
        a, b = report_a.acim_busy_ns[cat], report_b.acim_busy_ns[cat]
        out[cat] = a / b if b else (1.0 if a == b else float("inf"))
    return out


def write_event_log(report: SimReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in report.events or []:
            fh.write(ev.to_json() + "\n")


def invariant_violations(report: SimReport, spec: ViTModelSpec) -> list[str]:
    """Self-checks every report must pass; returns human-readable failures."""
    bad = []
    total = sum(report.energy_breakdown.values())
    if abs(total - report.energy_pJ) > 1e-9 * max(1.0, report.energy_pJ):
        bad.append(f"energy breakdown sums to {total}, total is {report.energy_pJ}")
    mc = mac_count(spec)
    if not report.peak and report.macs != mc.macs:
        bad.append(f"executed {report.macs} MACs, workload has {mc.macs}")
    if report.peak and report.macs_static != mc.static:
        bad.append(f"executed {report.macs_static} static MACs, workload has {mc.static}")
    if not 0.0 <= report.adc_utilization <= 1.0:
        bad.append(f"ADC utilization {report.adc_utilization} outside [0, 1]")
    if report.mode == DataflowMode.HEMLET.value and not report.peak:
        leaked = {t for t in ("P′→IDP", "QKV→IDP") if report.nop_bytes_by_tag.get(t)}
        if leaked:
            bad.append(f"HEMLET moved bytes tagged {sorted(leaked)}")
    if report.latency_ns <= 0 or report.energy_pJ <= 0:
        bad.append("non-positive latency or energy")
    return bad
