"""Figures of merit, normalization and tabular output for simulation sweeps."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence, Union

from .engine.sim import SimReport
from .workload import ViTModelSpec, mac_count

CSV_COLUMNS = ("model", "config", "bw_GBps", "mapping", "mode", "latency_ns", "energy_pJ",
               "tops", "tops_per_w", "sa_ns", "buffer_ns", "ic_ns", "adc_util")

# Reference throughput and efficiency for ViT-L/16 on A32D16 at 32 GB/s.
# Shown next to our numbers for a human to compare; never asserted.
REFERENCE_ANCHOR = {"model": "ViT-L/16", "config": "A32D16", "bw_GBps": 32.0,
                    "tops": 9.24, "tops_per_w": 4.98}

# Ablation strategies as (mapping, dataflow mode).
STRATEGIES = {
    "baseline": ("layerwise", "native"),
    "baseline+glp": ("glp", "native"),
    "hemlet": ("glp", "hemlet"),
}


def _ops(report: SimReport, spec: Optional[ViTModelSpec]) -> int:
    return mac_count(spec).ops if spec is not None else report.ops


def tops(report: SimReport, spec: Optional[ViTModelSpec] = None) -> float:
    """Tera-operations per second: ops / latency.

    An op is one multiply or one add of a MAC, or one processed element of
    a vector operation.
    """
    return _ops(report, spec) / report.latency_ns / 1e3


def tops_per_watt(report: SimReport, spec: Optional[ViTModelSpec] = None) -> float:
    # 1 op/pJ = 1e12 ops/J = 1 TOPS/W
    return _ops(report, spec) / report.energy_pJ


@dataclass(frozen=True)
class SweepPoint:
    config: str
    bw_GBps: float
    model: str
    mapping: str
    mode: str
    report: SimReport

    def __post_init__(self):
        r = self.report
        got = (r.config, r.bw_GBps, r.model, r.mapping, r.mode)
        want = (self.config, self.bw_GBps, self.model, self.mapping, self.mode)
        if got != want:
            raise ValueError(f"sweep point {want} carries a report for {got}")

    @classmethod
    def of(cls, report: SimReport) -> "SweepPoint":
        return cls(report.config, report.bw_GBps, report.model, report.mapping, report.mode, report)

    @property
    def key(self) -> tuple:
        return (self.model, self.config, self.bw_GBps, self.mapping, self.mode)

    def row(self) -> dict:
        r = self.report
        return {
            "model": self.model, "config": self.config, "bw_GBps": self.bw_GBps,
            "mapping": self.mapping, "mode": self.mode,
            "latency_ns": r.latency_ns, "energy_pJ": r.energy_pJ,
            "tops": tops(r), "tops_per_w": tops_per_watt(r),
            "sa_ns": r.acim_busy_ns["SA"], "buffer_ns": r.acim_busy_ns["Buffer"],
            "ic_ns": r.acim_busy_ns["IC"], "adc_util": r.adc_utilization,
        }


Point = Union[SweepPoint, dict]
Selector = Union[Callable[[Point], bool], dict]


def _field(p: Point, name: str):
    if isinstance(p, dict):
        return p[name]
    if name in ("latency_ns", "energy_pJ"):
        return getattr(p.report, name)
    return getattr(p, name)


def _match(sel: Selector) -> Callable[[Point], bool]:
    if callable(sel):
        return sel
    return lambda p: all(_field(p, k) == v for k, v in sel.items())


def normalize(points: Sequence[Point], baseline: Optional[Selector] = None,
              group_by: Sequence[str] = ("model",)) -> list[dict]:
    """Latency and energy of every point relative to its group's baseline.

    Points (SweepPoints or CSV row dicts) are grouped by the ``group_by``
    fields. Each group must contain exactly one point matching ``baseline``,
    a predicate or a dict of field values. The default baseline is
    layer-wise mapping with the native dataflow at the first config and
    bandwidth seen in the group.
    """
    groups: dict[tuple, list[Point]] = {}
    for p in points:
        groups.setdefault(tuple(_field(p, f) for f in group_by), []).append(p)
    out = []
    for key, members in groups.items():
        if baseline is None:
            first = members[0]
            pick = _match({"mapping": "layerwise", "mode": "native",
                           "config": _field(first, "config"), "bw_GBps": _field(first, "bw_GBps")})
        else:
            pick = _match(baseline)
        base = [p for p in members if pick(p)]
        if len(base) != 1:
            raise ValueError(f"group {key}: {len(base)} baseline points, need exactly one")
        b_lat, b_en = _field(base[0], "latency_ns"), _field(base[0], "energy_pJ")
        for p in members:
            row = {f: _field(p, f) for f in ("model", "config", "bw_GBps", "mapping", "mode")}
            row["norm_latency"] = _field(p, "latency_ns") / b_lat
            row["norm_energy"] = _field(p, "energy_pJ") / b_en
            out.append(row)
    return out


def _fmt(v) -> str:
    return f"{v:.9g}" if isinstance(v, float) else str(v)


def to_csv(points: Iterable[SweepPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for p in points:
        row = p.row()
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    for r in rows:
        for c in CSV_COLUMNS[5:] + ("bw_GBps",):
            r[c] = float(r[c])
    return rows


def to_json(points: Iterable[SweepPoint]) -> str:
    return json.dumps([p.report.to_dict() for p in points], indent=1, sort_keys=True)


def to_dat(rows: Sequence[dict], value: str = "norm_latency") -> str:
    """gnuplot-friendly blocks: one per (model, config), columns bw then one per strategy."""
    names = {v: k for k, v in STRATEGIES.items()}
    order = list(STRATEGIES.values())
    strategies = sorted({(r["mapping"], r["mode"]) for r in rows},
                        key=lambda s: (order.index(s) if s in names else len(order), s))
    labels = [names.get(s, f"{s[0]}/{s[1]}") for s in strategies]
    lines = []
    blocks: dict[tuple, dict] = {}
    for r in rows:
        blocks.setdefault((r["model"], r["config"]), {}).setdefault(r["bw_GBps"], {})[(r["mapping"], r["mode"])] = r[value]
    for (model, cfg), by_bw in blocks.items():
        lines.append(f"# {model} {cfg} {value}")
        lines.append("# bw_GBps " + " ".join(labels))
        for bw in sorted(by_bw):
            vals = [_fmt(by_bw[bw].get(s, float("nan"))) for s in strategies]
            lines.append(f"{_fmt(bw)} " + " ".join(vals))
        lines.append("")
        lines.append("")
    return "\n".join(lines)
