"""Command-line entry point: ``hemlet validate|map|run|sweep|report``.

Exit codes: 0 ok, 1 configuration error, 2 capacity or placement error,
3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import metrics
from .engine.sim import (DataflowMode, SimulationError, invariant_violations,
                         resolve_acim_chiplets, run, write_event_log)
from .glp import MappingError, make_plan
from .hwconfig import ConfigError, SystemConfig, load_config, validate, with_label
from .placement import mapping_stats, place
from .sweep import ALL_RUNS, BANDWIDTHS, CONFIG_LABELS, MODEL_NAMES, GridSpec, sweep
from .workload import VIT_B16, ViTModelSpec, WorkloadError, get_model

EXIT_OK, EXIT_CONFIG, EXIT_PLACEMENT, EXIT_INVARIANT = 0, 1, 2, 3


class InvariantFailure(RuntimeError):
    pass


@dataclass
class RunManifest:
    config: Optional[str]
    model: Optional[str]
    mapping: str = "glp"
    mode: str = "hemlet"
    out: Path = Path("hemlet-out")
    seed: int = 42
    peak: bool = False
    event_log: bool = False
    link_contention: bool = False
    chiplets: Optional[str] = None
    bw: Optional[float] = None
    group_size: Optional[int] = None
    extra: dict = field(default_factory=dict)

    def resolve(self) -> tuple[SystemConfig, ViTModelSpec]:
        config, model = load_config(self.config)
        if self.chiplets:
            config = with_label(config, self.chiplets)
        changes = {}
        if self.bw is not None:
            changes["nop.bw"] = float(self.bw)
        if self.link_contention:
            changes["nop.link_contention"] = True
        if self.group_size is not None:
            changes["acim.group_size"] = self.group_size
        if changes:
            config = config.replace(**changes)
        spec = get_model(self.model) if self.model else (model or VIT_B16)
        diags = validate(config, spec)
        if diags:
            raise ConfigError(diags)
        return config, spec

    def to_dict(self) -> dict:
        return {"config": self.config, "model": self.model, "mapping": self.mapping,
                "mode": self.mode, "out": str(self.out), "seed": self.seed,
                "peak": self.peak, "event_log": self.event_log,
                "link_contention": self.link_contention, "chiplets": self.chiplets,
                "bw": self.bw, "group_size": self.group_size, **self.extra}


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _metadata(m: RunManifest, command: str) -> None:
    # wall-clock data lives here so primary outputs stay byte-identical
    meta = {"command": command, "manifest": m.to_dict(),
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    _write(m.out / "metadata.json", json.dumps(meta, indent=1, sort_keys=True) + "\n")


def cmd_validate(m: RunManifest) -> int:
    config, spec = load_config(m.config)
    if m.model:
        spec = get_model(m.model)
    diags = validate(config, spec or VIT_B16)
    for d in diags:
        print(f"error: {d}", file=sys.stderr)
    if diags:
        return EXIT_CONFIG
    print(f"ok: {config.label} with {(spec or VIT_B16).name}")
    return EXIT_OK


def cmd_map(m: RunManifest) -> int:
    config, spec = m.resolve()
    config = resolve_acim_chiplets(spec, config)
    plan = make_plan(spec, config.acim.group_size, m.mapping)
    mapping = place(plan, spec, config)
    stats = mapping_stats(mapping)
    _write(m.out / "layerset.json", json.dumps(plan.to_dict(), indent=1) + "\n")
    _write(m.out / "mapping.json", mapping.to_json() + "\n")
    _write(m.out / "mapping_stats.tsv", stats.table() + "\n")
    _metadata(m, "map")
    print(json.dumps(plan.stage_counts))
    print(f"mean serialization degree {stats.mean_degree:.3f}, "
          f"{stats.cells_wasted} of {stats.cells_allocated} allocated cells unused")
    return EXIT_OK


def cmd_run(m: RunManifest) -> int:
    config, spec = m.resolve()
    report = run(spec, config, m.mapping, m.mode, peak=m.peak, event_log=m.event_log)
    bad = invariant_violations(report, spec)
    _write(m.out / "report.json", report.to_json() + "\n")
    _write(m.out / "report.csv", metrics.to_csv([metrics.SweepPoint.of(report)]))
    if m.event_log:
        write_event_log(report, m.out / "events.jsonl")
    _metadata(m, "run")
    print(f"{spec.name} {report.config} {report.bw_GBps:g} GB/s {m.mapping}/{m.mode}: "
          f"{report.latency_ns / 1e6:.4f} ms, {report.energy_pJ / 1e9:.4f} mJ, "
          f"{report.tops:.3f} TOPS, {report.tops_per_w:.3f} TOPS/W")
    if bad:
        raise InvariantFailure("; ".join(bad))
    return EXIT_OK


def _grid(m: RunManifest) -> GridSpec:
    x = m.extra
    return GridSpec(labels=x.get("configs") or CONFIG_LABELS,
                    bandwidths=x.get("bws") or BANDWIDTHS,
                    models=x.get("models") or MODEL_NAMES,
                    runs=ALL_RUNS if x.get("all_modes") else tuple(metrics.STRATEGIES.values()))


def cmd_sweep(m: RunManifest) -> int:
    config, _ = m.resolve()
    points = sweep(config, _grid(m), jobs=m.extra.get("jobs", 1))
    bad = [f"{p.key}: {msg}" for p in points
           for msg in invariant_violations(p.report, get_model(p.model))]
    rows = metrics.normalize(points, group_by=("model", "config", "bw_GBps"))
    _write(m.out / "sweep.csv", metrics.to_csv(points))
    _write(m.out / "sweep.json", metrics.to_json(points) + "\n")
    _write(m.out / "latency.dat", metrics.to_dat(rows, "norm_latency"))
    _write(m.out / "energy.dat", metrics.to_dat(rows, "norm_energy"))
    _metadata(m, "sweep")
    print(f"{len(points)} runs written to {m.out}")
    if bad:
        raise InvariantFailure("; ".join(bad[:5]))
    return EXIT_OK


def _speedup_table(rows: list[dict]) -> list[str]:
    lines = ["| model | config | bw GB/s | strategy | norm. latency | norm. energy | speedup |",
             "|---|---|---|---|---|---|---|"]
    names = {v: k for k, v in metrics.STRATEGIES.items()}
    for r in rows:
        strat = names.get((r["mapping"], r["mode"]), f"{r['mapping']}/{r['mode']}")
        lines.append(f"| {r['model']} | {r['config']} | {r['bw_GBps']:g} | {strat} | "
                     f"{r['norm_latency']:.3f} | {r['norm_energy']:.3f} | {1 / r['norm_latency']:.2f}x |")
    return lines


def cmd_report(m: RunManifest) -> int:
    config, _ = m.resolve()
    out = ["# Simulation report", ""]
    csv_path = m.out / "sweep.csv"
    if csv_path.exists():
        rows = metrics.read_csv(csv_path.read_text(encoding="utf-8"))
        norm = metrics.normalize(rows, group_by=("model", "config", "bw_GBps"))
        out += ["## Ablation (normalized to layer-wise mapping, native dataflow)", ""]
        out += _speedup_table(norm) + [""]
    else:
        out += [f"No sweep results at {csv_path}; run `hemlet sweep` first for the ablation table.", ""]
    a = metrics.REFERENCE_ANCHOR
    spec = get_model(a["model"])
    cfg = with_label(config, a["config"]).replace(**{"nop.bw": a["bw_GBps"]})
    rep = run(spec, cfg, "glp", DataflowMode.HEMLET)
    out += ["## Throughput and efficiency", "",
            f"{a['model']} on {a['config']} at {a['bw_GBps']:g} GB/s, GLP mapping, optimized dataflow.",
            "Reference figures are listed for comparison only. The constants in the",
            "reference config are uncalibrated, so no agreement is expected.", "",
            "| metric | simulated | reference |", "|---|---|---|",
            f"| TOPS | {metrics.tops(rep, spec):.3f} | {a['tops']} |",
            f"| TOPS/W | {metrics.tops_per_watt(rep, spec):.3f} | {a['tops_per_w']} |", ""]
    _write(m.out / "report.md", "\n".join(out))
    _metadata(m, "report")
    print("\n".join(out[-6:]))
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "map": cmd_map, "run": cmd_run,
            "sweep": cmd_sweep, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hemlet", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="TOML or JSON config (default: $HEMLET_REF_CONFIG or the bundled reference)")
        sp.add_argument("--model", help="model name, e.g. ViT-B/16 or vit-l")
        sp.add_argument("--out", default="hemlet-out", help="output directory")
        sp.add_argument("--seed", type=int, default=42)
        sp.add_argument("--chiplets", help="chiplet size label such as A32D16")
        sp.add_argument("--bw", type=float, help="NoP bandwidth in GB/s")
        sp.add_argument("--group-size", type=int, help="columns per ADC group")
        sp.add_argument("--link-contention", action="store_true",
                        help="serialize transfers that share a mesh link")

    sp = sub.add_parser("validate", help="check a config and report diagnostics")
    common(sp)
    sp = sub.add_parser("map", help="build LayerSets and the physical mapping")
    common(sp)
    sp.add_argument("--mapping", choices=("glp", "layerwise"), default="glp")
    sp = sub.add_parser("run", help="simulate one inference")
    common(sp)
    sp.add_argument("--mapping", choices=("glp", "layerwise"), default="glp")
    sp.add_argument("--mode", choices=[x.value for x in DataflowMode], default="hemlet")
    sp.add_argument("--peak", action="store_true", help="ACIM steps only, inputs preloaded")
    sp.add_argument("--event-log", action="store_true", help="write events.jsonl")
    sp = sub.add_parser("sweep", help="configs x bandwidths x models grid")
    common(sp)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--configs", nargs="+")
    sp.add_argument("--bws", nargs="+", type=float)
    sp.add_argument("--models", nargs="+")
    sp.add_argument("--all-modes", action="store_true",
                    help="run every mapping x dataflow pair, not only the three ablation strategies")
    sp = sub.add_parser("report", help="summarize a sweep and compare throughput figures")
    common(sp)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    extra = {k: getattr(args, k) for k in ("jobs", "configs", "bws", "models", "all_modes")
             if hasattr(args, k)}
    m = RunManifest(config=args.config, model=args.model,
                    mapping=getattr(args, "mapping", "glp"), mode=getattr(args, "mode", "hemlet"),
                    out=Path(args.out), seed=args.seed, peak=getattr(args, "peak", False),
                    event_log=getattr(args, "event_log", False),
                    link_contention=args.link_contention, chiplets=args.chiplets, bw=args.bw,
                    group_size=args.group_size, extra=extra)
    try:
        return COMMANDS[args.command](m)
    except (ConfigError, WorkloadError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MappingError, SimulationError) as exc:
        print(f"placement error: {exc}", file=sys.stderr)
        return EXIT_PLACEMENT
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
