"""Grid sweeps over chiplet configurations, NoP bandwidths and models."""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .engine.sim import run
from .hwconfig import SystemConfig, with_label
from .metrics import STRATEGIES, SweepPoint
from .workload import get_model

CONFIG_LABELS = ("A18D9", "A32D16", "A50D25")
BANDWIDTHS = (8.0, 16.0, 32.0)
MODEL_NAMES = ("ViT-S/16", "ViT-B/16", "ViT-L/16")
ALL_RUNS = tuple((mp, md) for mp in ("layerwise", "glp") for md in ("native", "pipelined", "hemlet"))


@dataclass(frozen=True)
class GridSpec:
    labels: Sequence[str] = CONFIG_LABELS
    bandwidths: Sequence[float] = BANDWIDTHS
    models: Sequence[str] = MODEL_NAMES
    runs: Sequence[tuple[str, str]] = tuple(STRATEGIES.values())

    def jobs(self, base: SystemConfig) -> list[tuple]:
        out = []
        for label, bw, model in itertools.product(self.labels, self.bandwidths, self.models):
            cfg = with_label(base, label).replace(**{"nop.bw": float(bw)})
            out += [(model, cfg, mp, md) for mp, md in self.runs]
        return out


def _one(job: tuple) -> SweepPoint:
    model, cfg, mapping, mode = job
    return SweepPoint.of(run(get_model(model), cfg, mapping, mode))


def sweep(base: SystemConfig, grid: GridSpec = GridSpec(), jobs: int = 1,
          pool: Optional[ProcessPoolExecutor] = None) -> list[SweepPoint]:
    """Simulate every grid point. Output order is the grid order whatever ``jobs`` is."""
    work = grid.jobs(base)
    if jobs <= 1 and pool is None:
        return [_one(j) for j in work]
    if pool is not None:
        return list(pool.map(_one, work))
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_one, work))
