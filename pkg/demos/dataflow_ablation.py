"""Latency and energy of the three strategies on ViT-S/16 across bandwidths.

Run: python demos/dataflow_ablation.py
"""

from hemlet import VIT_S16, SystemConfig, breakdown_speedup, run
from hemlet.metrics import STRATEGIES

for bw in (8.0, 16.0, 32.0):
    cfg = SystemConfig().replace(**{"nop.bw": bw})
    reports = {name: run(VIT_S16, cfg, mp, md) for name, (mp, md) in STRATEGIES.items()}
    base = reports["baseline"]
    print(f"\n{bw:g} GB/s")
    for name, r in reports.items():
        print(f"  {name:13s} {r.latency_ns / 1e3:9.1f} us  x{base.latency_ns / r.latency_ns:4.2f}  "
              f"energy x{r.energy_pJ / base.energy_pJ:4.2f}  ADC util {r.adc_utilization:.2f}")
    per_cat = breakdown_speedup(base, reports["hemlet"])
    print("  ACIM busy-time speedup:", {k: round(v, 2) for k, v in per_cat.items()})
