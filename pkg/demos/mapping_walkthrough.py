"""Compare layer-wise and GLP placement of ViT-B/16 on the reference config.

Run: python demos/mapping_walkthrough.py
"""

import numpy as np

from hemlet import VIT_B16, interleave, load_config, make_plan, mapping_stats, place

cfg, _model = load_config()
M = cfg.acim.group_size

# Three 2x3 toy matrices: column j of matrix i lands at position j*3 + i.
toy = [np.full((2, 3), i) for i in range(3)]
print("interleaved toy row:", interleave(toy)[0].tolist())

for kind in ("layerwise", "glp"):
    mapping = place(make_plan(VIT_B16, M, kind), VIT_B16, cfg)
    stats = mapping_stats(mapping)
    print(f"\n{kind}: {mapping.used_subarrays} subarrays, {mapping.n_acim_chiplets} ACIM chiplets, "
          f"mean serialization degree {stats.mean_degree:.2f}, stages {stats.stage_counts}")
    for row in stats.table().splitlines()[:5]:
        print("   ", row)
