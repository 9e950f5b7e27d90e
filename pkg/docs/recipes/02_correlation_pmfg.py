# Correlation matrix of cell series, filtered down to a planar graph.
import tempfile
from pathlib import Path

import numpy as np

from cellgraph.corr import correlation_matrix
from cellgraph.pgraph import export, is_planar, pmfg, threshold_filter, verify_certificate
from cellgraph.series import aggregate
from cellgraph.synth import default_profiles, gen_city

flows, cells, truth = gen_city(default_profiles(0.1), cells_per_scenario=5, days=7, seed=3)
cm = correlation_matrix(aggregate(flows, bin_width=3600))
print("matrix", cm.m.shape, "mean off-diagonal r =", round(float(cm.m[np.triu_indices(len(cm), 1)].mean()), 3))

g = pmfg(cm)
n = len(g.nodes)
print(f"PMFG: {n} nodes, {len(g.edges)} edges (3n-6 = {3 * n - 6})")
print("certificate checks out:", verify_certificate(g, g.certificate))

same = sum(truth[e.u] == truth[e.v] for e in g.edges)
print(f"{same} of {len(g.edges)} edges join cells of the same scenario")

# a plain threshold keeps far more edges and is usually not planar
dense = threshold_filter(cm, 0.5)
print(f"threshold 0.5: {len(dense.edges)} edges, planar = {is_planar(dense).is_planar}")

out = Path(tempfile.mkdtemp())
for fmt in ("graphml", "json", "dot"):
    (out / f"pmfg.{fmt}").write_bytes(export(g, fmt))
print("exports in", out)
