# Louvain on the planar graph, checked against the planted scenarios, then
# each community named after the closest reference daily profile.
from cellgraph.community import adjusted_rand_index, label_scenarios, louvain, modularity, reference_profiles
from cellgraph.corr import correlation_matrix
from cellgraph.pgraph import pmfg
from cellgraph.series import aggregate
from cellgraph.synth import default_profiles, gen_city

flows, cells, truth = gen_city(default_profiles(0.1), cells_per_scenario=10, days=7, seed=5)
series = aggregate(flows, bin_width=3600)
g = pmfg(correlation_matrix(series))

for seed in range(3):
    p = louvain(g, seed=seed)
    print(f"seed {seed}: k={p.k} Q={p.modularity:.4f} levels={len(p.history) - 1} "
          f"ARI={adjusted_rand_index(p, truth):.3f}")

p = louvain(g)
print("Q recomputed:", round(modularity(g, p), 6))
for gamma in (0.5, 1.0, 2.0):
    print(f"resolution {gamma}: {louvain(g, resolution=gamma).k} communities")

labels = label_scenarios(p, series)
for c, members in p.communities().items():
    lab = labels[c]
    flag = " (low confidence)" if lab.low_confidence else ""
    print(f"community {c}: {len(members):>2} cells -> {lab.label:<17} d={lab.distance:.4f}{flag}")

print("reference hours of peak traffic:")
for name, prof in reference_profiles().items():
    print(f"  {name:<17} {int(prof.argmax()):02d}:00")
