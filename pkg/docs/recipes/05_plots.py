# Plot recipes for the CSV outputs (needs matplotlib, not a package dependency).
# Run the CLI first, e.g.
#   cellgraph synth-city --seed 1 --out run/city
#   cellgraph aggregate --flows run/city/flows.csv --out run/series
#   cellgraph synth-subs --out run/subs
#   cellgraph stats concentration --totals run/subs/totals.csv --out run/conc
#   cellgraph bssn --flows run/city/flows.csv --cells run/city/cells.csv --out run/bssn
import csv
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from cellgraph.series import read_series_csv  # noqa: E402

run = Path(sys.argv[1] if len(sys.argv) > 1 else "run")

with open(run / "series" / "series.csv", "rb") as fp:
    series = read_series_csv(fp)
with open(run / "bssn" / "partition.csv") as fp:
    rows = list(csv.DictReader(fp))
community = {r["node_id"]: int(r["community_id"]) for r in rows}
label = {int(r["community_id"]): r["scenario_label"] for r in rows}

# one day of traffic per community, averaged over member cells
fig, ax = plt.subplots(figsize=(8, 4))
for c in sorted(label):
    members = [series[k].values[:24] for k in community if community[k] == c]
    ax.plot(sum(members) / len(members), label=f"{c}: {label[c]}")
ax.set_xlabel("hour")
ax.set_ylabel("bytes per cell")
ax.legend()
fig.savefig(run / "daily_profiles.png", dpi=120)

# concentration curve
with open(run / "conc" / "concentration.csv") as fp:
    pts = [(float(r["p"]), float(r["s"])) for r in csv.DictReader(fp)]
fig, ax = plt.subplots(figsize=(4, 4))
ax.plot(*zip(*pts))
ax.plot([0, 1], [0, 1], ls=":", c="grey")
ax.set_xlabel("top fraction of users")
ax.set_ylabel("share of traffic")
fig.savefig(run / "concentration.png", dpi=120)

# map of cells coloured by community
graph = json.loads((run / "bssn" / "graph.json").read_text())
pos = {n["id"]: (n["lon"], n["lat"]) for n in graph["nodes"]}
fig, ax = plt.subplots(figsize=(6, 6))
for e in graph["edges"]:
    (x0, y0), (x1, y1) = pos[e["u"]], pos[e["v"]]
    ax.plot([x0, x1], [y0, y1], c="lightgrey", lw=0.5, zorder=0)
ax.scatter([p[0] for p in pos.values()], [p[1] for p in pos.values()],
           c=[community[k] for k in pos], cmap="tab10", s=30)
fig.savefig(run / "bssn_map.png", dpi=120)
print("figures in", run)
