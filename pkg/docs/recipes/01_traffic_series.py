# Flow records -> per-cell traffic series at several granularities, then the
# basic temporal statistics and the subscriber concentration curve.
import io

import numpy as np

from cellgraph.records import parse_flow_csv, write_flow_csv
from cellgraph.series import aggregate, autocorrelation, concentration, cross_correlation, top_share
from cellgraph.synth import default_profiles, gen_city, gen_subscribers

flows, cells, truth = gen_city(default_profiles(noise_sigma=0.1), cells_per_scenario=3, days=7, seed=1)
print(len(flows), "flow records from", len(cells), "cells")

# round trip through the CSV schema, the way real exports come in
buf = io.BytesIO()
write_flow_csv(flows, buf)
buf.seek(0)
flows, report = parse_flow_csv(buf)
print("parsed", report.rows_ok, "rejected", report.rows_rejected)

for width in (900, 3600, 86400):
    series = aggregate(flows, key="cell", metric="bytes_total", bin_width=width)
    one = next(iter(series.values()))
    print(f"bin {width:>5}s: {len(series)} cells x {len(one)} bins")

hourly = aggregate(flows, bin_width=3600)
cell = "cell0000"
acf = autocorrelation(hourly[cell], max_lag=48)
print(f"{cell} ({truth[cell]}): ACF(24) = {acf[24]:.3f}, ACF(12) = {acf[12]:.3f}")

# the office cells lag the residential ones by a few hours
office = next(c for c in hourly if truth[c] == "office/CBD")
lags = range(-12, 13)
best = max(lags, key=lambda k: cross_correlation(hourly[cell], hourly[office], k))
print(f"{cell} vs {office}: best lag {best} h")

# heavy-tailed per-user volumes
for alpha in (0.5, 1.0, 2.0):
    curve = concentration(gen_subscribers(10_000, alpha, seed=0))
    print(f"alpha {alpha}: top 20% carry {top_share(curve, 0.2):.1%}")

curve = concentration(gen_subscribers(10_000, 0.5, seed=0))
print("share of the top 1, 10, 100 users:", np.round(curve.s[[1, 10, 100]], 4))
