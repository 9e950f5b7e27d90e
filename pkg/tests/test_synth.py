import io

import networkx as nx
import numpy as np
import pytest

from cellgraph.corr import correlation_matrix
from cellgraph.errors import SchemaError
from cellgraph.records import write_flow_csv
from cellgraph.series import aggregate, concentration, top_share
from cellgraph.synth import (
    DEFAULT_T0,
    ScenarioProfile,
    default_profiles,
    gen_app_traffic,
    gen_calls,
    gen_city,
    gen_subscribers,
    read_truth_csv,
    write_truth_csv,
)


def flow_bytes(flows):
    buf = io.BytesIO()
    write_flow_csv(flows, buf)
    return buf.getvalue()


def test_city_deterministic_per_seed():
    a = gen_city(default_profiles(0.1), 2, 2, 3600, seed=7)
    b = gen_city(default_profiles(0.1), 2, 2, 3600, seed=7)
    c = gen_city(default_profiles(0.1), 2, 2, 3600, seed=8)
    assert flow_bytes(a[0]) == flow_bytes(b[0]) and a[1:] == b[1:]
    assert flow_bytes(a[0]) != flow_bytes(c[0])


def test_city_shape_and_truth():
    flows, cells, truth = gen_city(default_profiles(0.1), 3, 2, 900, seed=1)
    assert len(cells) == 12 and len(flows) == 12 * 2 * 96
    assert sorted(truth) == [c.cell_id for c in cells]
    assert sorted(set(truth.values())) == sorted(p.label for p in default_profiles())
    assert all(f.t_start % 900 == 0 and f.t_end - f.t_start == 900 for f in flows)
    assert min(f.t_start for f in flows) == DEFAULT_T0


def test_zero_noise_same_scenario_exactly_correlated():
    profiles = default_profiles(0.0)[:2]
    flows, _, truth = gen_city(profiles, 2, 3, 3600, seed=0)
    cm = correlation_matrix(aggregate(flows))
    for a in cm.entities:
        for b in cm.entities:
            if truth[a] == truth[b]:
                assert cm[a, b] == pytest.approx(1.0, abs=1e-12)
            else:
                assert cm[a, b] < 1.0


def test_city_scenarios_cluster_spatially():
    _, cells, truth = gen_city(default_profiles(), 10, 1, 3600, seed=2)
    centre = {}
    for c in cells:
        centre.setdefault(truth[c.cell_id], []).append((c.lat, c.lon))
    means = {k: np.mean(v, axis=0) for k, v in centre.items()}
    for c in cells:
        own = np.linalg.norm(np.array([c.lat, c.lon]) - means[truth[c.cell_id]])
        others = [np.linalg.norm(np.array([c.lat, c.lon]) - m) for k, m in means.items() if k != truth[c.cell_id]]
        assert own < min(others)


def test_invalid_profiles_and_params():
    with pytest.raises(ValueError):
        ScenarioProfile("x", (1.0,) * 24, 1.0, 0.1)
    with pytest.raises(ValueError):
        ScenarioProfile("x", (1 / 24,) * 24, 0.0, 0.1)
    with pytest.raises(ValueError):
        ScenarioProfile("x", (1 / 24,) * 24, 1.0, -0.1)
    with pytest.raises(ValueError):
        gen_city(default_profiles(), 1, 1, 7000)
    with pytest.raises(ValueError):
        gen_city(default_profiles(), 0, 1)
    with pytest.raises(ValueError):
        gen_city([], 1, 1)


def test_app_traffic_follows_shape():
    day = np.zeros(24)
    day[8:18] = 1
    night = 1 - day
    flows = gen_app_traffic({"day": day, "night": night}, 3, noise_sigma=0.0)
    s = aggregate(flows, key="app")
    assert correlation_matrix(s)["day", "night"] == pytest.approx(-1.0, abs=1e-12)


def test_subscribers_single_user():
    totals = gen_subscribers(1, 3.0, seed=4)
    curve = concentration(totals)
    # the one user is the whole first (and only) step of the curve
    assert curve.points == [(0.0, 0.0), (1.0, 1.0)]
    assert curve.entities == ("u000000",)


def test_subscribers_near_uniform_for_large_alpha():
    assert abs(top_share(concentration(gen_subscribers(10_000, 100.0, seed=0)), 0.2) - 0.2) <= 0.05


def test_subscribers_heavy_tail():
    assert top_share(concentration(gen_subscribers(10_000, 0.5, seed=0)), 0.2) >= 0.99


def test_subscriber_share_monotone_in_alpha():
    grid = [0.3, 0.5, 0.8, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 50.0]
    shares = [top_share(concentration(gen_subscribers(10_000, a, seed=3)), 0.2) for a in grid]
    assert all(b <= a for a, b in zip(shares, shares[1:]))


def test_subscribers_deterministic_and_validated():
    assert gen_subscribers(50, 1.2, seed=9) == gen_subscribers(50, 1.2, seed=9)
    assert all(v >= 1.0 for v in gen_subscribers(500, 1.2, seed=9).values())
    with pytest.raises(ValueError):
        gen_subscribers(10, 0.0)
    with pytest.raises(ValueError):
        gen_subscribers(0, 1.0)


def call_graph(calls):
    g = nx.Graph()
    g.add_edges_from((c.caller_id, c.callee_id) for c in calls)
    return g


def test_calls_without_cross_block_edges():
    calls, block = gen_calls(6, 4, 0.9, 0.0, seed=5)
    g = call_graph(calls)
    g.add_nodes_from(block)
    assert nx.number_connected_components(g) == 4
    for comp in nx.connected_components(g):
        assert len({block[u] for u in comp}) == 1


def test_calls_two_triangles():
    calls, block = gen_calls(3, 2, 1.0, 0.0, seed=0)
    g = call_graph(calls)
    assert len(calls) == 6
    assert sorted(sorted(c) for c in nx.connected_components(g)) == [["u0000", "u0001", "u0002"],
                                                                     ["u0003", "u0004", "u0005"]]


def test_calls_deterministic_and_validated():
    assert gen_calls(5, 3, 0.7, 0.1, seed=2) == gen_calls(5, 3, 0.7, 0.1, seed=2)
    for bad in [(5, 3, 0.1, 0.1), (5, 3, 1.2, 0.1), (5, 3, 0.5, -0.1), (0, 3, 0.5, 0.1)]:
        with pytest.raises(ValueError):
            gen_calls(*bad)


def test_truth_csv_round_trip():
    buf = io.BytesIO()
    write_truth_csv({"b": "office/CBD", "a": 2}, buf)
    assert buf.getvalue() == b"entity_id,label\na,2\nb,office/CBD\n"
    buf.seek(0)
    assert read_truth_csv(buf) == {"a": "2", "b": "office/CBD"}
    with pytest.raises(SchemaError):
        read_truth_csv(io.BytesIO(b"id,x\n"))
