"""Community detection, modularity, partition comparison and scenario labels."""
from __future__ import annotations

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import IO, Hashable, Mapping, Optional, Union

import numpy as np

from .errors import SchemaError
from .pgraph import WeightedGraph
from .series import TimeSeries

log = logging.getLogger(__name__)

MIN_GAIN = 1e-9
DEFAULT_LABEL_THRESHOLD = 0.05


@dataclass(frozen=True)
class CommunityPartition:
    """Node -> community assignment with dense ids ``0..k-1``.

    ``modularity`` is None for partitions that did not come from a graph,
    e.g. planted ground truth. ``history`` holds the objective after each
    Louvain level.
    """

    assignment: Mapping[str, int]
    modularity: Optional[float] = None
    history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        ids = set(self.assignment.values())
        if ids != set(range(len(ids))):
            raise ValueError("community ids must be exactly 0..k-1")
        if self.modularity is not None and not -1.0 <= self.modularity <= 1.0:
            raise ValueError("modularity out of [-1, 1]")
        object.__setattr__(self, "assignment", dict(self.assignment))

    @property
    def k(self) -> int:
        return len(set(self.assignment.values()))

    def communities(self) -> dict[int, list[str]]:
        out: dict[int, list[str]] = defaultdict(list)
        for node in sorted(self.assignment):
            out[self.assignment[node]].append(node)
        return dict(sorted(out.items()))

    @classmethod
    def from_labels(cls, labels: Mapping[str, Hashable], modularity: Optional[float] = None) -> "CommunityPartition":
        """Build a partition from arbitrary labels, numbering communities by
        first appearance in sorted node order."""
        dense: dict[Hashable, int] = {}
        assignment = {n: dense.setdefault(labels[n], len(dense)) for n in sorted(labels)}
        return cls(assignment, modularity)


def _positive_edges(g: WeightedGraph) -> list[tuple[str, str, float]]:
    edges = [(e.u, e.v, e.w) for e in g.edges if e.w > 0]
    dropped = sum(1 for e in g.edges if e.w < 0)
    if dropped:
        log.warning("ignoring %d negative-weight edges", dropped)
    return edges


def modularity(g: WeightedGraph, p: Union[CommunityPartition, Mapping[str, int]], resolution: float = 1.0) -> float:
    """Weighted Newman-Girvan modularity.

    Q = sum_c [ w_c / W - resolution * (s_c / 2W)^2 ], where w_c is the weight
    inside community c, s_c the total strength of its nodes and W the total
    edge weight. Negative-weight edges are left out.
    """
    assignment = p.assignment if isinstance(p, CommunityPartition) else p
    if set(assignment) != set(g.node_ids):
        raise ValueError("partition does not cover exactly the graph's nodes")
    return _modularity(_positive_edges(g), assignment, resolution)


def _modularity(edges: list[tuple[str, str, float]], assignment: Mapping[str, int], resolution: float) -> float:
    total = sum(w for _, _, w in edges)
    if total <= 0:
        raise ValueError("modularity is undefined on a graph without positive-weight edges")
    inside: dict[int, float] = defaultdict(float)
    strength: dict[int, float] = defaultdict(float)
    for u, v, w in edges:
        cu, cv = assignment[u], assignment[v]
        strength[cu] += w
        strength[cv] += w
        if cu == cv:
            inside[cu] += w
    q = 0.0
    for c in sorted(strength):
        q += inside[c] / total - resolution * (strength[c] / (2 * total)) ** 2
    return q


def _one_level(adj: list[dict[int, float]], loops: np.ndarray, resolution: float,
               rng: np.random.Generator) -> tuple[np.ndarray, bool]:
    """Local moving phase. Returns community per node and whether anything moved."""
    n = len(adj)
    k = loops + np.array([sum(nb.values()) for nb in adj])
    m2 = k.sum()
    comm = np.arange(n)
    tot = k.copy()
    order = rng.permutation(n)
    threshold = MIN_GAIN * m2 / 2
    moved_any = False
    improved = True
    while improved:
        improved = False
        for i in order:
            own = comm[i]
            links: dict[int, float] = defaultdict(float)
            for j, w in adj[i].items():
                links[comm[j]] += w
            tot[own] -= k[i]
            ratio = resolution * k[i] / m2
            own_gain = links.get(own, 0.0) - tot[own] * ratio
            best, best_gain = own, None
            for c in sorted(links):
                if c == own:
                    continue
                gain = links[c] - tot[c] * ratio
                if best_gain is None or gain > best_gain:
                    best, best_gain = c, gain
            if best_gain is not None and best_gain - own_gain > threshold:
                comm[i] = best
                improved = moved_any = True
            tot[comm[i]] += k[i]
    _, dense = np.unique(comm, return_inverse=True)
    # renumber by first appearance so aggregation order is stable
    first: dict[int, int] = {}
    relabel = np.array([first.setdefault(c, len(first)) for c in dense])
    return relabel, moved_any


def _aggregate(adj: list[dict[int, float]], loops: np.ndarray, comm: np.ndarray):
    nc = int(comm.max()) + 1
    new_adj: list[dict[int, float]] = [defaultdict(float) for _ in range(nc)]
    new_loops = np.zeros(nc)
    for i, nb in enumerate(adj):
        ci = comm[i]
        new_loops[ci] += loops[i]
        for j, w in nb.items():
            cj = comm[j]
            if ci == cj:
                new_loops[ci] += w  # each internal edge is seen from both ends
            else:
                new_adj[ci][cj] += w
    return [dict(sorted(d.items())) for d in new_adj], new_loops


def louvain(g: WeightedGraph, resolution: float = 1.0, seed: int = 0) -> CommunityPartition:
    """Louvain community detection.

    Nodes are visited in a seeded random order; a node joins the neighbouring
    community with the largest modularity gain (smallest id on ties) when
    that gain exceeds 1e-9. Levels repeat until a level moves nothing.
    Negative-weight edges are ignored.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    nodes = sorted(g.node_ids)
    index = {n: i for i, n in enumerate(nodes)}
    edges = _positive_edges(g)
    if not edges:
        raise ValueError("louvain needs at least one positive-weight edge")
    adj: list[dict[int, float]] = [dict() for _ in nodes]
    for u, v, w in edges:
        adj[index[u]][index[v]] = w
        adj[index[v]][index[u]] = w
    adj = [dict(sorted(d.items())) for d in adj]
    loops = np.zeros(len(nodes))

    rng = np.random.default_rng(seed)
    membership = np.arange(len(nodes))
    history = [_modularity(edges, {n: i for i, n in enumerate(nodes)}, resolution)]
    while True:
        comm, moved = _one_level(adj, loops, resolution, rng)
        if not moved:
            break
        membership = comm[membership]
        adj, loops = _aggregate(adj, loops, comm)
        history.append(_modularity(edges, {n: int(membership[i]) for i, n in enumerate(nodes)}, resolution))
        if len(adj) == 1:
            break
    for a, b in zip(history, history[1:]):
        if b < a - 1e-12:
            raise AssertionError(f"modularity decreased across levels: {history}")
    labels = {n: int(membership[i]) for i, n in enumerate(nodes)}
    part = CommunityPartition.from_labels(labels)
    return CommunityPartition(part.assignment, _modularity(edges, part.assignment, 1.0), tuple(history))


def adjusted_rand_index(p1: Union[CommunityPartition, Mapping[str, Hashable]],
                        p2: Union[CommunityPartition, Mapping[str, Hashable]]) -> float:
    """Adjusted Rand index between two partitions of the same node set."""
    a = p1.assignment if isinstance(p1, CommunityPartition) else p1
    b = p2.assignment if isinstance(p2, CommunityPartition) else p2
    if set(a) != set(b):
        raise ValueError("partitions cover different node sets")
    n = len(a)
    if n < 2:
        return 1.0
    table: dict[tuple, int] = defaultdict(int)
    rows: dict[Hashable, int] = defaultdict(int)
    cols: dict[Hashable, int] = defaultdict(int)
    for node in a:
        table[a[node], b[node]] += 1
        rows[a[node]] += 1
        cols[b[node]] += 1

    def pairs(c: int) -> int:
        return c * (c - 1) // 2

    index = sum(pairs(c) for c in table.values())
    sum_a = sum(pairs(c) for c in rows.values())
    sum_b = sum(pairs(c) for c in cols.values())
    total = pairs(n)
    # integer form of (index - expected) / (max - expected)
    num = 2 * (total * index - sum_a * sum_b)
    den = total * (sum_a + sum_b) - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return num / den


# --- scenario labelling ------------------------------------------------------

@dataclass(frozen=True)
class ScenarioLabel:
    label: str
    distance: float
    low_confidence: bool


def read_profiles_csv(fp: IO[bytes]) -> dict[str, np.ndarray]:
    """Read ``label,h0..h23`` rows; each profile is renormalised to unit sum."""
    lines = [raw.decode("utf-8").rstrip("\r\n") for raw in fp]
    lines = [ln.split(",") for ln in lines if ln]
    if not lines or lines[0] != ["label"] + [f"h{i}" for i in range(24)]:
        raise SchemaError("profile CSV must have header label,h0..h23")
    out = {}
    for row in lines[1:]:
        if len(row) != 25:
            raise SchemaError(f"profile {row[0]!r} must have 24 hourly values")
        v = np.array([float(x) for x in row[1:]])
        if np.any(v < 0) or v.sum() <= 0:
            raise SchemaError(f"profile {row[0]!r} must be non-negative with positive sum")
        out[row[0]] = v / v.sum()
    return out


def reference_profiles(path: Union[str, Path, None] = None) -> dict[str, np.ndarray]:
    """Hourly reference shapes, from ``path`` or the bundled data file."""
    if path is None:
        with resources.files("cellgraph").joinpath("data/scenario_profiles.csv").open("rb") as fp:
            return read_profiles_csv(fp)
    with open(path, "rb") as fp:
        return read_profiles_csv(fp)


def daily_profile(ts: TimeSeries) -> np.ndarray:
    """Fold a series onto the 24 hours of the (UTC) day, normalised to unit sum."""
    if ts.bin_width > 3600 or 3600 % ts.bin_width:
        raise ValueError("bin width must divide one hour")
    if len(ts) * ts.bin_width < 86400:
        raise ValueError(f"series {ts.entity_id!r} covers less than one day")
    hours = (ts.times() % 86400) // 3600
    prof = np.bincount(hours, weights=ts.values, minlength=24)
    s = prof.sum()
    return prof / s if s > 0 else np.full(24, 1 / 24)


def label_scenarios(
    p: CommunityPartition,
    series: Mapping[str, TimeSeries],
    references: Optional[Mapping[str, np.ndarray]] = None,
    threshold: float = DEFAULT_LABEL_THRESHOLD,
) -> dict[int, ScenarioLabel]:
    """Name each community after the nearest reference daily profile.

    Member profiles are averaged; the label with the smallest Euclidean
    distance wins. Distances above ``threshold`` set ``low_confidence``.
    """
    refs = reference_profiles() if references is None else references
    if not refs:
        raise ValueError("no reference profiles")
    out = {}
    for c, members in p.communities().items():
        missing = [m for m in members if m not in series]
        if missing:
            raise ValueError(f"no series for community members {missing[:3]}")
        prof = np.mean([daily_profile(series[m]) for m in members], axis=0)
        prof = prof / prof.sum()
        dists = {name: float(np.linalg.norm(prof - ref)) for name, ref in refs.items()}
        best = min(dists, key=lambda name: dists[name])
        out[c] = ScenarioLabel(best, dists[best], dists[best] > threshold)
    return out


def write_partition_csv(p: CommunityPartition, fp: IO[bytes],
                        labels: Optional[Mapping[int, ScenarioLabel]] = None) -> None:
    fp.write(b"node_id,community_id,scenario_label\n")
    for node in sorted(p.assignment):
        c = p.assignment[node]
        name = labels[c].label if labels and c in labels else ""
        fp.write(f"{node},{c},{name}\n".encode("utf-8"))


def read_partition_csv(fp: IO[bytes]) -> CommunityPartition:
    lines = [raw.decode("utf-8").rstrip("\r\n") for raw in fp]
    lines = [ln.split(",") for ln in lines if ln]
    if not lines or lines[0] != ["node_id", "community_id", "scenario_label"]:
        raise SchemaError("partition CSV must have header node_id,community_id,scenario_label")
    try:
        return CommunityPartition({r[0]: int(r[1]) for r in lines[1:]})
    except (IndexError, ValueError) as exc:
        raise SchemaError(f"invalid partition row: {exc}") from None
