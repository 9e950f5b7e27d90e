"""Weighted graphs, planarity certificates, PMFG filtering and export.

Planarity is decided with networkx's left-right planarity test. Certificates
(a rotation system for planar graphs, a Kuratowski subgraph otherwise) are
checked by `verify_certificate`, which shares no code with networkx.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence
from xml.sax.saxutils import escape, quoteattr

import networkx as nx

from .corr import CorrelationMatrix
from .errors import SchemaError

KINDS = ("bs", "app", "user")

# DOT fill colours, indexed by community id modulo the palette size
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass(frozen=True)
class Node:
    id: str
    kind: str = "bs"
    lat: Optional[float] = None
    lon: Optional[float] = None
    size: Optional[float] = None
    community: Optional[int] = None


@dataclass(frozen=True)
class Edge:
    u: str
    v: str
    w: float


@dataclass(frozen=True)
class PlanarCertificate:
    """Planarity verdict plus a witness that can be checked independently.

    ``embedding`` maps each node to its neighbours in cyclic order and is set
    only for planar graphs; ``witness`` is the edge list of a K5 or K3,3
    subdivision and is set only for non-planar graphs.
    """

    is_planar: bool
    embedding: Optional[Mapping[str, tuple[str, ...]]] = None
    witness: Optional[tuple[tuple[str, str], ...]] = None

    def __post_init__(self):
        if self.is_planar != (self.embedding is not None) or self.is_planar == (self.witness is not None):
            raise ValueError("exactly one of embedding/witness must match is_planar")


@dataclass(frozen=True)
class WeightedGraph:
    """Simple undirected weighted graph."""

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    certificate: Optional[PlanarCertificate] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        ids = [n.id for n in self.nodes]
        known = set(ids)
        if len(known) != len(ids):
            raise ValueError("duplicate node id")
        for n in self.nodes:
            if n.kind not in KINDS:
                raise ValueError(f"unknown node kind {n.kind!r}")
        seen = set()
        for e in self.edges:
            if e.u == e.v:
                raise ValueError(f"self-loop on {e.u!r}")
            if e.u not in known or e.v not in known:
                raise ValueError(f"edge ({e.u!r}, {e.v!r}) has an unknown endpoint")
            pair = frozenset((e.u, e.v))
            if pair in seen:
                raise ValueError(f"duplicate edge ({e.u!r}, {e.v!r})")
            seen.add(pair)

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def adjacency(self) -> dict[str, dict[str, float]]:
        adj: dict[str, dict[str, float]] = {n.id: {} for n in self.nodes}
        for e in self.edges:
            adj[e.u][e.v] = e.w
            adj[e.v][e.u] = e.w
        return adj

    def degree(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.adjacency().items()}

    def has_edge(self, u: str, v: str) -> bool:
        return any({e.u, e.v} == {u, v} for e in self.edges)

    def with_edges(self, edges: Iterable[Edge]) -> "WeightedGraph":
        return WeightedGraph(self.nodes, tuple(edges))

    def with_node_attrs(self, **attrs: Mapping[str, object]) -> "WeightedGraph":
        """Return a copy with per-node attributes set, e.g. ``community={id: 0}``."""
        nodes = []
        for n in self.nodes:
            updates = {k: m[n.id] for k, m in attrs.items() if n.id in m}
            nodes.append(replace(n, **updates))
        return WeightedGraph(tuple(nodes), self.edges, self.certificate)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.node_ids)
        g.add_weighted_edges_from((e.u, e.v, e.w) for e in self.edges)
        return g


def _to_nx(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> nx.Graph:
    g = nx.Graph()
    g.add_nodes_from(nodes)
    g.add_edges_from(edges)
    return g


def planar(g: WeightedGraph) -> bool:
    """Planarity verdict only; much cheaper than :func:`is_planar` on
    non-planar graphs, which has to extract a witness."""
    return nx.check_planarity(g.to_networkx())[0]


def is_planar(g: WeightedGraph) -> PlanarCertificate:
    planar, cert = nx.check_planarity(g.to_networkx(), counterexample=True)
    if planar:
        emb = {str(k): tuple(v) for k, v in cert.get_data().items()}
        for n in g.node_ids:
            emb.setdefault(n, ())
        return PlanarCertificate(True, embedding=emb)
    witness = tuple(sorted(tuple(sorted((u, v))) for u, v in cert.edges()))
    return PlanarCertificate(False, witness=witness)


# --- independent certificate checks ----------------------------------------

def _components(nodes: Sequence[str], adj: Mapping[str, Iterable[str]]) -> list[set[str]]:
    seen: set[str] = set()
    comps = []
    for start in nodes:
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in comp:
                    comp.add(v)
                    stack.append(v)
        seen |= comp
        comps.append(comp)
    return comps


def verify_embedding(g: WeightedGraph, rotation: Mapping[str, Sequence[str]]) -> bool:
    """Check that ``rotation`` is a genus-0 rotation system of ``g``.

    Faces are traced by following, at each vertex, the successor of the
    incoming neighbour in that vertex's cyclic order; every connected
    component must then satisfy V - E + F = 2.
    """
    adj = {n: set(nbrs) for n, nbrs in g.adjacency().items()}
    if set(rotation) != set(adj):
        return False
    for n, order in rotation.items():
        if len(order) != len(set(order)) or set(order) != adj[n]:
            return False
    pos = {n: {v: i for i, v in enumerate(order)} for n, order in rotation.items()}
    face_of: dict[tuple[str, str], int] = {}
    faces = 0
    for u in rotation:
        for v in rotation[u]:
            if (u, v) in face_of:
                continue
            dart = (u, v)
            while dart not in face_of:
                face_of[dart] = faces
                a, b = dart
                order = rotation[b]
                dart = (b, order[(pos[b][a] + 1) % len(order)])
            faces += 1
    for comp in _components(list(adj), adj):
        n_edges = sum(len(adj[u]) for u in comp) // 2
        if n_edges == 0:
            continue  # isolated vertex: 1 - 0 + 1 = 2 by convention
        n_faces = len({f for (a, _), f in face_of.items() if a in comp})
        if len(comp) - n_edges + n_faces != 2:
            return False
    return True


def verify_kuratowski(g: WeightedGraph, witness: Iterable[tuple[str, str]]) -> bool:
    """Check that ``witness`` is a subgraph of ``g`` subdividing K5 or K3,3."""
    adj_g = g.adjacency()
    adj: dict[str, set[str]] = {}
    for u, v in witness:
        if u == v or v not in adj_g.get(u, {}):
            return False
        if v in adj.get(u, ()):
            return False
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    if not adj or len(_components(list(adj), adj)) != 1:
        return False
    if any(len(nb) < 2 for nb in adj.values()):
        return False
    # smooth away subdivision vertices
    changed = True
    while changed:
        changed = False
        for x in list(adj):
            if len(adj[x]) == 2 and len(adj) > 3:
                a, b = adj[x]
                if b in adj[a]:
                    return False
                adj[a].discard(x)
                adj[b].discard(x)
                adj[a].add(b)
                adj[b].add(a)
                del adj[x]
                changed = True
    degrees = sorted(len(nb) for nb in adj.values())
    if degrees == [4] * 5:
        return True
    if degrees == [3] * 6:
        start = next(iter(adj))
        side = {start: 0}
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in side:
                    side[v] = 1 - side[u]
                    stack.append(v)
                elif side[v] == side[u]:
                    return False
        return sorted(side.values()) == [0, 0, 0, 1, 1, 1]
    return False


def verify_certificate(g: WeightedGraph, cert: PlanarCertificate) -> bool:
    if cert.is_planar:
        return verify_embedding(g, cert.embedding)
    return verify_kuratowski(g, cert.witness)


# --- filtering -------------------------------------------------------------

def _ranked_pairs(m: CorrelationMatrix, ranking: str) -> list[tuple[str, str, float]]:
    if ranking not in ("value", "abs_value"):
        raise ValueError(f"unknown ranking {ranking!r}")
    ids = m.entities
    pairs = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            a, b = sorted((ids[i], ids[j]))
            w = float(m.m[i, j])
            pairs.append((a, b, w))
    if ranking == "value":
        pairs.sort(key=lambda p: (-p[2], p[0], p[1]))
    else:
        pairs.sort(key=lambda p: (-abs(p[2]), p[0], p[1]))
    return pairs


class _DisjointSet:
    def __init__(self, items: Iterable[str]):
        self.parent = {x: x for x in items}

    def find(self, x: str) -> str:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: str, b: str) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def pmfg(m: CorrelationMatrix, ranking: str = "value", kind: str = "bs") -> WeightedGraph:
    """Planar maximally filtered graph of a correlation matrix.

    Pairs are visited by decreasing correlation (``ranking="abs_value"``
    ranks by magnitude), ties broken by the lexicographic id pair. A pair is
    kept iff the graph stays planar; construction stops at 3n - 6 edges.
    Each test runs the planarity check from scratch, except for the two
    cases where planarity is guaranteed: joining two components, and graphs
    with at most 8 edges.
    """
    n = len(m.entities)
    if n < 2:
        raise ValueError("pmfg needs at least 2 entities")
    nodes = tuple(Node(e, kind) for e in sorted(m.entities))
    pairs = _ranked_pairs(m, ranking)
    if n == 2:
        a, b, w = pairs[0]
        return _certified(WeightedGraph(nodes, (Edge(a, b, w),)))

    target = 3 * n - 6
    work = nx.Graph()
    work.add_nodes_from(m.entities)
    comps = _DisjointSet(m.entities)
    kept: list[Edge] = []
    for a, b, w in pairs:
        if len(kept) == target:
            break
        work.add_edge(a, b)
        if comps.find(a) != comps.find(b) or len(kept) < 8 or nx.check_planarity(work)[0]:
            comps.union(a, b)
            kept.append(Edge(a, b, w))
        else:
            work.remove_edge(a, b)
    return _certified(WeightedGraph(nodes, tuple(kept)))


def _certified(g: WeightedGraph) -> WeightedGraph:
    cert = is_planar(g)
    if not cert.is_planar:
        raise AssertionError("filtered graph is not planar")
    return WeightedGraph(g.nodes, g.edges, cert)


def threshold_filter(m: CorrelationMatrix, theta: float, kind: str = "bs") -> WeightedGraph:
    """Keep every pair with correlation >= theta."""
    if not -1.0 <= theta <= 1.0:
        raise ValueError("theta must be in [-1, 1]")
    nodes = tuple(Node(e, kind) for e in sorted(m.entities))
    edges = [Edge(a, b, w) for a, b, w in _ranked_pairs(m, "value") if w >= theta]
    return WeightedGraph(nodes, tuple(edges))


# --- export / import --------------------------------------------------------

NODE_ATTRS = ("kind", "lat", "lon", "size", "community")


def _json_doc(g: WeightedGraph) -> dict:
    nodes = []
    for n in g.nodes:
        d = {"id": n.id, "kind": n.kind}
        for k in ("lat", "lon", "size", "community"):
            v = getattr(n, k)
            if v is not None:
                d[k] = v
        nodes.append(d)
    return {"nodes": nodes, "edges": [{"u": e.u, "v": e.v, "w": e.w} for e in g.edges]}


def _graphml(g: WeightedGraph) -> str:
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
        '  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>',
        '  <key id="kind" for="node" attr.name="kind" attr.type="string"/>',
        '  <key id="lat" for="node" attr.name="lat" attr.type="double"/>',
        '  <key id="lon" for="node" attr.name="lon" attr.type="double"/>',
        '  <key id="size" for="node" attr.name="size" attr.type="double"/>',
        '  <key id="community" for="node" attr.name="community" attr.type="int"/>',
        '  <graph id="G" edgedefault="undirected">',
    ]
    for n in g.nodes:
        out.append(f"    <node id={quoteattr(n.id)}>")
        for k in NODE_ATTRS:
            v = getattr(n, k)
            if v is not None:
                out.append(f'      <data key="{k}">{escape(str(v) if k in ("kind", "community") else repr(float(v)))}</data>')
        out.append("    </node>")
    for i, e in enumerate(g.edges):
        out.append(f'    <edge id="e{i}" source={quoteattr(e.u)} target={quoteattr(e.v)}>')
        out.append(f'      <data key="weight">{float(e.w)!r}</data>')
        out.append("    </edge>")
    out += ["  </graph>", "</graphml>", ""]
    return "\n".join(out)


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _dot(g: WeightedGraph) -> str:
    out = ["graph G {", "  node [style=filled];"]
    for n in g.nodes:
        attrs = [f"kind={_dot_id(n.kind)}"]
        for k in ("lat", "lon", "size"):
            v = getattr(n, k)
            if v is not None:
                attrs.append(f"{k}={float(v)!r}")
        if n.community is not None:
            attrs.append(f"community={n.community}")
            attrs.append(f'fillcolor="{PALETTE[n.community % len(PALETTE)]}"')
        out.append(f"  {_dot_id(n.id)} [{', '.join(attrs)}];")
    for e in g.edges:
        out.append(f"  {_dot_id(e.u)} -- {_dot_id(e.v)} [weight={float(e.w)!r}];")
    out += ["}", ""]
    return "\n".join(out)


def export(g: WeightedGraph, format: str = "json") -> bytes:
    if format == "json":
        text = json.dumps(_json_doc(g), indent=1) + "\n"
    elif format == "graphml":
        text = _graphml(g)
    elif format == "dot":
        text = _dot(g)
    else:
        raise ValueError(f"unknown export format {format!r}")
    return text.encode("utf-8")


def from_json(data: bytes | str) -> WeightedGraph:
    try:
        doc = json.loads(data)
        nodes = tuple(
            Node(d["id"], d.get("kind", "bs"), d.get("lat"), d.get("lon"), d.get("size"), d.get("community"))
            for d in doc["nodes"])
        edges = tuple(Edge(d["u"], d["v"], float(d["w"])) for d in doc["edges"])
        return WeightedGraph(nodes, edges)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"invalid graph document: {exc}") from None
