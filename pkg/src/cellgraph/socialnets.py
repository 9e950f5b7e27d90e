"""End-to-end builders for base-station, app and user social networks."""
from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from dataclasses import asdict, dataclass, fields
from typing import Any, Mapping, Optional, Sequence

from .community import CommunityPartition, ScenarioLabel, label_scenarios, louvain
from .corr import correlation_matrix
from .errors import CellgraphError
from .pgraph import Edge, Node, WeightedGraph, pmfg
from .records import CallRecord, CellInfo, FlowRecord
from .series import METRICS, TimeSeries, aggregate

log = logging.getLogger(__name__)


class InsufficientDataError(CellgraphError, ValueError):
    """Too few entities survive filtering to build a network."""


@dataclass(frozen=True)
class PipelineConfig:
    metric: str = "bytes_total"
    bin_width: int = 3600
    span: Optional[tuple[int, int]] = None
    ranking: str = "value"
    resolution: float = 1.0
    seed: int = 0
    min_activity: float = 1.0
    threads: int = 1

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if self.ranking not in ("value", "abs_value"):
            raise ValueError(f"unknown ranking {self.ranking!r}")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        if self.min_activity < 0:
            raise ValueError("min_activity must be >= 0")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.span is not None:
            object.__setattr__(self, "span", (int(self.span[0]), int(self.span[1])))

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self, with_threads: bool = True) -> dict[str, Any]:
        d = asdict(self)
        d["span"] = list(self.span) if self.span else None
        if not with_threads:
            del d["threads"]
        return d

    def digest(self) -> str:
        """Hash of the result-relevant settings (thread count excluded)."""
        blob = json.dumps(self.to_dict(with_threads=False), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _detect(g: WeightedGraph, cfg: PipelineConfig) -> CommunityPartition:
    if not any(e.w > 0 for e in g.edges):
        log.warning("graph has no positive-weight edges; every node is its own community")
        return CommunityPartition.from_labels({n: n for n in g.node_ids})
    return louvain(g, cfg.resolution, cfg.seed)


def _active_series(records: Sequence[FlowRecord], key: str, cfg: PipelineConfig) -> dict[str, TimeSeries]:
    series = aggregate(records, key, cfg.metric, cfg.bin_width, cfg.span, threads=cfg.threads)
    kept = {k: ts for k, ts in series.items() if ts.values.sum() >= cfg.min_activity}
    for k in sorted(set(series) - set(kept)):
        log.info("dropping %s below min_activity", k)
    return kept


def _correlation_network(series: Mapping[str, TimeSeries], cfg: PipelineConfig, kind: str,
                         what: str) -> WeightedGraph:
    if len(series) < 3:
        raise InsufficientDataError(f"need at least 3 active {what}, got {len(series)}")
    cm = correlation_matrix(series, threads=cfg.threads)
    if len(cm) < 3:
        raise InsufficientDataError(f"need at least 3 {what} with varying traffic, got {len(cm)}")
    return pmfg(cm, cfg.ranking, kind=kind)


def build_bssn(records: Sequence[FlowRecord], cells: Sequence[CellInfo],
               cfg: PipelineConfig = PipelineConfig()
               ) -> tuple[WeightedGraph, CommunityPartition, dict[int, ScenarioLabel]]:
    """Base-station social network.

    Per-cell series -> Pearson matrix -> PMFG -> Louvain -> scenario labels.
    Records from cells missing in ``cells`` are dropped with a warning.
    Labels are empty when the series are too coarse or too short to fold
    onto a day.
    """
    table = {c.cell_id: c for c in cells}
    unknown = sorted({r.cell_id for r in records} - set(table))
    if unknown:
        log.warning("excluding %d cells absent from the cell table: %s", len(unknown), unknown[:5])
        records = [r for r in records if r.cell_id in table]
    series = _active_series(records, "cell", cfg)
    g = _correlation_network(series, cfg, "bs", "cells")
    part = _detect(g, cfg)
    try:
        labels = label_scenarios(part, series)
    except ValueError as exc:
        log.warning("skipping scenario labels: %s", exc)
        labels = {}
    g = g.with_node_attrs(
        lat={n: table[n].lat for n in g.node_ids},
        lon={n: table[n].lon for n in g.node_ids},
        community=part.assignment,
    )
    return g, part, labels


def build_asn(records: Sequence[FlowRecord], cfg: PipelineConfig = PipelineConfig()
              ) -> tuple[WeightedGraph, CommunityPartition]:
    """App social network; node ``size`` is the node's degree."""
    series = _active_series(records, "app", cfg)
    g = _correlation_network(series, cfg, "app", "apps")
    part = _detect(g, cfg)
    deg = g.degree()
    g = g.with_node_attrs(size={n: float(d) for n, d in deg.items()}, community=part.assignment)
    return g, part


def build_usn(calls: Sequence[CallRecord], cfg: PipelineConfig = PipelineConfig()
              ) -> tuple[WeightedGraph, CommunityPartition]:
    """User social network from call records.

    Edge weight is the number of calls between two users in either direction
    whose start time lies in ``cfg.span``.
    """
    if cfg.span is not None:
        lo, hi = cfg.span
        calls = [c for c in calls if lo <= c.t_start < hi]
    if not calls:
        raise InsufficientDataError("no calls in span")
    counts = Counter(tuple(sorted((c.caller_id, c.callee_id))) for c in calls)
    users = sorted({u for pair in counts for u in pair})
    nodes = tuple(Node(u, "user") for u in users)
    edges = tuple(Edge(a, b, float(n)) for (a, b), n in sorted(counts.items()))
    g = WeightedGraph(nodes, edges)
    part = _detect(g, cfg)
    return g.with_node_attrs(community=part.assignment), part

