"""``cellgraph`` command-line interface.

Subcommands write their outputs and a ``manifest.json`` into ``--out``; only
``stats`` may run without it, printing to stdout instead.
Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .community import (
    CommunityPartition,
    label_scenarios,
    louvain,
    read_partition_csv,
    write_partition_csv,
)
from .corr import correlation_matrix, read_matrix_csv, write_matrix_csv
from .errors import CellgraphError
from .pgraph import export, from_json, pmfg
from .records import (
    parse_call_csv,
    parse_cells_csv,
    parse_flow_csv,
    write_call_csv,
    write_cells_csv,
    write_flow_csv,
)
from .series import (
    GRANULARITIES,
    KEYS,
    METRICS,
    aggregate,
    autocorrelation,
    concentration,
    cross_correlation,
    read_series_csv,
    read_totals_csv,
    top_share,
    write_concentration_csv,
    write_series_csv,
    write_totals_csv,
)
from .socialnets import PipelineConfig, build_asn, build_bssn, build_usn
from .synth import (
    ScenarioProfile,
    default_profiles,
    gen_calls,
    gen_city,
    gen_subscribers,
    write_truth_csv,
)

log = logging.getLogger("cellgraph")

GRAPH_FORMATS = ("graphml", "json", "dot")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: list[str]
    config: dict[str, Any]
    config_digest: str
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    tool_version: str = __version__
    wall_clock_s: float = 0.0

    def write(self, out_dir: Path) -> None:
        doc = {
            "command": self.command,
            "config": self.config,
            "config_digest": self.config_digest,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "tool_version": self.tool_version,
            "wall_clock_s": round(self.wall_clock_s, 6),
        }
        (out_dir / "manifest.json").write_text(json.dumps(doc, indent=1) + "\n")


class _Run:
    """Tracks inputs read and outputs written by one subcommand."""

    def __init__(self, args: argparse.Namespace):
        self.out = Path(args.out) if args.out else None
        self.inputs: dict[str, str] = {}
        self.outputs: list[Path] = []
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def open_input(self, path: str):
        p = Path(path)
        self.inputs[str(p)] = sha256_file(p)
        return open(p, "rb")

    def output(self, name: str) -> Path:
        if self.out is None:
            raise UsageError("--out is required for this subcommand")
        p = self.out / name
        self.outputs.append(p)
        return p

    def write_bytes(self, name: str, data: bytes) -> None:
        self.output(name).write_bytes(data)


# --- configuration -----------------------------------------------------------

def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    values: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            with open(args.config) as fp:
                values.update(json.load(fp))
        except json.JSONDecodeError as exc:
            raise CellgraphError(f"invalid config file: {exc}") from None
    overrides = {
        "metric": getattr(args, "metric", None),
        "bin_width": getattr(args, "bin", None),
        "span": getattr(args, "span", None),
        "ranking": getattr(args, "ranking", None),
        "resolution": getattr(args, "resolution", None),
        "seed": getattr(args, "seed", None),
        "min_activity": getattr(args, "min_activity", None),
    }
    values.update({k: v for k, v in overrides.items() if v is not None})
    values["threads"] = args.threads
    try:
        return PipelineConfig.from_dict(values)
    except TypeError as exc:
        raise CellgraphError(f"invalid config: {exc}") from None


# --- subcommands ---------------------------------------------------------------

def _load_flows(run: _Run, path: str):
    with run.open_input(path) as fp:
        flows, report = parse_flow_csv(fp)
    if report.rows_rejected:
        log.warning("%s: rejected %d of %d rows", path, report.rows_rejected, report.rows_total)
    return flows


def _profiles(args) -> list[ScenarioProfile]:
    if args.profiles:
        from .community import reference_profiles
        from .synth import DEFAULT_AMPLITUDE
        refs = reference_profiles(args.profiles)
        return [ScenarioProfile(k, tuple(v), DEFAULT_AMPLITUDE.get(k, 4e9), args.noise) for k, v in refs.items()]
    return default_profiles(args.noise)


def cmd_synth_city(args, run: _Run, cfg: PipelineConfig) -> None:
    flows, cells, truth = gen_city(_profiles(args), args.cells_per_scenario, args.days,
                                   cfg.bin_width, cfg.seed)
    with open(run.output("flows.csv"), "wb") as fp:
        write_flow_csv(flows, fp)
    with open(run.output("cells.csv"), "wb") as fp:
        write_cells_csv(cells, fp)
    with open(run.output("truth.csv"), "wb") as fp:
        write_truth_csv(truth, fp)


def cmd_synth_subs(args, run: _Run, cfg: PipelineConfig) -> None:
    totals = gen_subscribers(args.n, args.alpha, cfg.seed)
    with open(run.output("totals.csv"), "wb") as fp:
        write_totals_csv(totals, fp)


def cmd_synth_calls(args, run: _Run, cfg: PipelineConfig) -> None:
    calls, blocks = gen_calls(args.users_per_block, args.blocks, args.p_in, args.p_out, cfg.seed)
    with open(run.output("calls.csv"), "wb") as fp:
        write_call_csv(calls, fp)
    with open(run.output("truth.csv"), "wb") as fp:
        write_truth_csv(blocks, fp)


def cmd_aggregate(args, run: _Run, cfg: PipelineConfig) -> None:
    flows = _load_flows(run, args.flows)
    series = aggregate(flows, args.key, cfg.metric, cfg.bin_width, cfg.span,
                       attribution=args.attribution, threads=cfg.threads)
    with open(run.output("series.csv"), "wb") as fp:
        write_series_csv(series, fp)


def cmd_stats(args, run: _Run, cfg: PipelineConfig) -> None:
    if args.stat == "concentration":
        with run.open_input(args.totals) as fp:
            curve = concentration(read_totals_csv(fp))
        print(f"{top_share(curve, args.p)!r}")
        if run.out:
            with open(run.output("concentration.csv"), "wb") as fp:
                write_concentration_csv(curve, fp)
        return
    with run.open_input(args.series) as fp:
        series = read_series_csv(fp)
    try:
        if args.stat == "acf":
            values = autocorrelation(series[args.entity], args.max_lag, args.estimator)
            lines = ["lag,r"] + [f"{k},{float(v)!r}" for k, v in enumerate(values)]
        else:
            r = cross_correlation(series[args.a], series[args.b], args.lag)
            lines = ["lag,r", f"{args.lag},{r!r}"]
    except KeyError as exc:
        raise CellgraphError(f"unknown entity {exc}") from None
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if run.out:
        run.write_bytes(f"{args.stat}.csv", text.encode())


def cmd_correlate(args, run: _Run, cfg: PipelineConfig) -> None:
    with run.open_input(args.series) as fp:
        series = read_series_csv(fp)
    cm = correlation_matrix(series, threads=cfg.threads)
    with open(run.output("matrix.csv"), "wb") as fp:
        write_matrix_csv(cm, fp)


def _write_graph(run: _Run, g, fmt: str) -> None:
    run.write_bytes("graph.json", export(g, "json"))
    if fmt != "json":
        run.write_bytes(f"graph.{fmt}", export(g, fmt))


def cmd_pmfg(args, run: _Run, cfg: PipelineConfig) -> None:
    with run.open_input(args.matrix) as fp:
        cm = read_matrix_csv(fp)
    _write_graph(run, pmfg(cm, cfg.ranking, kind=args.kind), args.format)


def cmd_communities(args, run: _Run, cfg: PipelineConfig) -> None:
    with run.open_input(args.graph) as fp:
        g = from_json(fp.read())
    part = louvain(g, cfg.resolution, cfg.seed)
    labels = None
    if args.series:
        with run.open_input(args.series) as fp:
            labels = label_scenarios(part, read_series_csv(fp))
    with open(run.output("partition.csv"), "wb") as fp:
        write_partition_csv(part, fp, labels)
    _write_graph(run, g.with_node_attrs(community=part.assignment), args.format)
    print(f"communities={part.k} modularity={part.modularity!r}")


def _write_network(run: _Run, g, part: CommunityPartition, labels, fmt: str) -> None:
    _write_graph(run, g, fmt)
    with open(run.output("partition.csv"), "wb") as fp:
        write_partition_csv(part, fp, labels)
    print(f"nodes={len(g.nodes)} edges={len(g.edges)} communities={part.k} modularity={part.modularity!r}")


def cmd_bssn(args, run: _Run, cfg: PipelineConfig) -> None:
    flows = _load_flows(run, args.flows)
    with run.open_input(args.cells) as fp:
        cells, _ = parse_cells_csv(fp)
    g, part, labels = build_bssn(flows, cells, cfg)
    _write_network(run, g, part, labels, args.format)


def cmd_asn(args, run: _Run, cfg: PipelineConfig) -> None:
    g, part = build_asn(_load_flows(run, args.flows), cfg)
    _write_network(run, g, part, None, args.format)


def cmd_usn(args, run: _Run, cfg: PipelineConfig) -> None:
    with run.open_input(args.calls) as fp:
        calls, report = parse_call_csv(fp)
    if report.rows_rejected:
        log.warning("%s: rejected %d of %d rows", args.calls, report.rows_rejected, report.rows_total)
    g, part = build_usn(calls, cfg)
    _write_network(run, g, part, None, args.format)


def cmd_export(args, run: _Run, cfg: PipelineConfig) -> None:
    with run.open_input(args.graph) as fp:
        g = from_json(fp.read())
    if args.partition:
        with run.open_input(args.partition) as fp:
            g = g.with_node_attrs(community=read_partition_csv(fp).assignment)
    run.write_bytes(f"graph.{args.format}", export(g, args.format))


# --- parser --------------------------------------------------------------------

def _span(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("span must be BEGIN:END epoch seconds") from None
    return lo, hi


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--config", help="JSON file with pipeline settings; flags override it")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker threads (results do not depend on it)")

    series_opts = argparse.ArgumentParser(add_help=False)
    series_opts.add_argument("--metric", choices=METRICS)
    series_opts.add_argument("--bin", type=int, metavar="SECONDS",
                             help=f"bin width, e.g. {', '.join(map(str, GRANULARITIES))}")
    series_opts.add_argument("--span", type=_span, metavar="BEGIN:END")

    net_opts = argparse.ArgumentParser(add_help=False)
    net_opts.add_argument("--ranking", choices=("value", "abs_value"))
    net_opts.add_argument("--resolution", type=float)
    net_opts.add_argument("--seed", type=int)
    net_opts.add_argument("--min-activity", type=float)
    net_opts.add_argument("--format", choices=GRAPH_FORMATS, default="graphml")

    seed_opt = argparse.ArgumentParser(add_help=False)
    seed_opt.add_argument("--seed", type=int)

    parser = _Parser(prog="cellgraph", description="Correlation networks and communities from cellular traffic records.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth-city", parents=[common, seed_opt], help="synthetic city with planted scenarios")
    p.add_argument("--cells-per-scenario", type=int, default=15)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--bin", type=int, metavar="SECONDS")
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--profiles", help="scenario profile CSV (label,h0..h23)")
    p.set_defaults(func=cmd_synth_city)

    p = sub.add_parser("synth-subs", parents=[common, seed_opt], help="Pareto subscriber volumes")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--alpha", type=float, default=0.5)
    p.set_defaults(func=cmd_synth_subs)

    p = sub.add_parser("synth-calls", parents=[common, seed_opt], help="planted-partition call records")
    p.add_argument("--users-per-block", type=int, default=10)
    p.add_argument("--blocks", type=int, default=4)
    p.add_argument("--p-in", type=float, default=0.9)
    p.add_argument("--p-out", type=float, default=0.05)
    p.set_defaults(func=cmd_synth_calls)

    p = sub.add_parser("aggregate", parents=[common, series_opts], help="bin flows into series")
    p.add_argument("--flows", required=True)
    p.add_argument("--key", choices=sorted(KEYS), default="cell")
    p.add_argument("--attribution", choices=("proportional", "start"), default="proportional")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("stats", help="temporal and concentration statistics")
    stats = p.add_subparsers(dest="stat", required=True, parser_class=_Parser)
    q = stats.add_parser("acf", parents=[common])
    q.add_argument("--series", required=True)
    q.add_argument("--entity", required=True)
    q.add_argument("--max-lag", type=int, default=24)
    q.add_argument("--estimator", choices=("pearson", "biased"), default="pearson")
    q = stats.add_parser("xcf", parents=[common])
    q.add_argument("--series", required=True)
    q.add_argument("--a", required=True)
    q.add_argument("--b", required=True)
    q.add_argument("--lag", type=int, default=0)
    q = stats.add_parser("concentration", parents=[common])
    q.add_argument("--totals", required=True)
    q.add_argument("--p", type=float, default=0.2)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("correlate", parents=[common], help="Pearson matrix of a series CSV")
    p.add_argument("--series", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("pmfg", parents=[common], help="planar maximally filtered graph of a matrix")
    p.add_argument("--matrix", required=True)
    p.add_argument("--ranking", choices=("value", "abs_value"))
    p.add_argument("--kind", choices=("bs", "app", "user"), default="bs")
    p.add_argument("--format", choices=GRAPH_FORMATS, default="graphml")
    p.set_defaults(func=cmd_pmfg)

    p = sub.add_parser("communities", parents=[common, seed_opt], help="Louvain on a JSON graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--resolution", type=float)
    p.add_argument("--series", help="series CSV; enables scenario labels")
    p.add_argument("--format", choices=GRAPH_FORMATS, default="graphml")
    p.set_defaults(func=cmd_communities)

    p = sub.add_parser("bssn", parents=[common, series_opts, net_opts], help="base-station social network")
    p.add_argument("--flows", required=True)
    p.add_argument("--cells", required=True)
    p.set_defaults(func=cmd_bssn)

    p = sub.add_parser("asn", parents=[common, series_opts, net_opts], help="app social network")
    p.add_argument("--flows", required=True)
    p.set_defaults(func=cmd_asn)

    p = sub.add_parser("usn", parents=[common, net_opts], help="user social network from calls")
    p.add_argument("--calls", required=True)
    p.add_argument("--span", type=_span, metavar="BEGIN:END")
    p.set_defaults(func=cmd_usn)

    p = sub.add_parser("export", parents=[common], help="convert a JSON graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--partition", help="partition CSV to attach as node communities")
    p.add_argument("--format", choices=GRAPH_FORMATS, required=True)
    p.set_defaults(func=cmd_export)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("CELLGRAPH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.threads < 1:
        print("cellgraph: error: --threads must be >= 1", file=sys.stderr)
        return 1
    started = time.perf_counter()
    try:
        cfg = _pipeline_config(args)
        run = _Run(args)
        args.func(args, run, cfg)
    except UsageError as exc:
        print(f"cellgraph: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    except (CellgraphError, ValueError, OSError) as exc:
        print(f"cellgraph: data error: {exc}", file=sys.stderr)
        return 2
    if run.out:
        RunManifest(
            command=["cellgraph", *argv],
            config=cfg.to_dict(),
            config_digest=cfg.digest(),
            inputs=run.inputs,
            outputs={p.name: sha256_file(p) for p in run.outputs},
            wall_clock_s=time.perf_counter() - started,
        ).write(run.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
