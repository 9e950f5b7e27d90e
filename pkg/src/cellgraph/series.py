"""Binned traffic time series and the temporal / concentration statistics."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from operator import attrgetter
from typing import IO, Iterable, Mapping, Optional, Sequence

import numpy as np

from .corr import pearson
from .errors import SchemaError, UndefinedStatisticError
from .records import FlowRecord

KEYS = {"cell": "cell_id", "user": "user_id", "app": "app_id"}
METRICS = ("bytes_total", "bytes_down", "bytes_up", "flow_count")
GRANULARITIES = (300, 900, 3600, 86400)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Traffic volume of one entity in consecutive, epoch-aligned bins."""

    entity_id: str
    t0: int
    bin_width: int
    values: np.ndarray

    def __post_init__(self):
        if self.bin_width <= 0:
            raise ValueError("bin_width must be positive")
        if self.t0 % self.bin_width:
            raise ValueError(f"t0={self.t0} is not aligned to bin_width={self.bin_width}")
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("values must be a non-empty vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("values must be finite and non-negative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size

    @property
    def t_end(self) -> int:
        return self.t0 + self.bin_width * self.values.size

    def times(self) -> np.ndarray:
        return self.t0 + self.bin_width * np.arange(self.values.size, dtype=np.int64)

    def coarsen(self, factor: int) -> "TimeSeries":
        """Sum groups of ``factor`` consecutive bins."""
        if factor < 1 or self.values.size % factor:
            raise ValueError("series length must be a multiple of factor")
        new_width = self.bin_width * factor
        if self.t0 % new_width:
            raise ValueError("t0 is not aligned to the coarser bin width")
        return TimeSeries(self.entity_id, self.t0, new_width,
                          self.values.reshape(-1, factor).sum(axis=1))


def _column(records: Sequence[FlowRecord], name: str, dtype=np.int64) -> np.ndarray:
    return np.fromiter(map(attrgetter(name), records), dtype=dtype, count=len(records))


def aggregate(
    records: Sequence[FlowRecord],
    key: str = "cell",
    metric: str = "bytes_total",
    bin_width: int = 3600,
    span: Optional[tuple[int, int]] = None,
    *,
    attribution: str = "proportional",
    threads: int = 1,
) -> dict[str, TimeSeries]:
    """Bin flow records into one series per entity.

    Byte metrics of a flow spanning several bins are split in proportion to
    its overlap with each bin (``attribution="start"`` puts everything in the
    bin containing ``t_start`` instead). A zero-length flow goes to the bin
    containing ``t_start``. ``flow_count`` always counts the start bin.

    ``span`` is the half-open window ``[t_begin, t_end)``; both ends must be
    multiples of ``bin_width``. When omitted it is the smallest aligned
    window covering every record.

    With ``threads > 1`` entities are split into disjoint groups that are
    binned concurrently. Each entity is still summed by a single worker in
    record order, so the output is bit-identical to ``threads=1``.
    """
    if key not in KEYS:
        raise ValueError(f"unknown key {key!r}")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}")
    if attribution not in ("proportional", "start"):
        raise ValueError(f"unknown attribution {attribution!r}")
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    if not records:
        return {}

    t_start = _column(records, "t_start")
    t_stop = _column(records, "t_end")
    if span is None:
        tb = int(t_start.min()) // bin_width * bin_width
        te = -(-int(max(t_stop.max(), t_start.max() + 1)) // bin_width) * bin_width
    else:
        tb, te = int(span[0]), int(span[1])
        if tb >= te:
            raise ValueError("span must satisfy t_begin < t_end")
        if tb % bin_width or te % bin_width:
            raise ValueError(f"span {span} is not aligned to bin_width={bin_width}")
    nbins = (te - tb) // bin_width

    if metric == "flow_count":
        volume = np.ones(len(records))
    elif metric == "bytes_total":
        volume = _column(records, "bytes_up", float) + _column(records, "bytes_down", float)
    else:
        volume = _column(records, metric, float)

    index: dict[str, int] = {}
    codes = np.fromiter(
        (index.setdefault(k, len(index)) for k in map(attrgetter(KEYS[key]), records)),
        dtype=np.int64, count=len(records))

    duration = t_stop - t_start
    starts_inside = (t_start >= tb) & (t_start < te)
    if metric == "flow_count" or attribution == "start":
        point = starts_inside
        spread = np.zeros(len(records), dtype=bool)
    else:
        point = starts_inside & (duration == 0)
        spread = (duration > 0) & (t_start < te) & (t_stop > tb)

    # point attribution: whole volume into the start bin
    p_idx = np.flatnonzero(point)
    p_ent = codes[p_idx]
    p_bin = (t_start[p_idx] - tb) // bin_width
    p_val = volume[p_idx]

    # proportional attribution: one piece per (flow, overlapped bin)
    s_idx = np.flatnonzero(spread)
    lo = np.maximum(t_start[s_idx], tb)
    hi = np.minimum(t_stop[s_idx], te)
    first = (lo - tb) // bin_width
    last = (hi - tb - 1) // bin_width
    reps = last - first + 1
    owner = np.repeat(s_idx, reps)
    offset = np.arange(owner.size) - np.repeat(np.cumsum(reps) - reps, reps)
    q_bin = np.repeat(first, reps) + offset
    left = tb + q_bin * bin_width
    overlap = np.minimum(t_stop[owner], left + bin_width) - np.maximum(t_start[owner], left)
    q_val = volume[owner] * (overlap / duration[owner])
    q_ent = codes[owner]

    # interleave both kinds back into record order so per-bin sums are
    # accumulated in a fixed order
    order = np.argsort(np.concatenate([p_idx, owner]), kind="stable")
    ent = np.concatenate([p_ent, q_ent])[order]
    bins = np.concatenate([p_bin, q_bin])[order]
    vals = np.concatenate([p_val, q_val])[order]

    present = np.unique(ent)
    names = {code: name for name, code in index.items()}

    def bin_group(group: np.ndarray) -> dict[int, np.ndarray]:
        local = np.full(len(index), -1, dtype=np.int64)
        local[group] = np.arange(group.size)
        sel = local[ent] >= 0
        flat = local[ent[sel]] * nbins + bins[sel]
        sums = np.bincount(flat, weights=vals[sel], minlength=group.size * nbins)
        sums = sums.reshape(group.size, nbins)
        return {int(c): sums[i] for i, c in enumerate(group)}

    threads = max(1, int(threads))
    groups = [present[i::threads] for i in range(threads)]
    groups = [g for g in groups if g.size]
    if len(groups) > 1:
        with ThreadPoolExecutor(max_workers=len(groups)) as pool:
            parts = list(pool.map(bin_group, groups))
    else:
        parts = [bin_group(g) for g in groups]

    out: dict[str, TimeSeries] = {}
    merged = {c: v for part in parts for c, v in part.items()}
    for name in sorted(names[c] for c in merged):
        out[name] = TimeSeries(name, tb, bin_width, merged[index[name]])
    return out


def default_threads() -> int:
    return os.cpu_count() or 1


def _variance_check(x: np.ndarray, what: str) -> None:
    if np.all(x == x[0]):
        raise UndefinedStatisticError(f"{what} has zero variance")


def autocorrelation(ts: TimeSeries, max_lag: int, estimator: str = "pearson") -> np.ndarray:
    """Autocorrelation at lags ``0..max_lag``.

    ``estimator="pearson"`` (default) correlates ``x[:-k]`` with ``x[k:]``,
    which is what `cross_correlation(ts, ts, k)` returns and gives exactly 1
    for a series periodic in ``k``. ``estimator="biased"`` is the classic
    ``sum((x_t - m)(x_{t+k} - m)) / sum((x_t - m)**2)`` with full-series mean,
    which shrinks by roughly ``(n - k) / n``.
    """
    x = ts.values
    n = x.size
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must be in [0, {n - 1}]")
    _variance_check(x, f"series {ts.entity_id!r}")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    if estimator == "pearson":
        if max_lag > n - 2:
            raise ValueError("max_lag leaves fewer than 2 overlapping bins")
        for k in range(1, max_lag + 1):
            out[k] = pearson(x[:-k], x[k:])
    elif estimator == "biased":
        d = x - x.mean()
        denom = d @ d
        for k in range(1, max_lag + 1):
            out[k] = (d[:-k] @ d[k:]) / denom
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return out


def cross_correlation(a: TimeSeries, b: TimeSeries, lag: int) -> float:
    """Pearson correlation of ``a`` at time t with ``b`` at time t + lag bins.

    The series are aligned on absolute time, so they may start at different
    (bin-aligned) instants.
    """
    if a.bin_width != b.bin_width:
        raise ValueError("series have different bin widths")
    w = a.bin_width
    if (a.t0 - b.t0) % w:
        raise ValueError("series bins are not mutually aligned")
    shift = lag + (a.t0 - b.t0) // w  # b index = a index + shift
    i0 = max(0, -shift)
    i1 = min(a.values.size, b.values.size - shift)
    if i1 - i0 < 2:
        raise ValueError("fewer than 2 overlapping bins at this lag")
    return pearson(a.values[i0:i1], b.values[i0 + shift:i1 + shift])


@dataclass(frozen=True, eq=False)
class ConcentrationCurve:
    """Cumulative traffic share held by the heaviest entities.

    ``p[k] = k / N`` and ``s[k]`` is the share of the top ``k`` entities.
    ``entities`` lists ids heaviest first.
    """

    p: np.ndarray
    s: np.ndarray
    entities: tuple[str, ...] = ()

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.p.tolist(), self.s.tolist()))


def concentration(totals: Mapping[str, float]) -> ConcentrationCurve:
    if not totals:
        raise ValueError("no entities")
    items = sorted(totals.items(), key=lambda kv: (-kv[1], kv[0]))
    vals = np.array([v for _, v in items], dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals < 0):
        raise ValueError("totals must be finite and non-negative")
    total = vals.sum()
    if total <= 0:
        raise ValueError("all totals are zero")
    n = vals.size
    s = np.concatenate([[0.0], np.cumsum(vals) / total])
    s = np.minimum(np.maximum.accumulate(s), 1.0)
    s[-1] = 1.0
    p = np.arange(n + 1) / n
    return ConcentrationCurve(p, s, tuple(k for k, _ in items))


def top_share(curve: ConcentrationCurve, p: float) -> float:
    """Traffic share of the top ``p`` fraction, interpolating linearly."""
    if not 0 < p <= 1:
        raise ValueError("p must be in (0, 1]")
    return float(np.interp(p, curve.p, curve.s))


# --- CSV interchange -------------------------------------------------------

def _text_lines(fp: IO[bytes]) -> Iterable[list[str]]:
    for raw in fp:
        line = raw.decode("utf-8").rstrip("\r\n")
        if line:
            yield line.split(",")


def write_series_csv(series: Mapping[str, TimeSeries], fp: IO[bytes]) -> None:
    lengths = {len(ts) for ts in series.values()}
    if len(lengths) > 1:
        raise ValueError("all series must have the same length")
    n = lengths.pop() if lengths else 0
    fp.write((",".join(["entity_id", "t0", "bin_width"] + [f"v{i}" for i in range(n)]) + "\n").encode())
    for name in sorted(series):
        ts = series[name]
        row = [name, str(ts.t0), str(ts.bin_width)] + [repr(float(v)) for v in ts.values]
        fp.write((",".join(row) + "\n").encode("utf-8"))


def read_series_csv(fp: IO[bytes]) -> dict[str, TimeSeries]:
    rows = _text_lines(fp)
    header = next(rows, None)
    if header is None or header[:3] != ["entity_id", "t0", "bin_width"]:
        raise SchemaError("series CSV must start with entity_id,t0,bin_width")
    out = {}
    for lineno, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise SchemaError(f"line {lineno}: expected {len(header)} fields")
        try:
            out[row[0]] = TimeSeries(row[0], int(row[1]), int(row[2]), [float(v) for v in row[3:]])
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
    return out


def write_concentration_csv(curve: ConcentrationCurve, fp: IO[bytes]) -> None:
    fp.write(b"p,s\n")
    for p, s in curve.points:
        fp.write(f"{p!r},{s!r}\n".encode())


def write_totals_csv(totals: Mapping[str, float], fp: IO[bytes]) -> None:
    fp.write(b"entity_id,total\n")
    for name in sorted(totals):
        fp.write(f"{name},{float(totals[name])!r}\n".encode("utf-8"))


def read_totals_csv(fp: IO[bytes]) -> dict[str, float]:
    rows = _text_lines(fp)
    if next(rows, None) != ["entity_id", "total"]:
        raise SchemaError("totals CSV must have header entity_id,total")
    out = {}
    for lineno, row in enumerate(rows, start=2):
        try:
            name, value = row
            out[name] = float(value)
        except ValueError:
            raise SchemaError(f"line {lineno}: expected entity_id,total") from None
    return out
