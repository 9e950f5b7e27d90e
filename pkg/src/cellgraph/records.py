"""Flow, call and cell records, with streaming CSV parsers and writers.

All three formats are plain comma-separated text with a fixed header line and
no quoting. A field that would need quoting (it contains a comma) cannot be
represented and is rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import IO, Callable, Iterable, Iterator, NamedTuple, Optional, Union

from .errors import RecordError, SchemaError

FLOW_HEADER = "user_id,cell_id,t_start,t_end,bytes_up,bytes_down,pkts_up,pkts_down,app_id,host"
CALL_HEADER = "caller_id,callee_id,t_start,duration_s"
CELL_HEADER = "cell_id,lat,lon,poi_label"

ByteSource = Union[IO[bytes], Iterable[bytes]]


class FlowRecord(NamedTuple):
    """One data session (XDR row)."""

    user_id: str
    cell_id: str
    t_start: int
    t_end: int
    bytes_up: int
    bytes_down: int
    pkts_up: int
    pkts_down: int
    app_id: str
    host: Optional[str] = None

    @property
    def bytes_total(self) -> int:
        return self.bytes_up + self.bytes_down


class CallRecord(NamedTuple):
    caller_id: str
    callee_id: str
    t_start: int
    duration_s: int


class CellInfo(NamedTuple):
    cell_id: str
    lat: float
    lon: float
    poi_label: Optional[str] = None


@dataclass
class ParseReport:
    rows_total: int = 0
    rows_ok: int = 0
    rows_rejected: int = 0
    rejects: list[tuple[int, str]] = field(default_factory=list)

    def _ok(self) -> None:
        self.rows_total += 1
        self.rows_ok += 1

    def _reject(self, lineno: int, reason: str) -> None:
        self.rows_total += 1
        self.rows_rejected += 1
        self.rejects.append((lineno, reason))


class _Reject(Exception):
    pass


def flow_violation(r: FlowRecord) -> Optional[str]:
    """Return the first invariant a flow record breaks, or None."""
    for name in ("user_id", "cell_id", "app_id"):
        if not getattr(r, name):
            return f"empty {name}"
    for name in ("bytes_up", "bytes_down", "pkts_up", "pkts_down"):
        if getattr(r, name) < 0:
            return f"negative {name}"
    if r.t_end < r.t_start:
        return "t_end < t_start"
    return None


def call_violation(r: CallRecord) -> Optional[str]:
    if not r.caller_id or not r.callee_id:
        return "empty id"
    if r.caller_id == r.callee_id:
        return "self-call"
    if r.duration_s < 0:
        return "negative duration_s"
    return None


def cell_violation(r: CellInfo) -> Optional[str]:
    if not r.cell_id:
        return "empty cell_id"
    if not -90.0 <= r.lat <= 90.0:
        return "lat out of range"
    if not -180.0 <= r.lon <= 180.0:
        return "lon out of range"
    return None


def _int(value: str, name: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise _Reject(f"bad {name}") from None


def _float(value: str, name: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise _Reject(f"bad {name}") from None


_FLOW_INT_FIELDS = ("t_start", "t_end", "bytes_up", "bytes_down", "pkts_up", "pkts_down")


def _flow_from_fields(f: list[str]) -> FlowRecord:
    try:
        rec = FlowRecord(f[0], f[1], int(f[2]), int(f[3]), int(f[4]), int(f[5]),
                         int(f[6]), int(f[7]), f[8], f[9] or None)
    except ValueError:
        for name, value in zip(_FLOW_INT_FIELDS, f[2:8]):
            _int(value, name)
        raise
    # fast path; flow_violation names the exact problem
    if (rec[4] < 0 or rec[5] < 0 or rec[6] < 0 or rec[7] < 0 or rec[3] < rec[2]
            or not rec[0] or not rec[1] or not rec[8]):
        raise _Reject(flow_violation(rec))
    return rec


def _call_from_fields(f: list[str]) -> CallRecord:
    rec = CallRecord(f[0], f[1], _int(f[2], "t_start"), _int(f[3], "duration_s"))
    reason = call_violation(rec)
    if reason:
        raise _Reject(reason)
    return rec


def _cell_from_fields(f: list[str]) -> CellInfo:
    rec = CellInfo(f[0], _float(f[1], "lat"), _float(f[2], "lon"), f[3] or None)
    reason = cell_violation(rec)
    if reason:
        raise _Reject(reason)
    return rec


def _lines(source: ByteSource) -> Iterator[Optional[str]]:
    """Decoded lines without terminators; None marks a line that is not UTF-8."""
    for raw in source:
        try:
            yield raw.decode("utf-8").rstrip("\r\n")
        except UnicodeDecodeError:
            yield None


def _iter_csv(
    source: ByteSource,
    header: str,
    convert: Callable[[list[str]], tuple],
    report: ParseReport,
    strict: bool,
) -> Iterator:
    lines = _lines(source)
    first = next(lines, None)
    if first is None:
        raise SchemaError("missing or undecodable header")
    first = first.lstrip("\ufeff")
    if first != header:
        raise SchemaError(f"unexpected header {first!r}, expected {header!r}")
    width = header.count(",") + 1
    for lineno, line in enumerate(lines, start=2):
        if line == "":
            continue
        try:
            if line is None:
                raise _Reject("invalid UTF-8")
            fields = line.split(",")
            if len(fields) != width:
                raise _Reject(f"expected {width} fields, got {len(fields)}")
            rec = convert(fields)
        except _Reject as exc:
            if strict:
                raise RecordError(f"line {lineno}: {exc}") from None
            report._reject(lineno, str(exc))
            continue
        report._ok()
        yield rec


def iter_flow_csv(source: ByteSource, report: Optional[ParseReport] = None,
                  strict: bool = False) -> Iterator[FlowRecord]:
    """Yield flow records one at a time; rejects are tallied into ``report``."""
    return _iter_csv(source, FLOW_HEADER, _flow_from_fields,
                     report if report is not None else ParseReport(), strict)


def iter_call_csv(source: ByteSource, report: Optional[ParseReport] = None,
                  strict: bool = False) -> Iterator[CallRecord]:
    return _iter_csv(source, CALL_HEADER, _call_from_fields,
                     report if report is not None else ParseReport(), strict)


def parse_flow_csv(source: ByteSource, strict: bool = False) -> tuple[list[FlowRecord], ParseReport]:
    """Parse a flow CSV.

    In non-strict mode (the default) bad rows are skipped and listed in the
    report. With ``strict=True`` the first bad row raises `RecordError`.
    A missing or wrong header always raises `SchemaError`.
    """
    report = ParseReport()
    records = list(iter_flow_csv(source, report, strict))
    return records, report


def parse_call_csv(source: ByteSource, strict: bool = False) -> tuple[list[CallRecord], ParseReport]:
    report = ParseReport()
    records = list(iter_call_csv(source, report, strict))
    return records, report


def parse_cells_csv(source: ByteSource, strict: bool = False) -> tuple[list[CellInfo], ParseReport]:
    """Parse a cell table. A repeated cell_id rejects the later row."""
    report = ParseReport()
    seen: set[str] = set()

    def convert(fields: list[str]) -> CellInfo:
        rec = _cell_from_fields(fields)
        if rec.cell_id in seen:
            raise _Reject("duplicate cell_id")
        seen.add(rec.cell_id)
        return rec

    records = list(_iter_csv(source, CELL_HEADER, convert, report, strict))
    return records, report


def _check_text(value: str) -> str:
    if "," in value or "\n" in value or "\r" in value:
        raise RecordError(f"field {value!r} cannot be written without quoting")
    return value


def _write(fp: IO[bytes], header: str, rows: Iterable[Iterable[str]]) -> None:
    fp.write((header + "\n").encode("utf-8"))
    for row in rows:
        fp.write((",".join(_check_text(v) for v in row) + "\n").encode("utf-8"))


def write_flow_csv(records: Iterable[FlowRecord], fp: IO[bytes]) -> None:
    _write(fp, FLOW_HEADER, (
        (r.user_id, r.cell_id, str(r.t_start), str(r.t_end), str(r.bytes_up),
         str(r.bytes_down), str(r.pkts_up), str(r.pkts_down), r.app_id, r.host or "")
        for r in records))


def write_call_csv(records: Iterable[CallRecord], fp: IO[bytes]) -> None:
    _write(fp, CALL_HEADER, (
        (r.caller_id, r.callee_id, str(r.t_start), str(r.duration_s)) for r in records))


def write_cells_csv(records: Iterable[CellInfo], fp: IO[bytes]) -> None:
    _write(fp, CELL_HEADER, (
        (r.cell_id, repr(float(r.lat)), repr(float(r.lon)), r.poi_label or "") for r in records))
