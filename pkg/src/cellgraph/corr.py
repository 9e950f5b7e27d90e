"""Pearson correlation and correlation matrices over entity series."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, TYPE_CHECKING, Mapping, Sequence

import numpy as np

from .errors import SchemaError, UndefinedStatisticError

if TYPE_CHECKING:
    from .series import TimeSeries

log = logging.getLogger(__name__)

# rows per matrix block; fixed so the result does not depend on the thread count
BLOCK = 256


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation coefficient of two equal-length vectors, clamped to [-1, 1]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"length mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValueError("need at least 2 observations")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = dx @ dx
    syy = dy @ dy
    if sxx == 0 or syy == 0 or np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedStatisticError("zero variance")
    # exact answers where rounding would otherwise give 1 - ulp
    if np.array_equal(dx, dy):
        return 1.0
    if np.array_equal(dx, -dy):
        return -1.0
    r = (dx @ dy) / np.sqrt(sxx * syy)
    return float(min(1.0, max(-1.0, r)))


@dataclass(frozen=True, eq=False)
class CorrelationMatrix:
    entities: tuple[str, ...]
    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        n = len(self.entities)
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match {n} entities")
        if len(set(self.entities)) != n:
            raise ValueError("duplicate entity ids")
        if not np.array_equal(m, m.T):
            raise ValueError("matrix is not symmetric")
        if np.any(np.diag(m) != 1.0):
            raise ValueError("diagonal must be 1")
        if np.any(np.abs(m) > 1.0) or not np.all(np.isfinite(m)):
            raise ValueError("entries must lie in [-1, 1]")
        m.flags.writeable = False
        object.__setattr__(self, "entities", tuple(self.entities))
        object.__setattr__(self, "m", m)

    def __len__(self) -> int:
        return len(self.entities)

    def __getitem__(self, pair: tuple[str, str]) -> float:
        i = self.entities.index(pair[0])
        j = self.entities.index(pair[1])
        return float(self.m[i, j])


def correlation_matrix(series: Mapping[str, "TimeSeries"], threads: int = 1) -> CorrelationMatrix:
    """Pairwise Pearson matrix over ``series``, rows in sorted entity order.

    Zero-variance series are dropped with a warning, since the correlation is
    undefined for them.
    """
    series = dict(series)
    if len(series) < 2:
        raise ValueError("need at least 2 series")
    ref = next(iter(series.values()))
    for ts in series.values():
        if ts.bin_width != ref.bin_width or ts.t0 != ref.t0 or len(ts) != len(ref):
            raise ValueError("all series must share bin width and span")
    names = []
    for name in sorted(series):
        v = series[name].values
        if np.all(v == v[0]):
            log.warning("excluding zero-variance entity %s", name)
            continue
        names.append(name)
    if len(names) < 2:
        raise UndefinedStatisticError(f"only {len(names)} entities with nonzero variance")

    x = np.vstack([series[n].values for n in names])
    d = x - x.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", d, d))
    n = len(names)
    m = np.empty((n, n))

    def fill(start: int) -> None:
        stop = min(start + BLOCK, n)
        m[start:stop] = (d[start:stop] @ d.T) / np.outer(norms[start:stop], norms)

    starts = range(0, n, BLOCK)
    if threads > 1 and n > BLOCK:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, starts))
    else:
        for s in starts:
            fill(s)
    np.clip(m, -1.0, 1.0, out=m)
    _snap_exact(d, m)
    upper = np.triu(m, 1)
    m = upper + upper.T
    np.fill_diagonal(m, 1.0)
    return CorrelationMatrix(tuple(names), m)


def _snap_exact(d: np.ndarray, m: np.ndarray) -> None:
    """Set +-1 exactly for rows whose centred values are equal or negated."""
    groups: dict[bytes, list[int]] = {}
    for i, row in enumerate(d):
        groups.setdefault((row + 0.0).tobytes(), []).append(i)
    for i, row in enumerate(d):
        for j in groups.get((row + 0.0).tobytes(), ()):
            m[i, j] = 1.0
        for j in groups.get((-row + 0.0).tobytes(), ()):
            m[i, j] = -1.0


def write_matrix_csv(cm: CorrelationMatrix, fp: IO[bytes]) -> None:
    fp.write((",".join(["id", *cm.entities]) + "\n").encode("utf-8"))
    for name, row in zip(cm.entities, cm.m):
        fp.write((",".join([name, *(repr(float(v)) for v in row)]) + "\n").encode("utf-8"))


def read_matrix_csv(fp: IO[bytes]) -> CorrelationMatrix:
    lines = [raw.decode("utf-8").rstrip("\r\n") for raw in fp]
    lines = [ln.split(",") for ln in lines if ln]
    if not lines or lines[0][0] != "id":
        raise SchemaError("matrix CSV must start with an id header row")
    entities = lines[0][1:]
    rows = lines[1:]
    if [r[0] for r in rows] != entities or any(len(r) != len(entities) + 1 for r in rows):
        raise SchemaError("matrix rows do not match the header")
    try:
        m = np.array([[float(v) for v in r[1:]] for r in rows]).reshape(len(entities), len(entities))
        return CorrelationMatrix(tuple(entities), m)
    except ValueError as exc:
        raise SchemaError(str(exc)) from None
