"""Synthetic cities, subscribers and call graphs with planted ground truth."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Mapping, Sequence

import numpy as np

from .community import reference_profiles
from .errors import SchemaError
from .records import CallRecord, CellInfo, FlowRecord

# 2023-11-15 00:00:00 UTC; day-aligned so bin hours match wall-clock hours
DEFAULT_T0 = 1_700_006_400
CITY_CENTRE = (22.30, 114.17)
DEFAULT_APP_MIX = {"video": 0.45, "im": 0.25, "web": 0.2, "office": 0.1}
DEFAULT_AMPLITUDE = {
    "residential": 6e9,
    "office/CBD": 4e9,
    "shopping": 5e9,
    "transport/subway": 3e9,
}
DOWNLINK_FRACTION = 0.85
MTU = 1400


@dataclass(frozen=True)
class ScenarioProfile:
    """Daily traffic shape of one scenario.

    ``amplitude`` is the mean daily byte volume of a cell and ``noise_sigma``
    the per-bin Gaussian noise as a fraction of the bin mean.
    """

    label: str
    hourly_shape: tuple[float, ...]
    amplitude: float
    noise_sigma: float = 0.0

    def __post_init__(self):
        shape = tuple(float(x) for x in self.hourly_shape)
        object.__setattr__(self, "hourly_shape", shape)
        if len(shape) != 24 or any(x < 0 or not math.isfinite(x) for x in shape):
            raise ValueError(f"profile {self.label!r}: shape must be 24 non-negative values")
        if abs(sum(shape) - 1.0) > 1e-9:
            raise ValueError(f"profile {self.label!r}: shape must sum to 1")
        if not self.amplitude > 0:
            raise ValueError(f"profile {self.label!r}: amplitude must be positive")
        if not self.noise_sigma >= 0:
            raise ValueError(f"profile {self.label!r}: noise_sigma must be >= 0")


def default_profiles(noise_sigma: float = 0.1) -> list[ScenarioProfile]:
    """The four reference scenarios shipped with the package."""
    return [
        ScenarioProfile(label, tuple(shape), DEFAULT_AMPLITUDE.get(label, 4e9), noise_sigma)
        for label, shape in reference_profiles().items()
    ]


def _bin_shares(shape: Sequence[float], bin_width: int) -> np.ndarray:
    """Fraction of a day's traffic falling in each bin of one day."""
    hourly = np.asarray(shape)
    edges = np.arange(0, 86400 + 1, bin_width)
    # cumulative share at each second boundary, linear within an hour
    cum = np.concatenate([[0.0], np.cumsum(hourly)])
    at = np.interp(edges / 3600.0, np.arange(25), cum)
    return np.diff(at)


def gen_city(
    profiles: Sequence[ScenarioProfile],
    cells_per_scenario: int,
    days: int,
    bin_width: int = 3600,
    seed: int = 0,
    *,
    t0: int = DEFAULT_T0,
    app_mix: Mapping[str, float] = DEFAULT_APP_MIX,
) -> tuple[list[FlowRecord], list[CellInfo], dict[str, str]]:
    """Generate one flow record per cell and bin.

    Cells of the same scenario share its daily shape, so without noise their
    series are identical up to scale. Returns flows, the cell table and the
    planted cell -> scenario map.
    """
    if days < 1 or cells_per_scenario < 1:
        raise ValueError("days and cells_per_scenario must be >= 1")
    if bin_width <= 0 or 86400 % bin_width:
        raise ValueError("bin_width must divide one day")
    if t0 % 86400:
        raise ValueError("t0 must be day-aligned")
    if not profiles:
        raise ValueError("no profiles")
    for prof in profiles:
        if not isinstance(prof, ScenarioProfile):
            raise ValueError("profiles must be ScenarioProfile instances")
    apps = sorted(app_mix)
    weights = np.array([app_mix[a] for a in apps], dtype=float)
    weights /= weights.sum()

    n_cells = len(profiles) * cells_per_scenario
    streams = np.random.SeedSequence(seed).spawn(n_cells + 1)
    layout = np.random.default_rng(streams[-1])
    per_day = 86400 // bin_width
    starts = t0 + bin_width * np.arange(days * per_day)

    flows: list[FlowRecord] = []
    cells: list[CellInfo] = []
    truth: dict[str, str] = {}
    for s, prof in enumerate(profiles):
        angle = 2 * math.pi * s / len(profiles)
        clat = CITY_CENTRE[0] + 0.04 * math.sin(angle)
        clon = CITY_CENTRE[1] + 0.04 * math.cos(angle)
        mean = np.tile(_bin_shares(prof.hourly_shape, bin_width), days) * prof.amplitude
        for j in range(cells_per_scenario):
            idx = s * cells_per_scenario + j
            cell_id = f"cell{idx:04d}"
            rng = np.random.default_rng(streams[idx])
            if prof.noise_sigma > 0:
                volume = rng.normal(mean, prof.noise_sigma * mean)
            else:
                volume = mean.copy()
            volume = np.rint(np.maximum(volume, 0.0)).astype(np.int64)
            down = np.rint(volume * DOWNLINK_FRACTION).astype(np.int64)
            up = volume - down
            app_idx = rng.choice(len(apps), size=volume.size, p=weights)
            users = rng.integers(0, 100, size=volume.size)
            for t, u, d, a, who in zip(starts.tolist(), up.tolist(), down.tolist(),
                                       app_idx.tolist(), users.tolist()):
                flows.append(FlowRecord(
                    f"u{idx:04d}{who:02d}", cell_id, t, t + bin_width, u, d,
                    -(-u // MTU), -(-d // MTU), apps[a], None))
            lat = round(clat + layout.normal(0, 0.005), 6)
            lon = round(clon + layout.normal(0, 0.005), 6)
            cells.append(CellInfo(cell_id, lat, lon, prof.label))
            truth[cell_id] = prof.label
    return flows, cells, truth


def gen_app_traffic(
    app_shapes: Mapping[str, Sequence[float]],
    days: int,
    bin_width: int = 3600,
    seed: int = 0,
    *,
    noise_sigma: float = 0.1,
    amplitude: float = 1e8,
    cell_id: str = "cell0000",
    t0: int = DEFAULT_T0,
) -> list[FlowRecord]:
    """One flow per app and bin, following each app's 24-hour usage shape."""
    if days < 1 or bin_width <= 0 or 86400 % bin_width:
        raise ValueError("invalid days or bin_width")
    per_day = 86400 // bin_width
    starts = (t0 + bin_width * np.arange(days * per_day)).tolist()
    names = sorted(app_shapes)
    streams = np.random.SeedSequence(seed).spawn(len(names))
    flows = []
    for k, app in enumerate(names):
        shape = np.asarray(app_shapes[app], dtype=float)
        if shape.size != 24 or np.any(shape < 0) or shape.sum() <= 0:
            raise ValueError(f"app {app!r}: shape must be 24 non-negative values")
        mean = np.tile(_bin_shares(shape / shape.sum(), bin_width), days) * amplitude
        rng = np.random.default_rng(streams[k])
        vol = rng.normal(mean, noise_sigma * mean) if noise_sigma > 0 else mean
        vol = np.rint(np.maximum(vol, 0)).astype(np.int64).tolist()
        for t, b in zip(starts, vol):
            flows.append(FlowRecord(f"u{k:04d}", cell_id, t, t + bin_width, 0, b, 0, -(-b // MTU), app, None))
    return flows


def gen_subscribers(n: int, alpha: float, seed: int = 0) -> dict[str, float]:
    """Per-user total bytes drawn i.i.d. from Pareto(alpha, x_min=1).

    Draws use inverse-CDF sampling, so for a fixed seed a smaller ``alpha``
    gives a monotone transform of the same sample (more concentrated).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    u = np.random.default_rng(seed).random(n)
    with np.errstate(over="ignore"):
        x = (1.0 - u) ** (-1.0 / alpha)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"alpha={alpha} overflows the float range")
    return {f"u{i:06d}": float(v) for i, v in enumerate(x)}


def gen_calls(
    users_per_block: int,
    blocks: int,
    p_in: float,
    p_out: float,
    seed: int = 0,
    *,
    t0: int = DEFAULT_T0,
    mean_duration: float = 120.0,
) -> tuple[list[CallRecord], dict[str, int]]:
    """Planted-partition call graph: each user pair calls once with
    probability ``p_in`` (same block) or ``p_out`` (different blocks)."""
    if users_per_block < 1 or blocks < 1:
        raise ValueError("counts must be >= 1")
    if not (0.0 <= p_out < p_in <= 1.0):
        raise ValueError("need 0 <= p_out < p_in <= 1")
    n = users_per_block * blocks
    users = [f"u{i:04d}" for i in range(n)]
    block = {u: i // users_per_block for i, u in enumerate(users)}
    iu, ju = np.triu_indices(n, k=1)
    rng = np.random.default_rng(seed)
    draw = rng.random(iu.size)
    flip = rng.random(iu.size) < 0.5
    when = rng.integers(0, 86400, size=iu.size)
    dur = np.rint(rng.exponential(mean_duration, size=iu.size)).astype(np.int64)
    same = (iu // users_per_block) == (ju // users_per_block)
    hit = draw < np.where(same, p_in, p_out)
    calls = []
    for k in np.flatnonzero(hit).tolist():
        a, b = users[iu[k]], users[ju[k]]
        if flip[k]:
            a, b = b, a
        calls.append(CallRecord(a, b, t0 + int(when[k]), int(dur[k])))
    return calls, block


def write_truth_csv(truth: Mapping[str, object], fp: IO[bytes]) -> None:
    fp.write(b"entity_id,label\n")
    for name in sorted(truth):
        fp.write(f"{name},{truth[name]}\n".encode("utf-8"))


def read_truth_csv(fp: IO[bytes]) -> dict[str, str]:
    lines = [raw.decode("utf-8").rstrip("\r\n") for raw in fp]
    lines = [ln.split(",") for ln in lines if ln]
    if not lines or lines[0] != ["entity_id", "label"]:
        raise SchemaError("ground-truth CSV must have header entity_id,label")
    try:
        return {name: label for name, label in lines[1:]}
    except ValueError:
        raise SchemaError("ground-truth rows must have two fields") from None
