"""Dynamic complex adjacency between stations.

Each entry pairs an edge indicator ``a`` (lag-aligned Pearson correlation
above a threshold) with a signed integer lag ``b`` in time steps, estimated
from station geometry and the window-mean wind. ``b[i, j] > 0`` means
station j sees the signal ``b`` steps after station i.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ConfigError, ValidationError

EARTH_RADIUS_KM = 6371.0088
CALM_WIND_FLOOR = 0.5  # m/s

# column order of the per-step meteorological record
SPEED, DIRECTION, TEMPERATURE, PRESSURE = range(4)
FEATURES = ("wind_speed_mps", "wind_dir_deg", "temperature_k", "pressure_pa")


@dataclass(frozen=True)
class StationMeta:
    id: str
    latitude: float
    longitude: float

    def validate(self) -> None:
        if not (-90.0 <= self.latitude <= 90.0) or not (-180.0 <= self.longitude <= 180.0):
            raise ValidationError(
                f"station {self.id!r}: coordinates ({self.latitude}, {self.longitude}) out of range")


@dataclass(frozen=True)
class GraphConfig:
    beta: float = 0.5
    window_len: int = 512
    max_lag: int = 8
    refresh_every: int = 96

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        if self.window_len < 2:
            raise ConfigError(f"window_len must be >= 2, got {self.window_len}")
        if self.max_lag < 0 or 2 * self.max_lag >= self.window_len:
            raise ConfigError(f"max_lag must satisfy 0 <= max_lag < window_len/2, got {self.max_lag}")
        if self.refresh_every < 1:
            raise ConfigError(f"refresh_every must be >= 1, got {self.refresh_every}")


@dataclass
class ComplexAdjacency:
    a: np.ndarray  # [n, n] int, 1 where an edge exists
    b: np.ndarray  # [n, n] int lag in steps; meaningful only where a == 1

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def as_complex(self) -> np.ndarray:
        """Entries a + bi where a = 1, zero elsewhere."""
        return np.where(self.a == 1, self.a + 1j * self.b, 0)

    def check(self, max_lag: int | None = None) -> None:
        a, b = self.a, self.b
        if not np.array_equal(a, a.T):
            raise AssertionError("edge matrix is not symmetric")
        if not (np.all(np.diag(a) == 1) and np.all(np.diag(b) == 0)):
            raise AssertionError("diagonal must be (1, 0)")
        edges = a == 1
        if not np.array_equal(b[edges], -b.T[edges]):
            raise AssertionError("lags are not antisymmetric on edges")
        if max_lag is not None and np.any(np.abs(b) > max_lag):
            raise AssertionError("lag exceeds max_lag")

    def permuted(self, perm: np.ndarray) -> "ComplexAdjacency":
        return ComplexAdjacency(self.a[np.ix_(perm, perm)], self.b[np.ix_(perm, perm)])


def haversine_km(p: StationMeta, q: StationMeta) -> float:
    p.validate()
    q.validate()
    lat1, lon1, lat2, lon2 = map(math.radians, (p.latitude, p.longitude, q.latitude, q.longitude))
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    h = min(1.0, max(0.0, h))
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


def bearing_deg(p: StationMeta, q: StationMeta) -> float:
    """Initial great-circle bearing from p to q, clockwise from true north."""
    p.validate()
    q.validate()
    if p.latitude == q.latitude and (p.longitude - q.longitude) % 360.0 == 0.0:
        raise ValidationError(f"bearing undefined between coincident stations {p.id!r} and {q.id!r}")
    lat1, lon1, lat2, lon2 = map(math.radians, (p.latitude, p.longitude, q.latitude, q.longitude))
    dlon = lon2 - lon1
    y = math.sin(dlon) * math.cos(lat2)
    x = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon)
    deg = math.degrees(math.atan2(y, x)) % 360.0
    return 0.0 if deg == 360.0 else deg


def pearson(s_i, s_j) -> float:
    """Pearson correlation; 0 when either series is constant."""
    x = np.asarray(s_i, dtype=np.float64)
    y = np.asarray(s_j, dtype=np.float64)
    if x.shape != y.shape:
        raise ValidationError(f"pearson: length mismatch {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValidationError("pearson: need at least 2 samples")
    dx = x - x.mean()
    dy = y - y.mean()
    den = math.sqrt(float(np.dot(dx, dx)) * float(np.dot(dy, dy)))
    if den == 0.0:
        return 0.0
    return float(min(1.0, max(-1.0, float(np.dot(dx, dy)) / den)))


def lag_steps(distance_km: float, bearing: float, mean_wind_dir: float, mean_wind_speed: float,
              dt_s: float, max_lag: int) -> int:
    """Advection lag along the baseline, in whole steps, clamped to +-max_lag.

    ``mean_wind_dir`` follows the meteorological convention (where the wind
    comes from); the wind travels toward the opposite direction.
    """
    if distance_km < 0 or mean_wind_speed < 0:
        raise ValidationError("lag_steps: distance and wind speed must be non-negative")
    if distance_km == 0:
        return 0
    travel = (mean_wind_dir + 180.0) % 360.0
    along_m = distance_km * 1000.0 * math.cos(math.radians(travel - bearing))
    steps = along_m / (max(mean_wind_speed, CALM_WIND_FLOOR) * dt_s)
    b = int(round(steps))
    return max(-max_lag, min(max_lag, b))


def circular_mean_deg(angles) -> float:
    rad = np.radians(np.asarray(angles, dtype=np.float64))
    ang = math.degrees(math.atan2(float(np.sin(rad).mean()), float(np.cos(rad).mean())))
    return ang % 360.0


def aligned_pair(s_i: np.ndarray, s_j: np.ndarray, lag: int) -> tuple[np.ndarray, np.ndarray]:
    """Overlapping segments with s_j advanced by ``lag`` so s_i[t] meets s_j[t + lag]."""
    if lag >= 0:
        return s_i[:len(s_i) - lag], s_j[lag:]
    return s_i[-lag:], s_j[:len(s_j) + lag]


def build_adjacency(window: np.ndarray, stations: list[StationMeta], cfg: GraphConfig,
                    dt_s: float) -> ComplexAdjacency:
    """Build the adjacency from the last ``cfg.window_len`` rows of ``window``.

    window: [T, n, 4] physical records (speed, direction, temperature, pressure).
    """
    window = np.asarray(window, dtype=np.float64)
    n = len(stations)
    if n < 1:
        raise ValidationError("build_adjacency: need at least one station")
    if window.ndim != 3 or window.shape[1] != n or window.shape[2] < 2:
        raise ValidationError(f"build_adjacency: window shape {window.shape} does not match {n} stations")
    if window.shape[0] < cfg.window_len:
        raise ValidationError(f"build_adjacency: window has {window.shape[0]} steps, need {cfg.window_len}")
    w = window[-cfg.window_len:]
    a = np.eye(n, dtype=np.int64)
    b = np.zeros((n, n), dtype=np.int64)
    speed = w[:, :, SPEED]
    direction = w[:, :, DIRECTION]
    for i in range(n):
        for j in range(i + 1, n):
            d = haversine_km(stations[i], stations[j])
            if d == 0.0:
                lag = 0
            else:
                brg = bearing_deg(stations[i], stations[j])
                wd = circular_mean_deg(direction[:, [i, j]].ravel())
                ws = float(speed[:, [i, j]].mean())
                lag = lag_steps(d, brg, wd, ws, dt_s, cfg.max_lag)
            x, y = aligned_pair(speed[:, i], speed[:, j], lag)
            if pearson(x, y) > cfg.beta:
                a[i, j] = a[j, i] = 1
                b[i, j], b[j, i] = lag, -lag
    return ComplexAdjacency(a, b)


def export_adjacency(adj: ComplexAdjacency, csv_path, cfg: GraphConfig, meta: dict | None = None) -> Path:
    """Write ``i,j,a,b`` rows for every ordered pair plus a JSON sidecar."""
    csv_path = Path(csv_path)
    with csv_path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["i", "j", "a", "b"])
        for i in range(adj.n):
            for j in range(adj.n):
                wr.writerow([i, j, int(adj.a[i, j]), int(adj.b[i, j]) if adj.a[i, j] else 0])
    sidecar = {
        "graph": asdict(cfg),
        "built_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        **(meta or {}),
    }
    side_path = csv_path.with_suffix(".json")
    side_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return side_path


def read_adjacency(csv_path) -> ComplexAdjacency:
    rows = list(csv.DictReader(Path(csv_path).open()))
    n = int(round(math.sqrt(len(rows))))
    if n * n != len(rows):
        raise ValidationError(f"{csv_path}: expected n*n rows, got {len(rows)}")
    a = np.zeros((n, n), dtype=np.int64)
    b = np.zeros((n, n), dtype=np.int64)
    for r in rows:
        i, j = int(r["i"]), int(r["j"])
        a[i, j], b[i, j] = int(r["a"]), int(r["b"])
    return ComplexAdjacency(a, b)
