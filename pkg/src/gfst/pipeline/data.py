"""Station datasets: CSV ingestion and export, chronological splits, z-scoring."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..graphbuild import FEATURES, StationMeta

log = logging.getLogger(__name__)

DATA_HEADER = ["station_id", "timestamp_utc", *FEATURES]
STATION_HEADER = ["station_id", "latitude_deg", "longitude_deg"]
STD_FLOOR = 1e-8
SPLIT = (0.7, 0.1, 0.2)


@dataclass
class MeteoSeries:
    station_id: str
    dt_s: float
    records: np.ndarray  # [T, 4]: speed m/s, direction deg (from), temperature K, pressure Pa

    @property
    def wind_speed(self) -> np.ndarray:
        return self.records[:, 0]


@dataclass
class NormStats:
    mean: np.ndarray  # [n, 4]
    std: np.ndarray   # [n, 4]


@dataclass
class Dataset:
    stations: list[StationMeta]
    values: np.ndarray          # [T, n, 4] physical units
    start: datetime
    dt_s: float
    train_end: int = 0
    val_end: int = 0
    stats: NormStats | None = None
    truth: dict = field(default_factory=dict)  # generator ground truth, empty for real data

    def __post_init__(self):
        if not self.train_end:
            self.train_end, self.val_end = chronological_split(len(self.values))
        self.check()
        if self.stats is None:
            self.stats = fit_stats(self.values[:self.train_end])

    @property
    def n_stations(self) -> int:
        return len(self.stations)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    def station_index(self, station_id: str) -> int:
        for i, s in enumerate(self.stations):
            if s.id == station_id:
                return i
        raise ValidationError(f"unknown station id {station_id!r}")

    def series(self, station_id: str) -> MeteoSeries:
        return MeteoSeries(station_id, self.dt_s, self.values[:, self.station_index(station_id)].copy())

    def segments(self) -> dict[str, tuple[int, int]]:
        return {"train": (0, self.train_end), "val": (self.train_end, self.val_end),
                "test": (self.val_end, self.n_steps)}

    def normalized(self) -> np.ndarray:
        return normalize(self.values, self.stats)

    def timestamps(self) -> list[datetime]:
        return [self.start + timedelta(seconds=self.dt_s * k) for k in range(self.n_steps)]

    def check(self) -> None:
        ids = [s.id for s in self.stations]
        if len(set(ids)) != len(ids):
            raise ValidationError("station ids must be unique")
        for s in self.stations:
            s.validate()
        if self.values.ndim != 3 or self.values.shape[1:] != (len(ids), 4):
            raise ValidationError(f"values must be [T, {len(ids)}, 4], got {self.values.shape}")
        if self.dt_s <= 0:
            raise ValidationError("timestep must be positive")
        if not (0 < self.train_end < self.val_end < self.n_steps):
            raise ValidationError(f"bad split boundaries {self.train_end}, {self.val_end} for T={self.n_steps}")
        v = self.values
        if not np.all(np.isfinite(v)):
            raise ValidationError("non-finite values in dataset")
        if np.any(v[..., 0] < 0):
            raise ValidationError("negative wind speed")
        if np.any((v[..., 1] < 0) | (v[..., 1] >= 360)):
            raise ValidationError("wind direction outside [0, 360)")
        if np.any(v[..., 2] <= 0) or np.any(v[..., 3] <= 0):
            raise ValidationError("temperature and pressure must be positive")


def chronological_split(T: int, fractions=SPLIT) -> tuple[int, int]:
    train_end = int(round(T * fractions[0]))
    val_end = int(round(T * (fractions[0] + fractions[1])))
    if not (0 < train_end < val_end < T):
        raise ValidationError(f"series of length {T} is too short to split")
    return train_end, val_end


def fit_stats(train_values: np.ndarray) -> NormStats:
    mean = train_values.mean(axis=0)
    std = train_values.std(axis=0)
    low = std < STD_FLOOR
    if np.any(low):
        log.warning("%d zero-variance feature(s); std floored at %g", int(low.sum()), STD_FLOOR)
        std = np.where(low, STD_FLOOR, std)
    return NormStats(mean, std)


def normalize(values: np.ndarray, stats: NormStats) -> np.ndarray:
    return (values - stats.mean) / stats.std


def denormalize(values: np.ndarray, stats: NormStats, station: int | None = None, feature: int | None = None):
    """Inverse z-score. With ``station``/``feature`` given, ``values`` is a plain
    series of that one channel."""
    if station is None:
        return values * stats.std + stats.mean
    return values * stats.std[station, feature] + stats.mean[station, feature]


# -- CSV -----------------------------------------------------------------

def _parse_time(text: str, where: str) -> datetime:
    try:
        t = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise ValidationError(f"{where}: bad timestamp {text!r}") from None
    if t.tzinfo is None:
        t = t.replace(tzinfo=timezone.utc)
    return t.astimezone(timezone.utc)


def load_stations(path) -> list[StationMeta]:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: no records")
    if rows[0] != STATION_HEADER:
        raise ValidationError(f"{path}:1: expected header {','.join(STATION_HEADER)}")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise ValidationError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
        try:
            meta = StationMeta(row[0], float(row[1]), float(row[2]))
        except ValueError:
            raise ValidationError(f"{path}:{lineno}: non-numeric coordinate") from None
        try:
            meta.validate()
        except ValidationError as e:
            raise ValidationError(f"{path}:{lineno}: {e}") from None
        out.append(meta)
    if not out:
        raise ValidationError(f"{path}: no records")
    if len({s.id for s in out}) != len(out):
        raise ValidationError(f"{path}: duplicate station id")
    return out


def load_csv(path, stations_path) -> Dataset:
    """Read a long-format data CSV (one row per station per step) into a Dataset."""
    path = Path(path)
    stations = load_stations(stations_path)
    index = {s.id: i for i, s in enumerate(stations)}
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or (len(rows) == 1 and not rows[0]):
        raise ValidationError(f"{path}: no records")
    if rows[0] != DATA_HEADER:
        raise ValidationError(f"{path}:1: expected header {','.join(DATA_HEADER)}")
    if len(rows) == 1:
        raise ValidationError(f"{path}: no records")

    by_station: dict[int, list[tuple[datetime, list[float], int]]] = {i: [] for i in index.values()}
    for lineno, row in enumerate(rows[1:], start=2):
        where = f"{path}:{lineno}"
        if len(row) != len(DATA_HEADER):
            raise ValidationError(f"{where}: expected {len(DATA_HEADER)} fields, got {len(row)}")
        if row[0] not in index:
            raise ValidationError(f"{where}: unknown station id {row[0]!r}")
        t = _parse_time(row[1], where)
        try:
            vals = [float(v) for v in row[2:]]
        except ValueError:
            raise ValidationError(f"{where}: non-numeric field") from None
        speed, direction, temp, pres = vals
        if not all(np.isfinite(vals)):
            raise ValidationError(f"{where}: non-finite value")
        if speed < 0:
            raise ValidationError(f"{where}: negative wind speed")
        if not 0 <= direction < 360:
            raise ValidationError(f"{where}: wind direction {direction} outside [0, 360)")
        if temp <= 0 or pres <= 0:
            raise ValidationError(f"{where}: temperature and pressure must be positive")
        by_station[index[row[0]]].append((t, vals, lineno))

    grid = None
    for i, recs in by_station.items():
        if not recs:
            raise ValidationError(f"{path}: station {stations[i].id!r} has no records")
        recs.sort(key=lambda r: r[0])
        times = [r[0] for r in recs]
        if grid is None:
            if len(times) < 2:
                raise ValidationError(f"{path}: need at least 2 time steps")
            dt = (times[1] - times[0]).total_seconds()
            if dt <= 0:
                raise ValidationError(f"{path}:{recs[1][2]}: duplicate timestamp")
            grid = [times[0] + timedelta(seconds=dt * k) for k in range(len(times))]
        for k, (t, _, lineno) in enumerate(recs):
            if k >= len(grid) or t != grid[k]:
                raise ValidationError(f"{path}:{lineno}: timestamp {t.isoformat()} breaks the uniform time grid")
        if len(recs) != len(grid):
            raise ValidationError(f"{path}: station {stations[i].id!r} has {len(recs)} steps, expected {len(grid)}")

    values = np.empty((len(grid), len(stations), 4))
    for i, recs in by_station.items():
        values[:, i] = [r[1] for r in recs]
    dt_s = (grid[1] - grid[0]).total_seconds()
    return Dataset(stations, values, grid[0], dt_s)


def _fmt_time(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def export_csv(ds: Dataset, path, stations_path) -> None:
    with Path(stations_path).open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(STATION_HEADER)
        for s in ds.stations:
            wr.writerow([s.id, repr(float(s.latitude)), repr(float(s.longitude))])
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(DATA_HEADER)
        times = ds.timestamps()
        for k, t in enumerate(times):
            stamp = _fmt_time(t)
            for i, s in enumerate(ds.stations):
                wr.writerow([s.id, stamp, *(repr(float(v)) for v in ds.values[k, i])])
