"""Synthetic station networks with a known advection structure.

A regional wind anomaly (daily cycle plus a slow AR(1) component) is carried
across the network by the mean wind. Each station observes the anomaly
delayed by the along-wind offset of its position divided by the advection
speed, plus local noise. The delays are the ground truth that
:func:`gfst.graphbuild.build_adjacency` is expected to recover.

Layouts
-------
``planted``
    Fixed wind direction and speed; stations sit at whole-step along-wind
    offsets, so every pair has an exact integer lag.
``advection``
    Jittered grid, slowly veering wind, fractional delays (linear
    interpolation). The learning benchmark.
``independent``
    Every station is unrelated white noise around a common mean.
"""

from __future__ import annotations

import math
from datetime import datetime, timezone

import numpy as np

from ..errors import ValidationError
from ..graphbuild import StationMeta
from .data import Dataset

ORIGIN = (8.15, 77.55)  # deg lat/lon
START = datetime(2014, 1, 1, tzinfo=timezone.utc)
STEPS_PER_DAY_AT_15MIN = 96


def _to_latlon(east_km: np.ndarray, north_km: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    R = 6371.0088
    lat0, lon0 = map(math.radians, ORIGIN)
    lat = lat0 + north_km / R
    lon = lon0 + east_km / (R * math.cos(lat0))
    return np.degrees(lat), np.degrees(lon)


def _ar1(rng: np.random.Generator, T: int, phi: float, sigma: float) -> np.ndarray:
    """Stationary AR(1) with marginal std ``sigma``."""
    eps = rng.standard_normal(T) * sigma * math.sqrt(1 - phi * phi)
    out = np.empty(T)
    out[0] = rng.standard_normal() * sigma
    for t in range(1, T):
        out[t] = phi * out[t - 1] + eps[t]
    return out


def _unit(deg: np.ndarray | float):
    r = np.radians(deg)
    return np.sin(r), np.cos(r)  # east, north components of a compass direction


def synth_generate(n_stations: int = 9, T: int = 6000, dt_s: float = 900.0, seed: int = 0,
                   layout: str = "advection", noise_scale: float = 1.0) -> Dataset:
    if n_stations < 2:
        raise ValidationError("synth_generate needs at least 2 stations")
    if T < 10:
        raise ValidationError("synth_generate needs at least 10 steps")
    rng = np.random.default_rng(seed)
    if layout == "planted":
        return _planted(rng, n_stations, T, dt_s, noise_scale)
    if layout == "advection":
        return _advection(rng, n_stations, T, dt_s, noise_scale)
    if layout == "independent":
        return _independent(rng, n_stations, T, dt_s)
    raise ValidationError(f"unknown layout {layout!r}")


def _aux_channels(rng, t: np.ndarray, n: int, dt_s: float, anomaly: np.ndarray, noise_scale: float):
    day = 86400.0 / dt_s
    T = len(t)
    temp = (300.0 + 4.0 * np.sin(2 * np.pi * t / day - 1.0))[:, None] + 0.4 * anomaly
    temp = temp + noise_scale * 0.2 * rng.standard_normal((T, n))
    slow = _ar1(rng, T, 0.995, 250.0)
    pres = 100800.0 + slow[:, None] - 40.0 * anomaly + noise_scale * 10.0 * rng.standard_normal((T, n))
    return temp, pres


def _planted(rng, n, T, dt_s, noise_scale) -> Dataset:
    from_dir = float(rng.uniform(0, 360))
    travel = (from_dir + 180.0) % 360.0
    speed = float(rng.uniform(7.5, 9.0))
    step_km = speed * dt_s / 1000.0

    along_idx = np.array([k % 5 for k in range(n)])
    rng.shuffle(along_idx)
    cross_km = (np.arange(n) - (n - 1) / 2) * 6.0 + rng.uniform(-0.5, 0.5, n)
    along_km = along_idx * step_km
    te, tn = _unit(travel)
    east = along_km * te + cross_km * tn
    north = along_km * tn - cross_km * te
    lat, lon = _to_latlon(east, north)
    stations = [StationMeta(f"S{i:02d}", float(lat[i]), float(lon[i])) for i in range(n)]

    pad = int(along_idx.max()) + 1
    g = _ar1(rng, T + pad, 0.95, 1.0)
    speed_obs = np.empty((T, n))
    for i in range(n):
        k = int(along_idx[i])
        speed_obs[:, i] = speed + g[pad - k: pad - k + T]
    # SNR = var(signal) / var(noise) = 1 / 0.25^2 = 16
    speed_obs += noise_scale * 0.25 * rng.standard_normal((T, n))
    speed_obs = np.maximum(speed_obs, 0.0)
    direction = (from_dir + noise_scale * 3.0 * rng.standard_normal((T, n))) % 360.0
    t = np.arange(T, dtype=float)
    temp, pres = _aux_channels(rng, t, n, dt_s, np.zeros((T, n)), noise_scale)
    values = np.stack([speed_obs, direction, temp, pres], axis=-1)
    lags = along_idx[None, :] - along_idx[:, None]
    truth = {"layout": "planted", "lags": lags, "advection_speed": speed, "wind_from_deg": from_dir}
    return Dataset(stations, values, START, dt_s, truth=truth)


def _advection(rng, n, T, dt_s, noise_scale) -> Dataset:
    side = int(math.ceil(math.sqrt(n)))
    spacing = 20.0
    gx, gy = np.meshgrid(np.arange(side), np.arange(side))
    east = (gx.ravel()[:n] - (side - 1) / 2) * spacing + rng.uniform(-2.0, 2.0, n)
    north = (gy.ravel()[:n] - (side - 1) / 2) * spacing + rng.uniform(-2.0, 2.0, n)
    lat, lon = _to_latlon(east, north)
    stations = [StationMeta(f"S{i:02d}", float(lat[i]), float(lon[i])) for i in range(n)]

    adv_speed = 8.0
    day = 86400.0 / dt_s
    t = np.arange(T, dtype=float)
    base_from = float(rng.uniform(200, 250))
    from_dir = base_from + 35.0 * np.sin(2 * np.pi * t / (5 * day) + rng.uniform(0, 2 * np.pi))
    te, tn = _unit((from_dir + 180.0) % 360.0)
    # along-wind coordinate of each station, in steps of advection
    along_steps = (east[None, :] * te[:, None] + north[None, :] * tn[:, None]) * 1000.0 / (adv_speed * dt_s)
    delay = along_steps - along_steps.min()  # >= 0, upwind station has zero delay

    pad = int(math.ceil(delay.max())) + 2
    tt = np.arange(-pad, T, dtype=float)
    phase = rng.uniform(0, 2 * np.pi)
    regional = 1.6 * np.sin(2 * np.pi * tt / day + phase) + _ar1(rng, T + pad, 0.985, 1.3)

    src = t[:, None] - delay + pad  # fractional index into ``regional``
    lo = np.floor(src).astype(int)
    frac = src - lo
    anomaly = (1 - frac) * regional[lo] + frac * regional[lo + 1]

    local = np.stack([_ar1(rng, T, 0.8, 0.6) for _ in range(n)], axis=1)
    white = 0.5 * rng.standard_normal((T, n))
    speed_obs = np.maximum(adv_speed + anomaly + noise_scale * (local + white), 0.0)
    direction = (from_dir[:, None] + noise_scale * 6.0 * rng.standard_normal((T, n))) % 360.0
    temp, pres = _aux_channels(rng, t, n, dt_s, anomaly, noise_scale)
    values = np.stack([speed_obs, direction, temp, pres], axis=-1)
    truth = {"layout": "advection", "delay_steps": delay, "advection_speed": adv_speed}
    return Dataset(stations, values, START, dt_s, truth=truth)


def _independent(rng, n, T, dt_s) -> Dataset:
    side = int(math.ceil(math.sqrt(n)))
    gx, gy = np.meshgrid(np.arange(side), np.arange(side))
    east = (gx.ravel()[:n] - (side - 1) / 2) * 12.0 + rng.uniform(-2.0, 2.0, n)
    north = (gy.ravel()[:n] - (side - 1) / 2) * 12.0 + rng.uniform(-2.0, 2.0, n)
    lat, lon = _to_latlon(east, north)
    stations = [StationMeta(f"S{i:02d}", float(lat[i]), float(lon[i])) for i in range(n)]
    speed_obs = np.maximum(8.0 + rng.standard_normal((T, n)), 0.0)
    direction = rng.uniform(0, 360, (T, n))
    temp = 300.0 + rng.standard_normal((T, n))
    pres = 100800.0 + 50.0 * rng.standard_normal((T, n))
    values = np.stack([speed_obs, direction, temp, pres], axis=-1)
    truth = {"layout": "independent"}
    return Dataset(stations, values, START, dt_s, truth=truth)


def planted_lags(ds: Dataset) -> np.ndarray:
    if ds.truth.get("layout") != "planted":
        raise ValidationError("dataset has no planted lags")
    return ds.truth["lags"]
