"""Forecast windows over a dataset split, with the dynamic graph rebuilt on a fixed grid.

A window is identified by its origin ``t``: the model sees normalized
records ``[t - I, t)`` and predicts the target's wind speed over
``[t, t + O)``. The graph used at origin ``t`` is built from the raw records
``[r - W, r)`` where ``r = t - t % refresh_every``, so it only ever looks at
the past and changes every ``refresh_every`` steps.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from ..graphbuild import SPEED, ComplexAdjacency, GraphConfig, build_adjacency
from ..model import ModelConfig
from .data import Dataset


class AdjacencyCache:
    def __init__(self, ds: Dataset, cfg: GraphConfig):
        self.ds, self.cfg = ds, cfg
        self._cache: dict[int, ComplexAdjacency] = {}

    def refresh_point(self, t: int) -> int:
        return t - t % self.cfg.refresh_every

    def earliest_origin(self) -> int:
        """Smallest origin whose refresh point has a full graph window behind it."""
        r = self.cfg.window_len
        step = self.cfg.refresh_every
        return -(-r // step) * step

    def at(self, t: int) -> ComplexAdjacency:
        r = self.refresh_point(t)
        if r < self.cfg.window_len:
            raise ValidationError(f"origin {t}: only {r} steps of history for a {self.cfg.window_len}-step graph")
        adj = self._cache.get(r)
        if adj is None:
            adj = build_adjacency(self.ds.values[r - self.cfg.window_len:r], self.ds.stations, self.cfg,
                                  self.ds.dt_s)
            self._cache[r] = adj
        return adj

    def batch(self, origins: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        adjs = [self.at(int(t)) for t in origins]
        return np.stack([a.a for a in adjs]), np.stack([a.b for a in adjs])


class WindowSet:
    """All admissible origins of one split plus batch assembly."""

    def __init__(self, ds: Dataset, model_cfg: ModelConfig, graph_cfg: GraphConfig, split: str,
                 stride: int = 1, adjacency: AdjacencyCache | None = None):
        if split not in ("train", "val", "test"):
            raise ValidationError(f"unknown split {split!r}")
        if model_cfg.target >= ds.n_stations:
            raise ValidationError(f"target index {model_cfg.target} out of range for {ds.n_stations} stations")
        self.ds, self.cfg, self.split = ds, model_cfg, split
        self.need_graph = model_cfg.use_gat
        self.adjacency = adjacency or AdjacencyCache(ds, graph_cfg)
        self.z = ds.normalized()
        lo, hi = ds.segments()[split]
        I, O = model_cfg.input_len, model_cfg.horizon
        first = lo + I  # inputs stay inside the split
        if self.need_graph:
            first = max(first, self.adjacency.earliest_origin())
        last = hi - O
        if last < first:
            raise ValidationError(f"{split} split [{lo}, {hi}) is too short for input {I} + horizon {O}")
        self.origins = np.arange(first, last + 1, stride)

    def __len__(self) -> int:
        return len(self.origins)

    def inputs(self, origins: np.ndarray) -> np.ndarray:
        I = self.cfg.input_len
        return np.stack([self.z[t - I:t] for t in origins])

    def targets(self, origins: np.ndarray) -> np.ndarray:
        O, k = self.cfg.horizon, self.cfg.target
        return np.stack([self.z[t:t + O, k, SPEED] for t in origins])

    def last_observed(self, origins: np.ndarray) -> np.ndarray:
        return self.z[np.asarray(origins) - 1, self.cfg.target, SPEED]

    def graph(self, origins: np.ndarray):
        if not self.need_graph:
            return None
        return self.adjacency.batch(origins)

    def batches(self, batch_size: int, origins: np.ndarray | None = None):
        origins = self.origins if origins is None else origins
        for k in range(0, len(origins), batch_size):
            o = origins[k:k + batch_size]
            yield o, self.inputs(o), self.targets(o), self.graph(o)
