"""Run configuration: one JSON document with ``graph``, ``model``, ``train`` and ``data`` sections."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..errors import ConfigError
from ..graphbuild import GraphConfig
from ..model import ModelConfig

SECTIONS = ("graph", "model", "train", "data")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 5
    steps_per_epoch: int = 0  # 0 means one full pass over the training windows
    val_stride: int = 4
    grad_clip: float = 0.0     # 0 disables clipping
    schedule: str = "constant"  # or "cosine": decay to lr_floor * lr over the step budget
    lr_floor: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in ("epochs", "batch_size", "patience", "val_stride"):
            if getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must be positive")
        if self.steps_per_epoch < 0 or self.grad_clip < 0:
            raise ConfigError("train.steps_per_epoch and train.grad_clip must be non-negative")
        if self.schedule not in ("constant", "cosine") or not 0 <= self.lr_floor <= 1:
            raise ConfigError("train.schedule must be 'constant' or 'cosine' with lr_floor in [0, 1]")
        if not self.lr > 0 or not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1 or not self.eps > 0:
            raise ConfigError("invalid optimizer settings")


@dataclass(frozen=True)
class DataConfig:
    source: str = "synth"          # "synth" or "csv"
    csv_path: str = ""
    stations_path: str = ""
    layout: str = "advection"
    n_stations: int = 9
    n_steps: int = 6000
    dt_s: float = 900.0
    noise_scale: float = 1.0
    seed: int = 0
    eval_stride: int = 1

    def __post_init__(self):
        if self.source not in ("synth", "csv"):
            raise ConfigError(f"data.source must be 'synth' or 'csv', got {self.source!r}")
        if self.source == "csv" and not (self.csv_path and self.stations_path):
            raise ConfigError("data.csv_path and data.stations_path are required for csv input")
        if self.eval_stride < 1:
            raise ConfigError("data.eval_stride must be positive")


@dataclass(frozen=True)
class RunConfig:
    graph: GraphConfig = field(default_factory=GraphConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)

    def to_dict(self) -> dict:
        return {s: asdict(getattr(self, s)) for s in SECTIONS}

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, model=replace(self.model, seed=seed), train=replace(self.train, seed=seed))

    def with_horizon(self, horizon: int) -> "RunConfig":
        return replace(self, model=replace(self.model, horizon=horizon))

    def with_ablation(self, ablation: str) -> "RunConfig":
        flags = {"none": (True, True), "no-gat": (False, False), "no-selfattn": (True, False)}
        if ablation not in flags:
            raise ConfigError(f"unknown ablation {ablation!r}; choose from {sorted(flags)}")
        use_gat, use_attn = flags[ablation]
        return replace(self, model=replace(self.model, use_gat=use_gat, use_self_attention=use_attn))


def _section(cls, raw, name: str):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"config section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {unknown}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc


def config_from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown config sections: {unknown}")
    classes = (GraphConfig, ModelConfig, TrainConfig, DataConfig)
    return RunConfig(*(_section(cls, doc.get(name), name) for name, cls in zip(SECTIONS, classes)))


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(doc)


def save_config(cfg: RunConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def mini_config(seed: int = 0, horizon: int = 24) -> RunConfig:
    """Desk-scale preset used by the acceptance suite and the stability harness.

    About 70 s of single-core training per seed on the default synthetic set.
    """
    model = ModelConfig(d_model=16, heads=2, enc_layers=1, dec_layers=1, modes=8, decomp_window=25,
                        input_len=48, label_len=24, horizon=horizon, target=8, gat_heads=2,
                        gat_head_dim=4, seed=seed)
    train = TrainConfig(epochs=20, batch_size=32, lr=2e-3, patience=20, steps_per_epoch=40,
                        val_stride=4, schedule="cosine", seed=seed)
    return RunConfig(GraphConfig(), model, train, DataConfig(eval_stride=1))
