"""Rolling-window evaluation, the persistence baseline and the report format."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ValidationError
from ..graphbuild import SPEED, GraphConfig
from ..model import ForecastOutput, GFSTModel, forward
from ..numerics import no_grad
from .data import Dataset
from .windows import WindowSet

MIN_TEST_WINDOWS = 50


def mse(pred: np.ndarray, truth: np.ndarray) -> float:
    pred, truth = np.asarray(pred, float), np.asarray(truth, float)
    if pred.shape != truth.shape:
        raise ValidationError(f"prediction {pred.shape} and truth {truth.shape} differ in shape")
    return float(np.mean((pred - truth) ** 2))


def mae(pred: np.ndarray, truth: np.ndarray) -> float:
    pred, truth = np.asarray(pred, float), np.asarray(truth, float)
    if pred.shape != truth.shape:
        raise ValidationError(f"prediction {pred.shape} and truth {truth.shape} differ in shape")
    return float(np.mean(np.abs(pred - truth)))


def persistence_forecast(window: np.ndarray, horizon: int, mean: float = 0.0, std: float = 1.0) -> ForecastOutput:
    """Repeat the last observed target value. ``window`` is the target's normalized speed history."""
    window = np.asarray(window, float)
    if window.size == 0:
        raise ValidationError("persistence needs at least one observation")
    last = window[..., -1:]
    y = np.repeat(last, horizon, axis=-1)
    return ForecastOutput(y, y * std + mean)


@dataclass
class EvalRow:
    model: str
    horizon: int
    mse: float
    mae: float
    n_windows: int


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "meta": self.meta}

    def get(self, model: str, horizon: int) -> EvalRow:
        for r in self.rows:
            if r.model == model and r.horizon == horizon:
                return r
        raise KeyError((model, horizon))

    def table(self) -> str:
        """Models as rows, horizons as column pairs (MSE, MAE)."""
        horizons = sorted({r.horizon for r in self.rows})
        models = list(dict.fromkeys(r.model for r in self.rows))
        head = ["Model"] + [f"{k}@{h}" for h in horizons for k in ("MSE", "MAE")]
        lines = [head]
        for m in models:
            cells = [m]
            for h in horizons:
                try:
                    r = self.get(m, h)
                    cells += [f"{r.mse:.4f}", f"{r.mae:.4f}"]
                except KeyError:
                    cells += ["-", "-"]
            lines.append(cells)
        widths = [max(len(row[c]) for row in lines) for c in range(len(head))]
        fmt = lambda row: "  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths)))
        out = [fmt(lines[0]), "  ".join("-" * w for w in widths)] + [fmt(r) for r in lines[1:]]
        return "\n".join(out) + "\n"

    def write(self, out_dir) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        j, t = out_dir / "report.json", out_dir / "report.txt"
        j.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        t.write_text(self.table())
        return j, t


def predict_windows(model: GFSTModel, windows: WindowSet, batch_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    preds, truths = [], []
    with no_grad():
        for _, x, y, adj in windows.batches(batch_size):
            preds.append(forward(model, x, adj).data)
            truths.append(y)
    return np.concatenate(preds), np.concatenate(truths)


def evaluate(models: dict[str, GFSTModel], ds: Dataset, graph_cfg: GraphConfig, stride: int = 1,
             meta: dict | None = None) -> EvalReport:
    """Test-split MSE/MAE for each named model and for persistence at each model's horizon."""
    t0 = time.perf_counter()
    report = EvalReport(meta=dict(meta or {}))
    done_persistence = set()
    for name, model in models.items():
        w = WindowSet(ds, model.cfg, graph_cfg, "test", stride=stride)
        if len(w) < MIN_TEST_WINDOWS:
            raise ValidationError(f"test split yields {len(w)} windows, need at least {MIN_TEST_WINDOWS}")
        pred, truth = predict_windows(model, w)
        h = model.cfg.horizon
        report.rows.append(EvalRow(name, h, mse(pred, truth), mae(pred, truth), len(w)))
        if h not in done_persistence:
            pers = persistence_forecast(w.last_observed(w.origins)[:, None], h).normalized
            report.rows.append(EvalRow("Persistence", h, mse(pers, truth), mae(pers, truth), len(w)))
            done_persistence.add(h)
    report.meta["wall_time_s"] = round(time.perf_counter() - t0, 3)
    return report


def target_stats(ds: Dataset, target: int) -> tuple[float, float]:
    return float(ds.stats.mean[target, SPEED]), float(ds.stats.std[target, SPEED])
