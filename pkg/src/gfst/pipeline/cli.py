"""Command-line entry point: ``gfst <subcommand> [options]``.

Exit codes: 0 success, 1 validation or configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..errors import ConfigError, NumericalError, ValidationError
from ..graphbuild import GraphConfig, build_adjacency, export_adjacency
from ..model import forecast, load_checkpoint
from ..numerics.checkpoint import CheckpointError
from .config import RunConfig, config_from_dict, load_config, mini_config
from .data import Dataset, export_csv, load_csv
from .evaluate import evaluate, target_stats
from .gradsuite import run_suite
from .stability import stability_run
from .synth import synth_generate
from .train import save_run, train

log = logging.getLogger("gfst")


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else mini_config()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "horizon", None) is not None:
        cfg = cfg.with_horizon(args.horizon)
    if getattr(args, "ablation", None):
        cfg = cfg.with_ablation(args.ablation)
    return cfg


def _dataset(cfg: RunConfig) -> Dataset:
    d = cfg.data
    if d.source == "csv":
        return load_csv(d.csv_path, d.stations_path)
    return synth_generate(d.n_stations, d.n_steps, d.dt_s, seed=d.seed, layout=d.layout, noise_scale=d.noise_scale)


def _out(args, default: str) -> Path:
    out = Path(args.out or default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def cmd_synth(args) -> int:
    cfg = _run_config(args)
    seed = args.seed if args.seed is not None else cfg.data.seed
    d = cfg.data
    ds = synth_generate(d.n_stations, d.n_steps, d.dt_s, seed=seed, layout=args.layout or d.layout,
                        noise_scale=d.noise_scale)
    out = _out(args, "synth_out")
    export_csv(ds, out / "data.csv", out / "stations.csv")
    truth = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in ds.truth.items()}
    _write_json(out / "truth.json", {"seed": seed, "config_hash": cfg.digest(), **truth})
    print(f"wrote {ds.n_stations} stations x {ds.n_steps} steps to {out}")
    return 0


def cmd_build_graph(args) -> int:
    cfg = _run_config(args)
    ds = _dataset(cfg)
    end = args.at if args.at is not None else ds.n_steps
    if not cfg.graph.window_len <= end <= ds.n_steps:
        raise ValidationError(f"--at {end} must lie in [{cfg.graph.window_len}, {ds.n_steps}]")
    adj = build_adjacency(ds.values[:end], ds.stations, cfg.graph, ds.dt_s)
    out = _out(args, "graph_out")
    export_adjacency(adj, out / "adjacency.csv", cfg.graph,
                     {"config_hash": cfg.digest(), "seed": cfg.train.seed, "window_end": end,
                      "stations": [s.id for s in ds.stations]})
    print(f"{int(adj.a.sum() - adj.n)} directed edges; wrote {out / 'adjacency.csv'}")
    return 0


def cmd_train(args) -> int:
    cfg = _run_config(args)
    ds = _dataset(cfg)
    result = train(cfg, ds)
    out = _out(args, "train_out")
    save_run(result, cfg, out / "model.ckpt")
    _write_json(out / "loss_curve.json", result.curve_doc(cfg))
    _write_json(out / "config.json", cfg.to_dict())
    print(f"best epoch {result.best_epoch}: val MSE {result.best_val:.5f}; wrote {out / 'model.ckpt'}")
    return 0


def _load(path) -> tuple:
    model, header = load_checkpoint(path)
    cfg = config_from_dict(header["run_config"]) if "run_config" in header else RunConfig(model=model.cfg)
    return model, header, cfg


def cmd_evaluate(args) -> int:
    if not args.checkpoint:
        raise ConfigError("evaluate needs at least one --checkpoint")
    models, first = {}, None
    for path in args.checkpoint:
        model, header, cfg = _load(path)
        first = first or (cfg, header)
        name = Path(path).stem if len(args.checkpoint) > 1 else "GFST-WSF"
        models[name] = model
    cfg, header = first
    if args.config:
        cfg = load_config(args.config)
    ds = _dataset(cfg)
    report = evaluate(models, ds, cfg.graph, stride=cfg.data.eval_stride,
                      meta={"config_hash": header.get("config_hash"), "seed": header.get("seed")})
    if args.no_timing:
        report.meta.pop("wall_time_s", None)
    out = _out(args, "eval_out")
    report.write(out)
    print(report.table(), end="")
    return 0


def cmd_gradcheck(args) -> int:
    entries = run_suite(seed=args.seed or 0)
    width = max(len(e.block) for e in entries)
    for e in entries:
        print(f"{e.block.ljust(width)}  {'PASS' if e.passed else 'FAIL'}  worst rel err {e.worst:.2e} "
              f"(tol {e.tol:.0e}, {e.seconds:.1f}s)")
    if not all(e.passed for e in entries):
        raise NumericalError("gradient check failed")
    return 0


def cmd_stability(args) -> int:
    cfg = _run_config(args)
    ds = _dataset(cfg)
    rep = stability_run(cfg, ds, n_instances=args.instances)
    out = _out(args, "stability_out")
    _write_json(out / "stability.json", {"config_hash": cfg.digest(), **rep.to_dict()})
    (out / "stability.txt").write_text(rep.table())
    print(rep.table(), end="")
    return 0


def cmd_forecast(args) -> int:
    if not args.checkpoint:
        raise ConfigError("forecast needs --checkpoint")
    model, header, cfg = _load(args.checkpoint[0])
    if args.config:
        cfg = load_config(args.config)
    ds = _dataset(cfg)
    t = args.at if args.at is not None else ds.n_steps
    I = model.cfg.input_len
    if not I <= t <= ds.n_steps:
        raise ValidationError(f"insufficient history: origin {t} needs {I} prior steps")
    x = ds.normalized()[None, t - I:t]
    adj = None
    if model.cfg.use_gat:
        adj = build_adjacency(ds.values[:t], ds.stations, cfg.graph, ds.dt_s)
        adj = (adj.a, adj.b)
    mean, std = target_stats(ds, model.cfg.target)
    fc = forecast(model, x, adj, mean, std)
    doc = {"config_hash": header.get("config_hash"), "seed": header.get("seed"), "origin_index": t,
           "target_station": ds.stations[model.cfg.target].id, "normalized": fc.normalized[0].tolist(),
           "wind_speed_mps": fc.physical[0].tolist()}
    out = _out(args, "forecast_out")
    _write_json(out / "forecast.json", doc)
    print(" ".join(f"{v:.3f}" for v in doc["wind_speed_mps"]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gfst", description="Graph-attentive frequency-enhanced wind speed forecasting")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, horizon=True, ablation=True):
        sp.add_argument("--config", help="JSON run configuration (defaults to the mini preset)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        if horizon:
            sp.add_argument("--horizon", type=int)
        if ablation:
            sp.add_argument("--ablation", choices=["none", "no-gat", "no-selfattn"])
        return sp

    s = common(sub.add_parser("synth", help="emit a synthetic dataset"), horizon=False, ablation=False)
    s.add_argument("--layout", choices=["advection", "planted", "independent"])
    s.set_defaults(fn=cmd_synth)
    s = common(sub.add_parser("build-graph", help="emit the complex adjacency as CSV + JSON"), False, False)
    s.add_argument("--at", type=int, help="build from the window ending before this step index")
    s.set_defaults(fn=cmd_build_graph)
    common(sub.add_parser("train", help="train a model")).set_defaults(fn=cmd_train)
    s = common(sub.add_parser("evaluate", help="rolling evaluation on the test split"), False, False)
    s.add_argument("--checkpoint", nargs="+")
    s.add_argument("--no-timing", action="store_true", help="omit wall time so reports are byte-reproducible")
    s.set_defaults(fn=cmd_evaluate)
    s = sub.add_parser("gradcheck", help="finite-difference suite; nonzero exit on failure")
    s.add_argument("--seed", type=int)
    s.set_defaults(fn=cmd_gradcheck)
    s = common(sub.add_parser("stability", help="multi-seed harness"))
    s.add_argument("--instances", type=int, default=10)
    s.set_defaults(fn=cmd_stability)
    s = common(sub.add_parser("forecast", help="one-shot inference from a checkpoint"), False, False)
    s.add_argument("--checkpoint", nargs=1)
    s.add_argument("--at", type=int, help="forecast origin (step index); defaults to the end of the data")
    s.set_defaults(fn=cmd_forecast)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, ConfigError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
