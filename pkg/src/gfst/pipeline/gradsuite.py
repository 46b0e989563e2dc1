"""Finite-difference check of every differentiable block at small sizes."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..freqblocks import FEA, FEB, ModeSelection, SelfAttention
from ..gatblock import GraphAttention, gat_layer
from ..model import GFSTModel, ModelConfig, decoder_layer, forward
from ..numerics import Tensor, conv1d
from ..numerics.gradcheck import ZERO_GRAD_ATOL, check_gradients, random_projection_loss
from ..numerics.module import param

BLOCK_TOL = 1e-4
MODEL_TOL = 1e-3


@dataclass
class SuiteEntry:
    block: str
    worst: float
    tol: float
    passed: bool
    seconds: float


def _biases(module, rng):
    # biases, attention outputs and the head start at zero, which would hide upstream paths
    for name, p in module.named_parameters().items():
        leaf = name.rsplit(".", 1)[-1]
        if leaf.startswith("b") or leaf == "wo" or name.startswith("head_"):
            p.data = 0.1 * rng.standard_normal(p.shape)


def _cases(rng):
    x = Tensor(rng.standard_normal((2, 9, 3)))
    k = param(rng.standard_normal((3, 3, 2)))
    yield "conv1d", BLOCK_TOL, lambda: random_projection_loss(conv1d(x, k)), {"x": x, "kernel": k}

    gat = GraphAttention(3, 2, 2, rng)
    a = np.array([[1, 1, 0, 1], [1, 1, 1, 0], [0, 1, 1, 1], [1, 0, 1, 1]])
    h = Tensor(rng.standard_normal((2, 3, 4, 3)))
    yield "gat_layer", BLOCK_TOL, lambda: random_projection_loss(gat_layer(h, gat, a)), {"h": h, **gat.named_parameters()}

    att = SelfAttention(4, 2, rng)
    _biases(att, rng)
    xa = Tensor(rng.standard_normal((2, 5, 4)))
    yield "self_attention", BLOCK_TOL, lambda: random_projection_loss(att(xa)), {"x": xa, **att.named_parameters()}

    feb = FEB(3, 12, ModeSelection(12, 4, 5), rng)
    xf = Tensor(rng.standard_normal((2, 12, 3)))
    yield "feb", BLOCK_TOL, lambda: random_projection_loss(feb(xf)), {"x": xf, **feb.named_parameters()}

    fea = FEA(3, 10, 12, ModeSelection(10, 3, 1), ModeSelection(12, 4, 2), rng)
    _biases(fea, rng)
    xd, xe = Tensor(rng.standard_normal((2, 10, 3))), Tensor(rng.standard_normal((2, 12, 3)))
    yield "fea", BLOCK_TOL, lambda: random_projection_loss(fea(xd, xe)), {"xd": xd, "xe": xe, **fea.named_parameters()}

    cfg = ModelConfig(d_model=8, heads=2, enc_layers=1, dec_layers=1, modes=4, decomp_window=5,
                      input_len=16, label_len=8, horizon=4, gat_heads=2, gat_head_dim=3, seed=1)
    model = GFSTModel(cfg)
    _biases(model, rng)
    layer = model.dec[0]
    X, T, E = (Tensor(rng.standard_normal(s)) for s in ((1, 12, 8), (1, 12, 4), (1, 16, 8)))

    def dec():
        Xo, To = decoder_layer(layer, X, T, E)
        return random_projection_loss(Xo, 1) + random_projection_loss(To, 2)

    yield "decoder_layer", BLOCK_TOL, dec, {"x": X, "T": T, "xe": E, **layer.named_parameters()}

    xm = Tensor(rng.standard_normal((2, 16, 3, 4)))
    am = np.array([[1, 1, 0], [1, 1, 1], [0, 1, 1]])
    bm = np.array([[0, 1, 0], [-1, 0, 2], [0, -2, 0]])
    yield ("full_model", MODEL_TOL, lambda: random_projection_loss(forward(model, xm, (am, bm))),
           {"x": xm, **model.named_parameters()})


def run_suite(seed: int = 0, max_coords: int = 8) -> list[SuiteEntry]:
    rng = np.random.default_rng(seed)
    out = []
    for name, tol, fn, params in _cases(rng):
        t0 = time.perf_counter()
        res = check_gradients(fn, params, max_coords=max_coords, seed=seed)
        bad = [r for r in res if not r.passed(tol)]
        # tensors with an identically zero gradient carry no relative information
        worst = max((r.rel_error for r in res if r.scale > ZERO_GRAD_ATOL), default=0.0)
        out.append(SuiteEntry(name, worst, tol, not bad, time.perf_counter() - t0))
    return out
