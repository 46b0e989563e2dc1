"""Encoder/decoder forecaster built from the graph, frequency and decomposition blocks.

The model reads a window ``x`` of shape ``[B, I, n, F]`` (all stations, F
meteorological features, normalized) and emits ``[B, O]`` normalized wind
speed forecasts for one target station.

Layout of one forward pass::

    enc:  X_en^0 = Conv1D(GAT(x))                           [B, I, D]
          I      = Attn(X) + X
          S1, _  = decomp(FEB(I) + I)
          X'     = decomp(FF(S1) + S1).seasonal
    dec:  S_de^0 = concat(seasonal(x[-label:]), zeros(O))  all stations
          T_de^0 = concat(trend(x[-label:, target]), mean trend repeated O times)
          X_de^0 = Conv1D(GAT(S_de^0))                      [B, L, D], L = label + O
          per layer: Attn + FEB + FEA + FF, each followed by decomp; trends
          are projected to F channels and accumulated into T.
    head: y = (S_final @ w_s + T_final @ w_t)[-O:]
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError, ValidationError
from .freqblocks import FEA, FEB, ModeSelection, SelfAttention, default_mode_count, series_decomp
from .gatblock import GraphAttention, gat_block
from .graphbuild import ComplexAdjacency
from .numerics import Tensor, as_tensor, concat, conv1d, gelu, linear, no_grad
from .numerics import checkpoint as ckpt
from .numerics.module import Module, glorot, param

N_FEATURES = 4


@dataclass(frozen=True)
class ModelConfig:
    d_model: int = 64
    heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 1
    modes: int = 32
    decomp_window: int = 25
    input_len: int = 96
    label_len: int = 48
    horizon: int = 24
    target: int = 0
    use_gat: bool = True
    use_self_attention: bool = True
    gat_heads: int = 4
    gat_head_dim: int = 8
    conv_width: int = 3
    ff_mult: int = 4
    n_features: int = N_FEATURES
    seed: int = 0

    def __post_init__(self):
        positive = ("d_model", "heads", "enc_layers", "dec_layers", "modes", "decomp_window",
                    "input_len", "label_len", "horizon", "gat_heads", "gat_head_dim", "conv_width",
                    "ff_mult", "n_features")
        for name in positive:
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"model.{name} must be a positive integer, got {v!r}")
        if self.label_len > self.input_len:
            raise ConfigError(f"label length {self.label_len} exceeds input length {self.input_len}")
        if self.d_model % self.heads:
            raise ConfigError(f"d_model {self.d_model} is not divisible by {self.heads} heads")
        if self.decomp_window % 2 == 0 or self.conv_width % 2 == 0:
            raise ConfigError("decomposition window and conv width must be odd")
        if self.target < 0:
            raise ConfigError(f"target index must be non-negative, got {self.target}")

    @property
    def dec_len(self) -> int:
        return self.label_len + self.horizon

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown model config keys: {unknown}")
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class ForecastOutput:
    normalized: np.ndarray  # [B, O]
    physical: np.ndarray    # [B, O], m/s

    def __post_init__(self):
        if not (np.all(np.isfinite(self.normalized)) and np.all(np.isfinite(self.physical))):
            raise ValidationError("forecast contains non-finite values")

    @property
    def horizon(self) -> int:
        return self.normalized.shape[-1]


class FeedForward(Module):
    def __init__(self, d_model: int, inner: int, rng: np.random.Generator):
        self.w1 = glorot(rng, d_model, inner)
        self.b1 = param(np.zeros(inner))
        self.w2 = glorot(rng, inner, d_model)
        self.b2 = param(np.zeros(d_model))

    def __call__(self, x: Tensor) -> Tensor:
        return linear(gelu(linear(x, self.w1, self.b1)), self.w2, self.b2)


def _residual_attention(cfg: ModelConfig, rng: np.random.Generator) -> SelfAttention | None:
    if not cfg.use_self_attention:
        return None
    attn = SelfAttention(cfg.d_model, cfg.heads, rng)
    # zero output projection: the residual branch starts as the identity
    attn.wo.data = np.zeros_like(attn.wo.data)
    return attn


class EncoderLayer(Module):
    def __init__(self, cfg: ModelConfig, modes: ModeSelection, rng: np.random.Generator):
        D = cfg.d_model
        self.attn = _residual_attention(cfg, rng)
        self.feb = FEB(D, cfg.input_len, modes, rng)
        self.ff = FeedForward(D, cfg.ff_mult * D, rng)
        self._window = cfg.decomp_window


class DecoderLayer(Module):
    def __init__(self, cfg: ModelConfig, modes: ModeSelection, modes_enc: ModeSelection,
                 rng: np.random.Generator):
        D, F = cfg.d_model, cfg.n_features
        self.attn = _residual_attention(cfg, rng)
        self.feb = FEB(D, cfg.dec_len, modes, rng)
        self.fea = FEA(D, cfg.dec_len, cfg.input_len, modes, modes_enc, rng)
        self.ff = FeedForward(D, cfg.ff_mult * D, rng)
        self.W1 = glorot(rng, D, F)
        self.W2 = glorot(rng, D, F)
        self.W3 = glorot(rng, D, F)
        self._window = cfg.decomp_window


def encoder_layer(layer: EncoderLayer, X: Tensor) -> Tensor:
    I = X + layer.attn(X) if layer.attn is not None else X
    s1 = series_decomp(layer.feb(I) + I, layer._window).seasonal
    return series_decomp(layer.ff(s1) + s1, layer._window).seasonal


def decoder_layer(layer: DecoderLayer, X: Tensor, T: Tensor, X_enc: Tensor) -> tuple[Tensor, Tensor]:
    I = X + layer.attn(X) if layer.attn is not None else X
    p1 = series_decomp(layer.feb(I) + I, layer._window)
    p2 = series_decomp(layer.fea(p1.seasonal, X_enc) + p1.seasonal, layer._window)
    p3 = series_decomp(layer.ff(p2.seasonal) + p2.seasonal, layer._window)
    T = T + p1.trend @ layer.W1 + p2.trend @ layer.W2 + p3.trend @ layer.W3
    return p3.seasonal, T


def init_decoder_inputs(x: Tensor, cfg: ModelConfig) -> tuple[Tensor, Tensor]:
    """Seasonal context [B, L, n, F] (all stations) and trend context [B, L, F] (target).

    The last ``label_len`` steps are decomposed; the seasonal part is padded
    with O zeros and the target's trend with O copies of its mean.
    """
    x = as_tensor(x)
    if x.shape[1] < cfg.label_len:
        raise ValidationError(f"window of {x.shape[1]} steps is shorter than label length {cfg.label_len}")
    B, _, n, F = x.shape
    seg = x[:, x.shape[1] - cfg.label_len:]
    # decompose along time with stations folded into the channel axis
    pair = series_decomp(seg.reshape(B, cfg.label_len, n * F), cfg.decomp_window)
    seasonal = pair.seasonal.reshape(B, cfg.label_len, n, F)
    trend_t = pair.trend.reshape(B, cfg.label_len, n, F)[:, :, cfg.target]
    s0 = concat([seasonal, Tensor(np.zeros((B, cfg.horizon, n, F)))], axis=1)
    mean = trend_t.mean(axis=1, keepdims=True)
    t0 = concat([trend_t, mean * Tensor(np.ones((1, cfg.horizon, 1)))], axis=1)
    return s0, t0


class GFSTModel(Module):
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        D, F = cfg.d_model, cfg.n_features
        m_enc = ModeSelection(cfg.input_len, default_mode_count(cfg.input_len, cfg.modes), cfg.seed * 1000 + 1)
        m_dec = ModeSelection(cfg.dec_len, default_mode_count(cfg.dec_len, cfg.modes), cfg.seed * 1000 + 2)
        self._modes_enc, self._modes_dec = m_enc, m_dec
        if cfg.use_gat:
            self.gat = GraphAttention(F, cfg.gat_head_dim, cfg.gat_heads, rng)
            d_emb = self.gat.d_out
        else:
            self.gat = None
            d_emb = F
        w = cfg.conv_width
        self.enc_conv = glorot(rng, w * d_emb, D, shape=(w, d_emb, D))
        self.dec_conv = glorot(rng, w * d_emb, D, shape=(w, d_emb, D))
        self.enc = [EncoderLayer(cfg, m_enc, rng) for _ in range(cfg.enc_layers)]
        self.dec = [DecoderLayer(cfg, m_dec, m_enc, rng) for _ in range(cfg.dec_layers)]
        # zero head: every seed starts from the climatological (normalized mean) forecast
        self.head_s = param(np.zeros((D, 1)))
        self.head_t = param(np.zeros((F, 1)))
        self.head_b = param(np.zeros(1))

    def _embed(self, x: Tensor, adj, kernel: Tensor) -> Tensor:
        if self.gat is not None:
            h = gat_block(x, adj, self.gat, self.cfg.target)
        else:
            h = x[:, :, self.cfg.target]
        return conv1d(h, kernel)

    def __call__(self, x, adj) -> Tensor:
        return forward(self, x, adj)


def _check_window(model: GFSTModel, x: Tensor, adj) -> tuple:
    cfg = model.cfg
    if x.ndim != 4:
        raise ValidationError(f"window must be [B, I, n, F], got {x.shape}")
    B, I, n, F = x.shape
    if I < cfg.input_len:
        raise ValidationError(f"insufficient history: need {cfg.input_len} steps, got {I}")
    if F != cfg.n_features:
        raise ValidationError(f"expected {cfg.n_features} features, got {F}")
    if cfg.target >= n:
        raise ValidationError(f"target index {cfg.target} out of range for {n} stations")
    if adj is None:
        a, b = np.ones((n, n), dtype=np.int64), np.zeros((n, n), dtype=np.int64)
    else:
        a, b = (adj.a, adj.b) if isinstance(adj, ComplexAdjacency) else adj
    if np.shape(a)[-1] != n:
        raise ValidationError(f"adjacency is for {np.shape(a)[-1]} stations, window has {n}")
    return a, b


def embed_encoder(model: GFSTModel, x, adj) -> Tensor:
    x = as_tensor(x)
    a, b = _check_window(model, x, adj)
    x = x[:, x.shape[1] - model.cfg.input_len:]
    return model._embed(x, (a, b), model.enc_conv)


def forward(model: GFSTModel, x, adj) -> Tensor:
    """Normalized target wind speed forecasts [B, O]."""
    cfg = model.cfg
    x = as_tensor(x)
    a, b = _check_window(model, x, adj)
    x = x[:, x.shape[1] - cfg.input_len:]
    X = model._embed(x, (a, b), model.enc_conv)
    for layer in model.enc:
        X = encoder_layer(layer, X)
    s0, T = init_decoder_inputs(x, cfg)
    Xd = model._embed(s0, (a, b), model.dec_conv)
    for layer in model.dec:
        Xd, T = decoder_layer(layer, Xd, T, X)
    y = Xd @ model.head_s + T @ model.head_t + model.head_b  # [B, L, 1]
    B = y.shape[0]
    return y[:, cfg.label_len:, 0].reshape(B, cfg.horizon)


def forecast(model: GFSTModel, x, adj, mean: float, std: float) -> ForecastOutput:
    """Inference without graph recording; ``mean``/``std`` de-normalize the target speed."""
    with no_grad():
        y = forward(model, x, adj).data
    return ForecastOutput(y.copy(), y * std + mean)


# -- persistence -----------------------------------------------------------------

def save_checkpoint(model: GFSTModel, path, extra: dict | None = None) -> None:
    header = {"model": model.cfg.to_dict(), "config_hash": model.cfg.digest()}
    if extra:
        header.update(extra)
    ckpt.save(path, model.state_dict(), header)


def load_checkpoint(path) -> tuple[GFSTModel, dict]:
    tensors, header = ckpt.load(path)
    if not header or "model" not in header:
        raise ConfigError(f"{path}: checkpoint header carries no model config")
    cfg = ModelConfig.from_dict(header["model"])
    model = GFSTModel(cfg)
    model.load_state_dict(tensors)
    return model, header


__all__ = [
    "DecoderLayer", "EncoderLayer", "FeedForward", "ForecastOutput", "GFSTModel", "ModelConfig",
    "decoder_layer", "embed_encoder", "encoder_layer", "forecast", "forward",
    "init_decoder_inputs", "load_checkpoint", "save_checkpoint",
]
