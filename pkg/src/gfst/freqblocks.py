"""Transformer-side blocks: series decomposition, the frequency enhanced block,
frequency enhanced cross-attention, and canonical multi-head self-attention.

All blocks take ``[B, L, D]`` tensors (batch, time, channel).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .numerics import (
    ComplexTensor,
    Tensor,
    avgpool_padded,
    complex_einsum,
    complex_mul_kernel,
    dft,
    irfft_modes,
    linear,
    matmul,
    softmax,
)
from .numerics.module import Module, glorot, param


class ModeSelection:
    """A frozen, seeded subset of one-sided Fourier bins of a length-``n`` series.

    Bins are drawn uniformly without replacement from [0, n//2], always
    keeping bin 0. ``m = n//2 + 1`` selects every bin.
    """

    def __init__(self, n: int, m: int, seed: int):
        top = n // 2 + 1
        if not 1 <= m <= top:
            raise ConfigError(f"mode count {m} must lie in [1, {top}] for length {n}")
        rng = np.random.default_rng(seed)
        rest = rng.choice(np.arange(1, top), size=m - 1, replace=False) if m > 1 else np.array([], int)
        idx = np.sort(np.concatenate([[0], rest]).astype(np.int64))
        idx.setflags(write=False)
        self.n = n
        self.indices = idx

    @property
    def m(self) -> int:
        return len(self.indices)

    def __repr__(self) -> str:
        return f"ModeSelection(n={self.n}, indices={self.indices.tolist()})"


def default_mode_count(n: int, cap: int = 32) -> int:
    return max(1, min(cap, n // 2))


@dataclass
class DecompPair:
    seasonal: Tensor
    trend: Tensor


def series_decomp(x: Tensor, window: int) -> DecompPair:
    trend = avgpool_padded(x, window)
    return DecompPair(x - trend, trend)


class FEB(Module):
    """Project, keep selected Fourier modes, mix channels per mode with a
    complex kernel, zero-pad and invert."""

    def __init__(self, d_model: int, length: int, modes: ModeSelection, rng: np.random.Generator):
        if modes.n != length:
            raise ConfigError(f"mode selection built for length {modes.n}, block length {length}")
        self.d_model, self.length, self.modes = d_model, length, modes
        M = modes.m
        self.w = glorot(rng, d_model, d_model)
        scale = 1.0 / (d_model * np.sqrt(M))
        self.R = _ComplexParam(rng.standard_normal((d_model, d_model, M)) * scale,
                               rng.standard_normal((d_model, d_model, M)) * scale)

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[-2:] != (self.length, self.d_model):
            raise DimensionError(f"FEB expects [..., {self.length}, {self.d_model}], got {x.shape}")
        q = x @ self.w
        Q = dft(q).take_modes(self.modes.indices)
        Y = complex_mul_kernel(Q, self.R.value)
        return irfft_modes(Y, self.modes.indices, self.length)


class _ComplexParam(Module):
    def __init__(self, re: np.ndarray, im: np.ndarray):
        self.re = param(re)
        self.im = param(im)

    @property
    def value(self) -> ComplexTensor:
        return ComplexTensor(self.re, self.im)


class FEA(Module):
    """Cross-attention on selected Fourier modes; queries from the decoder,
    keys and values from the encoder."""

    def __init__(self, d_model: int, len_q: int, len_kv: int, modes_q: ModeSelection,
                 modes_kv: ModeSelection, rng: np.random.Generator):
        if modes_q.n != len_q or modes_kv.n != len_kv:
            raise ConfigError("FEA mode selections must match the query and key/value lengths")
        self.d_model, self.len_q, self.len_kv = d_model, len_q, len_kv
        self.modes_q, self.modes_kv = modes_q, modes_kv
        self.wq = glorot(rng, d_model, d_model)
        self.wk = glorot(rng, d_model, d_model)
        self.wv = glorot(rng, d_model, d_model)
        self.bq = param(np.zeros(d_model))
        self.bk = param(np.zeros(d_model))
        self.bv = param(np.zeros(d_model))
        # orthonormal-DFT scaling of both spectra plus the usual 1/sqrt(d)
        self.score_scale = 1.0 / np.sqrt(d_model * len_q * len_kv)

    def __call__(self, x_dec: Tensor, x_enc: Tensor) -> Tensor:
        if x_dec.shape[-2:] != (self.len_q, self.d_model) or x_enc.shape[-2:] != (self.len_kv, self.d_model):
            raise DimensionError(f"FEA got query {x_dec.shape} and key/value {x_enc.shape}")
        q = linear(x_dec, self.wq, self.bq)
        k = linear(x_enc, self.wk, self.bk)
        v = linear(x_enc, self.wv, self.bv)
        Q = dft(q).take_modes(self.modes_q.indices)
        K = dft(k).take_modes(self.modes_kv.indices)
        V = dft(v).take_modes(self.modes_kv.indices)
        S = complex_einsum("bmd,bnd->bmn", Q, K)
        S = ComplexTensor(S.re * self.score_scale, S.im * self.score_scale).tanh()
        Y = complex_einsum("bmn,bnd->bmd", S, V)
        return irfft_modes(Y, self.modes_q.indices, self.len_q)


class SelfAttention(Module):
    """Scaled dot-product multi-head self-attention with output projection."""

    def __init__(self, d_model: int, heads: int, rng: np.random.Generator):
        if heads < 1 or d_model % heads:
            raise ConfigError(f"d_model {d_model} is not divisible by {heads} heads")
        self.d_model, self.heads = d_model, heads
        for name in ("q", "k", "v", "o"):
            setattr(self, f"w{name}", glorot(rng, d_model, d_model))
            setattr(self, f"b{name}", param(np.zeros(d_model)))

    def weights(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Attention probabilities [B, K, T, T] and head-major values [B, K, T, dk]."""
        B, T, D = x.shape
        K, dk = self.heads, D // self.heads

        def heads(w, b):
            return linear(x, w, b).reshape(B, T, K, dk).transpose(0, 2, 1, 3)

        q, k, v = heads(self.wq, self.bq), heads(self.wk, self.bk), heads(self.wv, self.bv)
        scores = matmul(q, k.swapaxes(-1, -2)) * (1.0 / np.sqrt(dk))
        return softmax(scores, axis=-1), v

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[-1] != self.d_model:
            raise DimensionError(f"self-attention expects [B, T, {self.d_model}], got {x.shape}")
        B, T, D = x.shape
        att, v = self.weights(x)
        ctx = matmul(att, v).transpose(0, 2, 1, 3).reshape(B, T, D)
        return linear(ctx, self.wo, self.bo)
