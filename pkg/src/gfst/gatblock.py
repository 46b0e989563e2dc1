"""Lag alignment (time series transform) followed by masked multi-head graph attention.

Shapes: node features are ``[B, T, n, d]`` (batch, time, node, channel). The
attention runs independently at every (batch, time) position with shared
weights. Edge masks and lags are ``[n, n]`` or per-sample ``[B, n, n]``.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError
from .graphbuild import ComplexAdjacency
from .numerics import Tensor, einsum, elu, gather_time, leaky_relu, softmax, stack
from .numerics.module import Module, glorot

LEAKY_SLOPE = 0.2


class GatHead(Module):
    def __init__(self, d_in: int, d_head: int, rng: np.random.Generator):
        self.W = glorot(rng, d_in, d_head)
        # row 0 scores the receiving node, row 1 the sending node
        self.attn = glorot(rng, 2 * d_head, 1, shape=(2, d_head))


class GraphAttention(Module):
    def __init__(self, d_in: int, d_head: int, heads: int, rng: np.random.Generator):
        if heads < 1:
            raise ValidationError("need at least one attention head")
        self.d_in, self.d_head, self.heads = d_in, d_head, heads
        self.head = [GatHead(d_in, d_head, rng) for _ in range(heads)]

    @property
    def d_out(self) -> int:
        return self.heads * self.d_head

    def _stacked(self) -> tuple[Tensor, Tensor]:
        W = stack([h.W for h in self.head], axis=0)        # [K, d_in, d_head]
        A = stack([h.attn for h in self.head], axis=0)     # [K, 2, d_head]
        return W, A


def _edge_mask(a: np.ndarray, lead: int) -> np.ndarray:
    """[n, n] or [B, n, n] edge matrix -> boolean mask broadcastable to [B, T, K, n, n]."""
    a = np.asarray(a) == 1
    if a.ndim == 2:
        return a[None, None, None]
    if a.ndim == 3 and a.shape[0] == lead:
        return a[:, None, None]
    raise ValidationError(f"edge matrix shape {a.shape} does not fit batch of {lead}")


def gat_scores(h: Tensor, gat: GraphAttention, a: np.ndarray, rows=None) -> tuple[Tensor, Tensor]:
    """Attention weights and projected features.

    Returns ``alpha`` [B, T, K, r, n] (rows r of the receiving nodes, softmax
    over each neighborhood) and ``Wh`` [B, T, K, n, d_head].
    """
    if h.ndim != 4:
        raise ValidationError(f"node features must be [B, T, n, d], got {h.shape}")
    n = h.shape[2]
    rows = np.arange(n) if rows is None else np.atleast_1d(np.asarray(rows, dtype=np.int64))
    W, A = gat._stacked()
    Wh = einsum("btnd,kde->btkne", h, W)
    recv = einsum("btkne,ke->btkn", Wh, A[:, 0, :])
    send = einsum("btkne,ke->btkn", Wh, A[:, 1, :])
    e = recv[:, :, :, rows].reshape(recv.shape[:3] + (len(rows), 1)) + send.reshape(send.shape[:3] + (1, n))
    e = leaky_relu(e, LEAKY_SLOPE)
    mask = _edge_mask(a, h.shape[0])[..., rows, :]
    alpha = softmax(e, axis=-1, mask=mask)
    return alpha, Wh


def gat_layer(h: Tensor, gat: GraphAttention, a: np.ndarray, rows=None) -> Tensor:
    """Concatenate ELU(sum_j alpha_ij W_k h_j) over heads. Output [B, T, r, K*d_head]."""
    alpha, Wh = gat_scores(h, gat, a, rows)
    agg = elu(einsum("btkrn,btkne->btrke", alpha, Wh))
    B, T, r = agg.shape[:3]
    return agg.reshape(B, T, r, gat.d_out)


def tst_index(T: int, b: np.ndarray, target: int, a: np.ndarray | None = None) -> np.ndarray:
    """Source-time index [B, T, n] for the lag alignment.

    Neighbor j is shifted by its lag toward the target, b[j, target], so that
    out_j[t] = in_j[t - b[j, target]]; boundary rows repeat the nearest valid
    record. Non-neighbors and the target itself are left in place.
    """
    b = np.asarray(b)
    if b.ndim == 2:
        b = b[None]
    n = b.shape[-1]
    if not 0 <= target < n:
        raise ValidationError(f"target index {target} out of range for {n} nodes")
    shift = b[:, :, target].astype(np.int64)  # [B, n]
    if a is not None:
        a = np.asarray(a)
        if a.ndim == 2:
            a = a[None]
        shift = np.where(a[:, target, :] == 1, shift, 0)
    shift[:, target] = 0
    if np.any(np.abs(shift) >= T):
        raise ValidationError(f"lag exceeds series length {T}")
    t = np.arange(T)[None, :, None]
    return np.clip(t - shift[:, None, :], 0, T - 1)


def tst_shift(x: Tensor, b: np.ndarray, target: int, a: np.ndarray | None = None) -> Tensor:
    """Lag-align every neighbor of ``target``. x: [B, T, n, d]."""
    idx = tst_index(x.shape[1], b, target, a)
    if idx.shape[0] != x.shape[0]:
        idx = np.broadcast_to(idx, (x.shape[0],) + idx.shape[1:])
    return gather_time(x, np.ascontiguousarray(idx))


def gat_block(x: Tensor, adj, gat: GraphAttention, target: int) -> Tensor:
    """Lag-align, attend, and return the target node's series [B, T, d_out].

    ``adj`` is a :class:`ComplexAdjacency` or an ``(a, b)`` pair of arrays.
    """
    a, b = (adj.a, adj.b) if isinstance(adj, ComplexAdjacency) else adj
    shifted = tst_shift(x, b, target, a)
    out = gat_layer(shifted, gat, a, rows=[target])
    B, T = out.shape[:2]
    return out.reshape(B, T, gat.d_out)
