"""Central finite-difference checks of reverse-mode gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


# Below this norm both gradients count as zero; some biases have an exactly
# vanishing gradient (softmax shift invariance, decomposition removing constants).
ZERO_GRAD_ATOL = 1e-8


@dataclass
class GradCheckResult:
    name: str
    rel_error: float
    n_checked: int
    abs_error: float = 0.0
    scale: float = 0.0

    def passed(self, tol: float) -> bool:
        return self.rel_error <= tol or self.scale <= ZERO_GRAD_ATOL


def fd_step(x: float) -> float:
    return 1e-5 * (1.0 + abs(x))


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = np.linalg.norm(analytic - numeric)
    den = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(num / den)


def check_gradients(
    fn: Callable[[], Tensor],
    params: dict[str, Tensor] | Sequence[Tensor],
    max_coords: int | None = None,
    seed: int = 0,
) -> list[GradCheckResult]:
    """Compare backward() against central differences for each tensor in ``params``.

    ``fn`` rebuilds the graph from scratch and returns a scalar. At most
    ``max_coords`` randomly chosen coordinates per tensor are probed.
    """
    if not isinstance(params, dict):
        params = {f"p{i}": p for i, p in enumerate(params)}
    for p in params.values():
        p.requires_grad = True
        p.grad = None
    loss = fn()
    loss.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for k, p in params.items()}

    rng = np.random.default_rng(seed)
    results = []
    for name, p in params.items():
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        numeric = np.empty(len(coords))
        for i, c in enumerate(coords):
            orig = flat[c]
            h = fd_step(orig)
            flat[c] = orig + h
            up = fn().item()
            flat[c] = orig - h
            down = fn().item()
            flat[c] = orig
            numeric[i] = (up - down) / (2 * h)
        a = analytic[name].reshape(-1)[coords]
        results.append(GradCheckResult(name, relative_error(a, numeric), len(coords),
                                       float(np.linalg.norm(a - numeric)),
                                       float(max(np.linalg.norm(a), np.linalg.norm(numeric)))))
    return results


def random_projection_loss(out: Tensor, seed: int = 123) -> Tensor:
    """Scalar sum(out * w) with fixed random w, so every output entry matters."""
    w = np.random.default_rng(seed).standard_normal(out.shape)
    return (out * w).sum()
