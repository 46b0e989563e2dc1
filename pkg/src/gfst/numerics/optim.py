"""Adam with bias correction, operating in place on parameter tensors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .tensor import Tensor


@dataclass
class AdamConfig:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    grad_clip: float | None = None  # global L2 norm; None disables

    def __post_init__(self):
        if not self.lr > 0 or not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1 or not self.eps > 0:
            raise ConfigError(f"invalid Adam settings: {self}")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ConfigError("grad_clip must be positive when set")


class Adam:
    def __init__(self, params: dict[str, Tensor], cfg: AdamConfig | None = None):
        self.params = dict(params)
        self.cfg = cfg or AdamConfig()
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.t = 0
        self.lr = self.cfg.lr  # current step size; schedules may overwrite it

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(np.sum(p.grad ** 2) for p in self.params.values() if p.grad is not None)))

    def step(self) -> None:
        c = self.cfg
        self.t += 1
        scale = 1.0
        if c.grad_clip is not None:
            norm = self.grad_norm()
            if norm > c.grad_clip:
                scale = c.grad_clip / norm
        b1c = 1.0 - c.beta1 ** self.t
        b2c = 1.0 - c.beta2 ** self.t
        for k, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad * scale
            m, v = self.m[k], self.v[k]
            m *= c.beta1
            m += (1 - c.beta1) * g
            v *= c.beta2
            v += (1 - c.beta2) * g * g
            p.data = p.data - self.lr * (m / b1c) / (np.sqrt(v / b2c) + c.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def state(self) -> dict[str, np.ndarray]:
        out = {"adam.t": np.array(float(self.t))}
        for k in self.params:
            out[f"adam.m.{k}"] = self.m[k].copy()
            out[f"adam.v.{k}"] = self.v[k].copy()
        return out
