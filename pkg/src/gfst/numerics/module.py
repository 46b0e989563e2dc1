"""Minimal parameter container.

Parameters are discovered from instance attributes: a ``Tensor`` with
``requires_grad`` is a parameter, a ``Module`` or a list of modules is
recursed into. Names are dotted attribute paths; list items get their index
appended to the attribute name (``enc0.feb.w``, ``gat.head1.W``).
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .tensor import Tensor


class Module:
    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for key, val in vars(self).items():
            if key.startswith("_"):
                continue
            name = f"{prefix}{key}"
            if isinstance(val, Tensor) and val.requires_grad:
                out[name] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(name + "."))
            elif isinstance(val, (list, tuple)) and val and all(isinstance(v, Module) for v in val):
                for i, sub in enumerate(val):
                    out.update(sub.named_parameters(f"{name}{i}."))
        return out

    def parameters(self) -> list[Tensor]:
        return list(self.named_parameters().values())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = self.named_parameters()
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise ConfigError(f"state mismatch: missing {missing[:5]}, unexpected {extra[:5]}")
        for k, p in own.items():
            if p.shape != state[k].shape:
                raise ConfigError(f"shape mismatch for {k}: model {p.shape} vs stored {state[k].shape}")
            p.data = np.array(state[k], dtype=np.float64)

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def param(data: np.ndarray) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=True)


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return param(rng.uniform(-limit, limit, shape if shape is not None else (fan_in, fan_out)))
