"""Stochastic gradient descent with momentum and linear warmup.

The effective learning rate ramps linearly from lr/warmup_steps to lr
over the first warmup_steps updates, then stays constant. Updates are
applied in parameter-name order, in place, so a fixed seed and data
order reproduce training bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .layers import ParamSet


@dataclass(frozen=True)
class SgdConfig:
    lr: float = 0.1
    momentum: float = 0.9
    warmup_steps: int = 0

    def __post_init__(self):
        if self.lr <= 0:
            raise ValidationError(f"lr must be positive, got {self.lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValidationError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.warmup_steps < 0:
            raise ValidationError("warmup_steps must be non-negative")


class SgdOptimizer:
    def __init__(self, config: SgdConfig, params: ParamSet):
        self.config = config
        self.step_count = 0
        self._velocity = {name: np.zeros_like(params[name].value)
                          for name in params.names}

    def learning_rate(self) -> float:
        """Rate that the *next* step will use."""
        lr = self.config.lr
        if self.config.warmup_steps > 0:
            lr *= min(1.0, (self.step_count + 1) / self.config.warmup_steps)
        return lr

    def step(self, params: ParamSet, grads: dict[str, np.ndarray]) -> None:
        lr = self.learning_rate()
        for name in params.names:
            grad = grads.get(name)
            if grad is None:
                continue
            vel = self._velocity[name]
            vel *= self.config.momentum
            vel += grad
            params[name].value -= lr * vel
        self.step_count += 1
