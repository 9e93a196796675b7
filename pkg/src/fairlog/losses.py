"""Binary classification losses on predicted probabilities.

Both losses operate on probabilities (not logits) because predictions
may be query probabilities computed by a circuit rather than a raw
network output. Probabilities are clipped away from {0, 1} before the
logarithms; gradients are taken at the clipped value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

P_EPS = 1e-12


@dataclass(frozen=True)
class LossSpec:
    """Loss selector: plain BCE or focal loss with parameters (gamma, alpha)."""

    kind: str = "bce"  # "bce" | "focal"
    gamma: float = 2.0
    alpha: float = 0.5

    def __post_init__(self):
        if self.kind not in ("bce", "focal"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.gamma < 0:
            raise ValueError("focal gamma must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("focal alpha must be in [0, 1]")


def loss_value(p: np.ndarray, y: np.ndarray, spec: LossSpec) -> np.ndarray:
    p = np.clip(p, P_EPS, 1.0 - P_EPS)
    y = np.asarray(y, dtype=np.float64)
    if spec.kind == "bce":
        return -(y * np.log(p) + (1.0 - y) * np.log1p(-p))
    pos = -spec.alpha * (1.0 - p) ** spec.gamma * np.log(p)
    neg = -(1.0 - spec.alpha) * p**spec.gamma * np.log1p(-p)
    return y * pos + (1.0 - y) * neg


def loss_grad(p: np.ndarray, y: np.ndarray, spec: LossSpec) -> np.ndarray:
    """dL/dp, elementwise."""
    p = np.clip(p, P_EPS, 1.0 - P_EPS)
    y = np.asarray(y, dtype=np.float64)
    if spec.kind == "bce":
        return -y / p + (1.0 - y) / (1.0 - p)
    g, a = spec.gamma, spec.alpha
    onemp = 1.0 - p
    # d/dp [-a (1-p)^g log p] = a g (1-p)^(g-1) log p - a (1-p)^g / p
    dpos = a * (g * onemp ** (g - 1.0) * np.log(p) - onemp**g / p) if g > 0 else -a / p
    dneg = (1.0 - a) * (-g * p ** (g - 1.0) * np.log1p(-p) + p**g / onemp) if g > 0 else (1.0 - a) / onemp
    return y * dpos + (1.0 - y) * dneg
