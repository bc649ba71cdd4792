"""Pointwise nonlinearities σ with derivatives and the ratio φ(x) = σ′(x)/x"""
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.special import expit

ActivationKind = Literal["quadratic", "linear_quadratic", "relu", "silu", "tanh", "sigmoid", "linear"]


@dataclass(frozen=True)
class Activation:
    kind: ActivationKind = "quadratic"
    a: float = 1.0
    b: float = 1.0

    def __call__(self, x: np.ndarray) -> np.ndarray:
        kind = self.kind
        if kind == "quadratic":
            return x * x
        if kind == "linear_quadratic":
            return self.a * x + self.b * x * x
        if kind == "relu":
            return np.maximum(x, 0.0)
        if kind == "silu":
            return x * expit(x)
        if kind == "tanh":
            return np.tanh(x)
        if kind == "sigmoid":
            return expit(x)
        if kind == "linear":
            return np.array(x, dtype=np.float64, copy=True)
        raise ValueError(f"unknown activation {kind!r}")

    def deriv(self, x: np.ndarray) -> np.ndarray:
        kind = self.kind
        if kind == "quadratic":
            return 2.0 * x
        if kind == "linear_quadratic":
            return self.a + 2.0 * self.b * x
        if kind == "relu":
            # subgradient 0 at the kink
            return (x > 0.0).astype(np.float64)
        if kind == "silu":
            s = expit(x)
            return s + x * s * (1.0 - s)
        if kind == "tanh":
            return 1.0 - np.tanh(x) ** 2
        if kind == "sigmoid":
            s = expit(x)
            return s * (1.0 - s)
        if kind == "linear":
            return np.ones_like(x, dtype=np.float64)
        raise ValueError(f"unknown activation {self.kind!r}")

    def phi(self, x: np.ndarray) -> np.ndarray:
        """σ′(x)/x for x > 0"""
        x = np.asarray(x, dtype=np.float64)
        return self.deriv(x) / x


def activation_from_spec(kind: str, a: float = 1.0, b: float = 1.0) -> Activation:
    return Activation(kind=kind, a=a, b=b)
