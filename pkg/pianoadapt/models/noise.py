"""
Exploration noise for the residual agent.
"""
from typing import Mapping, Optional

import numpy as np


class CorrelatedNoise:
    """
    Unit-variance noise with lag-one correlation beta:
    eps_hat = beta * eps_prev + sqrt(1 - beta^2) * eps.
    """

    def __init__(self, dim: int, beta: float, rng: np.random.Generator):
        self.dim = dim
        self.beta = beta
        self.rng = rng
        self.prev = np.zeros(dim)

    def reset(self) -> None:
        self.prev = np.zeros(self.dim)

    def sample(self) -> np.ndarray:
        eps = self.rng.standard_normal(self.dim)
        self.prev = self.beta * self.prev + np.sqrt(1.0 - self.beta ** 2) * eps
        return self.prev.copy()


def correlated_noise(state: CorrelatedNoise) -> np.ndarray:
    return state.sample()


def guided_noise(
    eps: np.ndarray,
    lateral_signs: Optional[Mapping[int, float]],
    p: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    With probability p, point each lateral entry that has a defined error sign toward it.
    Magnitudes never change, so the L2 norm is preserved exactly.

    Args:
        eps: Noise vector
        lateral_signs: Action index -> sign of the lateral error; 0 means undefined
        p: Probability of taking the guided branch
        rng: One uniform draw is consumed per call
    """
    guided = rng.random() < p
    out = np.array(eps, dtype=np.float64, copy=True)
    if not guided or not lateral_signs:
        return out
    for index, sign in lateral_signs.items():
        if sign != 0:
            out[index] = np.copysign(abs(out[index]), sign)
    return out


def linear_schedule(start: float, end: float, steps: int, step: int) -> float:
    """Linear from start to end over the given steps, then constant."""
    frac = min(max(step / steps, 0.0), 1.0)
    return start + (end - start) * frac
