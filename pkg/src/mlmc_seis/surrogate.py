"""Closed-form test model with known mean, rates, and simulated work.

The level-l approximation of the quantity of interest is

    Q_l(theta) = g(theta) + b(theta) * 2^(-q_w * l),
    g(theta) = sum_i theta_i^2,   b(theta) = c_b * (1 + theta_1),

for theta uniform on [0,1]^m, with simulated work w0 * 2^(gamma * l).
Consequently E[Q_l] - E[Q] = 1.5 * c_b * 2^(-q_w l) exactly, and the
coupled-correction variance decays at rate q_s = 2 q_w.  This makes the
estimator, calibration, and planner stack testable against exact values
at negligible cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SurrogateSpec:
    dim: int
    q_w: float
    gamma: float
    c_b: float
    w0: float
    q_s: float = field(default=0.0)

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not (self.q_w > 0 and self.gamma > 0):
            raise ValueError("q_w and gamma must be positive")
        if self.c_b == 0:
            raise ValueError("c_b must be nonzero")
        if not self.w0 > 0:
            raise ValueError("w0 must be positive")
        if self.q_s == 0.0:
            object.__setattr__(self, "q_s", 2.0 * self.q_w)


def surrogate_eval(spec: SurrogateSpec, theta: np.ndarray, level: int) -> tuple[float, float]:
    """(Q_l(theta), simulated work in seconds)."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.dim,):
        raise ValueError(f"theta must have shape ({spec.dim},), got {theta.shape}")
    g = float(np.sum(theta**2))
    b = spec.c_b * (1.0 + theta[0])
    return g + b * 2.0 ** (-spec.q_w * level), spec.w0 * 2.0 ** (spec.gamma * level)


def exact_mean(spec: SurrogateSpec, level: int | None = None) -> float:
    """E[Q] = dim/3, or E[Q_l] when a level is given."""
    mean = spec.dim / 3.0
    if level is not None:
        mean += 1.5 * spec.c_b * 2.0 ** (-spec.q_w * level)
    return mean


def exact_bias(spec: SurrogateSpec, level: int) -> float:
    """|E[Q_l] - E[Q]| = 1.5 |c_b| 2^(-q_w l)."""
    return 1.5 * abs(spec.c_b) * 2.0 ** (-spec.q_w * level)


def exact_correction_variance(spec: SurrogateSpec, level: int) -> float:
    """Var[Q_l - Q_(l-1)] in closed form (Var[b] = c_b^2 / 12)."""
    if level < 1:
        raise ValueError("corrections start at level 1")
    step = 2.0 ** (-spec.q_w * level) - 2.0 ** (-spec.q_w * (level - 1))
    return spec.c_b**2 / 12.0 * step**2
