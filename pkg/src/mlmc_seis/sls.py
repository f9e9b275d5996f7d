"""Generalized Zener attenuation: fit of relaxation mechanisms to a target Q.

The viscoelastic modulus is a superposition of standard-linear-solid
mechanisms,

    m(w) = s * (1 - sum_b y_b * w_b / (w_b + i w)),

with relaxation frequencies w_b, nonnegative weights y_b, and the
unrelaxed-modulus scale factor s chosen so that Re m equals 1 at the
reference frequency (the elastic moduli of the medium are then multiplied
by s to obtain the unrelaxed moduli).  The modeled quality factor is
Q(w) = Re m / Im m; the weights are fitted so Q stays within 10% of the
target across the configured frequency band.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls


class SlsFitError(RuntimeError):
    """Fit residual exceeded the acceptance bound (band too wide or too few mechanisms)."""


@dataclass(frozen=True)
class SlsCoefficients:
    """Relaxation frequencies (rad/s, strictly increasing), weights, and modulus scale."""

    omegas: tuple[float, ...]
    weights: tuple[float, ...]
    scale: float

    def __post_init__(self) -> None:
        if len(self.omegas) < 1 or len(self.omegas) != len(self.weights):
            raise ValueError("need at least one mechanism and matching weights")
        if any(w2 <= w1 for w1, w2 in zip(self.omegas, self.omegas[1:])):
            raise ValueError("relaxation frequencies must be strictly increasing")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def n_mechanisms(self) -> int:
        return len(self.omegas)

    @property
    def is_elastic(self) -> bool:
        return all(w == 0.0 for w in self.weights)


def complex_modulus(sls: SlsCoefficients, omega: np.ndarray) -> np.ndarray:
    """Relative viscoelastic modulus m(w) (unit elastic modulus)."""
    omega = np.asarray(omega, dtype=float)
    wb = np.array(sls.omegas)[:, None]
    yb = np.array(sls.weights)[:, None]
    return sls.scale * (1.0 - np.sum(yb * wb / (wb + 1j * omega[None, :]), axis=0))


def quality_factor(sls: SlsCoefficients, omega: np.ndarray) -> np.ndarray:
    """Modeled Q(w) = Re m / Im m; infinite in the elastic limit."""
    m = complex_modulus(sls, omega)
    with np.errstate(divide="ignore"):
        return np.real(m) / np.imag(m)


def fit_sls(
    q_target: float,
    n_mechanisms: int,
    band: tuple[float, float],
    ref_frequency: float | None = None,
    max_rel_error: float = 0.10,
) -> SlsCoefficients:
    """Fit mechanism weights so the modeled Q approximates a constant target.

    The relaxation frequencies are log-spaced across [f_min, f_max] (Hz) and
    the weights solve a nonnegative least-squares fit of 1/Q on a dense
    log-spaced frequency sweep.  The scale factor normalizes Re m to 1 at
    ref_frequency (geometric band center when omitted).  Raises SlsFitError
    when the worst relative Q error on the band exceeds max_rel_error.
    """
    if not q_target > 0:
        raise ValueError(f"q_target must be positive, got {q_target}")
    if n_mechanisms < 1:
        raise ValueError("need at least one mechanism")
    f_min, f_max = band
    if not 0 < f_min < f_max:
        raise ValueError(f"invalid frequency band {band}")
    if ref_frequency is None:
        ref_frequency = math.sqrt(f_min * f_max)

    if n_mechanisms == 1:
        omegas = np.array([2 * math.pi * math.sqrt(f_min * f_max)])
    else:
        omegas = 2 * math.pi * np.logspace(math.log10(f_min), math.log10(f_max), n_mechanisms)

    if math.isinf(q_target):
        return SlsCoefficients(omegas=tuple(omegas), weights=(0.0,) * n_mechanisms, scale=1.0)

    # Linearized target: sum_b y_b * w*wb/(w^2+wb^2) = 1/Q on the band.
    w = 2 * math.pi * np.logspace(math.log10(f_min), math.log10(f_max), 200)
    basis = (w[:, None] * omegas[None, :]) / (w[:, None] ** 2 + omegas[None, :] ** 2)
    weights, _ = nnls(basis, np.full_like(w, 1.0 / q_target))

    w_ref = 2 * math.pi * ref_frequency
    re_deficit = np.sum(weights * omegas**2 / (w_ref**2 + omegas**2))
    sls = SlsCoefficients(omegas=tuple(omegas), weights=tuple(weights), scale=1.0 / (1.0 - re_deficit))

    q_model = quality_factor(sls, w)
    worst = float(np.max(np.abs(q_model - q_target) / q_target))
    if worst > max_rel_error:
        raise SlsFitError(
            f"Q fit misses target {q_target} by {worst:.1%} on [{f_min}, {f_max}] Hz "
            f"with {n_mechanisms} mechanisms; widen B or narrow the band"
        )
    return sls
