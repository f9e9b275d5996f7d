"""Synthetic observed data: a fine-level solve subsampled and noised.

The reference seismograms are produced by the forward model itself on a
discretization strictly finer than any level used by the estimators,
restricted to a realistic observation rate, with i.i.d. Gaussian noise of
standard deviation sigma added to every component at every observation
time.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from mlmc_seis.medium import LayeredMedium, MaterialSample
from mlmc_seis.qoi import GridMismatchError
from mlmc_seis.rng import make_rng
from mlmc_seis.sls import SlsCoefficients
from mlmc_seis.solver import Geometry, Level, SourceSpec, simulate


@dataclass(frozen=True)
class DataSet:
    """Observed displacements per receiver on a uniform grid over [0, T]."""

    rate: float
    horizon: float
    values: np.ndarray  # (n_receivers, 2, K+1)
    sigma: float
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.values.ndim != 3 or self.values.shape[1] != 2:
            raise ValueError("values must have shape (n_receivers, 2, K+1)")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        k = round(self.horizon * self.rate)
        if self.values.shape[2] != k + 1:
            raise GridMismatchError(
                f"rate {self.rate} over horizon {self.horizon} needs {k + 1} samples, "
                f"got {self.values.shape[2]}"
            )

    @property
    def n_receivers(self) -> int:
        return self.values.shape[0]

    @property
    def n_intervals(self) -> int:
        return self.values.shape[2] - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.shape[2]) / self.rate


def material_digest(sample: MaterialSample) -> str:
    h = hashlib.blake2b(digest_size=8)
    for arr in (sample.rho, sample.vp, sample.vs):
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def generate_synthetic(
    medium: LayeredMedium,
    theta_star: MaterialSample,
    source_star: SourceSpec,
    geom: Geometry,
    fine: Level,
    rate: float,
    sigma: float | None,
    key: str,
    max_level: int | None = None,
    attenuation: bool = True,
    sls_bank: tuple[SlsCoefficients, ...] | None = None,
    **solver_kwargs,
) -> DataSet:
    """Fine forward solve at a fixed material draw, subsampled and noised.

    sigma=None calibrates the noise to 1% of the noiseless peak
    displacement.  The dataset regenerates bit-identically from the same
    inputs and key.
    """
    if max_level is not None and fine.index <= max_level:
        raise ValueError(
            f"data level {fine.index} must be strictly finer than the hierarchy "
            f"maximum {max_level}"
        )
    stride = 1.0 / (rate * fine.dt)
    if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
        raise GridMismatchError(f"rate {rate} Hz does not divide the level sampling rate")
    stride = round(stride)
    k_obs = rate * source_star.horizon
    if abs(k_obs - round(k_obs)) > 1e-9:
        raise GridMismatchError("horizon must hold a whole number of observation intervals")
    k_obs = round(k_obs)

    result = simulate(
        medium, theta_star, source_star, geom, fine,
        attenuation=attenuation, sls_bank=sls_bank, **solver_kwargs,
    )
    j0 = round(-source_star.t_start / fine.dt)
    clean = np.empty((len(geom.offsets), 2, k_obs + 1))
    for r, seis in enumerate(result.seismograms):
        clean[r, 0] = seis.ux[j0 :: stride][: k_obs + 1]
        clean[r, 1] = seis.uz[j0 :: stride][: k_obs + 1]

    if sigma is None:
        sigma = 0.01 * float(np.max(np.abs(clean)))
    noise = sigma * make_rng(f"{key}/noise").standard_normal(clean.shape)
    meta = {
        "seed": key,
        "sigma": repr(float(sigma)),
        "rate": repr(float(rate)),
        "fine_level": str(fine.index),
        "source": f"x={source_star.x!r} depth={source_star.depth!r} f0={source_star.f0!r}",
        "material_digest": material_digest(theta_star),
    }
    return DataSet(
        rate=float(rate),
        horizon=source_star.horizon,
        values=clean + noise,
        sigma=float(sigma),
        meta=meta,
    )
