"""Misfit quantities of interest between simulated and reference seismograms.

Two misfits are computed from per-receiver displacement time series:

* an L2 misfit: time-averaged squared Euclidean distance between the
  simulated displacement and the piecewise-linear interpolation of the
  observed data, integrated by the trapezoidal rule on the simulation grid;

* a quadratic-Wasserstein misfit: each component is split into nonnegative
  and nonpositive parts (inserting linearly interpolated zero crossings),
  each part is normalized to a probability density on rescaled time
  tau = t/T, and the squared W2 distances between matched parts are summed
  over parts, components, and receivers.  W2 in one dimension is evaluated
  through the quantile functions: discrete CDFs by cumulative trapezoid,
  inverses by linear interpolation on the union of both CDF value sets.

Whenever one part of a matched pair is identically zero the pair
contributes the maximal possible value 1 instead of an undefined distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np

if TYPE_CHECKING:
    from mlmc_seis.data import DataSet
    from mlmc_seis.solver import Seismogram


class GridMismatchError(ValueError):
    """Observation times are not contained in the simulation time grid."""


@dataclass(frozen=True)
class SignedSeries:
    """Piecewise-linear function given by knots t (strictly increasing) and values."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)
        if t.ndim != 1 or t.size < 2 or t.shape != v.shape:
            raise ValueError("need >= 2 knots and matching values")
        if not np.all(np.diff(t) > 0):
            raise ValueError("knots must be strictly increasing")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")

    def mass(self) -> float:
        """Trapezoidal integral of the series."""
        return float(np.trapezoid(self.values, self.t))


@dataclass(frozen=True)
class DiscreteCdf:
    """Nondecreasing CDF values on normalized-time abscissae, from 0 to 1."""

    tau: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v[0] != 0.0 or v[-1] != 1.0 or np.any(np.diff(v) < 0):
            raise ValueError("CDF must be nondecreasing from 0 to 1")

    def inverse_at(self, p: np.ndarray) -> np.ndarray:
        """Left-continuous inverse by linear interpolation (first knot of flat runs)."""
        keep = np.concatenate([[True], np.diff(self.values) > 0])
        return np.interp(p, self.values[keep], self.tau[keep])


def build_cdf(density: SignedSeries) -> DiscreteCdf:
    """Normalized CDF of a nonnegative series by cumulative trapezoid."""
    v, t = density.values, density.t
    if np.any(v < 0):
        raise ValueError("density must be nonnegative")
    increments = 0.5 * (v[1:] + v[:-1]) * np.diff(t)
    cdf = np.concatenate([[0.0], np.cumsum(increments)])
    total = cdf[-1]
    if not total > 0:
        raise ValueError("density must have strictly positive total mass")
    cdf /= total
    cdf[-1] = 1.0
    return DiscreteCdf(tau=t, values=cdf)


def split_signs(series: SignedSeries) -> tuple[SignedSeries, SignedSeries]:
    """Nonnegative and nonpositive parts on a grid augmented with zero crossings.

    A knot is inserted at the linear-interpolation zero of every sign
    change; a sample that is exactly zero is already a knot of both parts
    and gains no extra knot.
    """
    t, v = series.t, series.values
    crossing = v[:-1] * v[1:] < 0
    idx = np.nonzero(crossing)[0]
    if idx.size:
        t_zero = t[idx] + (t[idx + 1] - t[idx]) * v[idx] / (v[idx] - v[idx + 1])
        t_aug = np.insert(t, idx + 1, t_zero)
        v_aug = np.insert(v, idx + 1, 0.0)
    else:
        t_aug, v_aug = t, v
    pos = SignedSeries(t=t_aug, values=np.maximum(v_aug, 0.0))
    neg = SignedSeries(t=t_aug, values=np.minimum(v_aug, 0.0))
    return pos, neg


def w2_squared(f: SignedSeries, g: SignedSeries) -> float:
    """Squared quadratic Wasserstein distance between two normalized densities.

    Both inputs must be nonnegative with positive total mass.  The integral
    of |F^-1(p) - G^-1(p)|^2 is taken by the trapezoidal rule over the
    union of both discrete CDF value sets.
    """
    cdf_f = build_cdf(f)
    cdf_g = build_cdf(g)
    p = np.union1d(cdf_f.values, cdf_g.values)
    diff = cdf_f.inverse_at(p) - cdf_g.inverse_at(p)
    return float(np.trapezoid(diff**2, p))


def wasserstein_misfit_pair(sim: SignedSeries, ref: SignedSeries) -> float:
    """Sum of W2^2 between matched sign parts, with the value 1 for empty parts."""
    sim_pos, sim_neg = split_signs(sim)
    ref_pos, ref_neg = split_signs(ref)
    total = 0.0
    for a, b in (
        (SignedSeries(sim_neg.t, -sim_neg.values), SignedSeries(ref_neg.t, -ref_neg.values)),
        (sim_pos, ref_pos),
    ):
        if not np.any(a.values) or not np.any(b.values):
            total += 1.0
        else:
            total += w2_squared(a, b)
    return total


def _check_grids(sim: Sequence["Seismogram"], data: "DataSet") -> tuple[int, int]:
    """Validate containment of observation times in every seismogram grid.

    Returns (j0, stride): index of t=0 in the simulation grid and the
    number of simulation steps per observation interval.
    """
    if len(sim) != data.n_receivers:
        raise GridMismatchError(f"{len(sim)} seismograms for {data.n_receivers} data receivers")
    s = sim[0]
    j0 = round(-s.t0 / s.dt)
    if abs(-s.t0 - j0 * s.dt) > 1e-9 * max(1.0, abs(s.t0)):
        raise GridMismatchError("t = 0 is not on the simulation grid")
    stride = 1.0 / (data.rate * s.dt)
    if abs(stride - round(stride)) > 1e-9 or round(stride) < 1:
        raise GridMismatchError(
            f"observation rate {data.rate} Hz is not commensurate with dt = {s.dt}"
        )
    n_sim = s.n_steps - j0
    if round(stride) * data.n_intervals != n_sim:
        raise GridMismatchError("simulation and data must cover the same interval [0, T]")
    for other in sim[1:]:
        if other.t0 != s.t0 or other.dt != s.dt or other.n_steps != s.n_steps:
            raise GridMismatchError("all seismograms must share one time grid")
    return j0, round(stride)


def qoi_e(sim: Sequence["Seismogram"], data: "DataSet") -> float:
    """Time-averaged L2 misfit over all receivers, on 0 <= t <= T."""
    j0, _ = _check_grids(sim, data)
    horizon = data.horizon
    t_data = data.times
    total = 0.0
    for n, seis in enumerate(sim):
        t_sim = seis.times[j0:]
        for comp, u in ((0, seis.ux[j0:]), (1, seis.uz[j0:])):
            d = np.interp(t_sim, t_data, data.values[n, comp])
            total += float(np.trapezoid((u - d) ** 2, dx=seis.dt))
    return total / horizon


def qoi_w(sim: Sequence["Seismogram"], data: "DataSet") -> float:
    """Sum of the Wasserstein misfits of all components in all receivers."""
    j0, _ = _check_grids(sim, data)
    n_sim = sim[0].n_steps - j0
    tau_sim = np.arange(n_sim + 1) / n_sim
    tau_data = np.arange(data.n_intervals + 1) / data.n_intervals
    total = 0.0
    for n, seis in enumerate(sim):
        for comp, u in ((0, seis.ux[j0:]), (1, seis.uz[j0:])):
            sim_series = SignedSeries(t=tau_sim, values=u)
            ref_series = SignedSeries(t=tau_data, values=data.values[n, comp])
            total += wasserstein_misfit_pair(sim_series, ref_series)
    return total
