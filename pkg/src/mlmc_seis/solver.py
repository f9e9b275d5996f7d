"""Level-parameterized 2-D P-SV viscoelastic forward model.

Propagates waves from a moment-tensor point source through a layered
material sample on a staggered finite-difference grid (second order in
space and time) and records displacement seismograms at surface receivers
by time-integrating interpolated velocities.  The mesh size and time step
halve per level; cost grows by 2^3 per level (cells x4, steps x2).

The half-plane is truncated with exponential-taper sponge zones on the
left/right/bottom sides; `required_padding` sizes the pads so that no
boundary reflection can reach a receiver inside the time horizon for any
admissible material sample.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from mlmc_seis import _kernel
from mlmc_seis.medium import LayeredMedium, MaterialSample, UncertaintySpec
from mlmc_seis.sls import SlsCoefficients, fit_sls

_CHUNK_STEPS = 512
_KERNEL_WARM = False


def _ensure_kernel_warm() -> None:
    """Compile (or load from cache) the stepping kernel on a toy grid.

    Keeps JIT time out of the measured work of the first real solve in
    each process.
    """
    global _KERNEL_WARM
    if _KERNEL_WARM:
        return
    nz = nx = 8
    zeros2 = lambda *s: np.zeros(s)
    idx = np.zeros((1, 4), dtype=np.int64)
    w4 = np.zeros((1, 4))
    _kernel.run_steps(
        zeros2(nz, nx - 1), zeros2(nz - 1, nx), zeros2(nz, nx), zeros2(nz, nx),
        zeros2(nz - 1, nx - 1),
        np.ones(nz), np.ones(nz - 1), np.ones(nz), np.ones(nz), np.ones(nz - 1), 1.0,
        np.zeros((1, nz)), np.zeros((1, nz - 1)),
        zeros2(nz, nx, 1), zeros2(nz, nx, 1), zeros2(nz - 1, nx - 1, 1),
        np.zeros(1), np.zeros(1),
        np.ones(nx), np.ones(nx - 1), np.ones(nz), np.ones(nz - 1), 2, 2,
        idx[0], idx[0], w4[0], idx[0], idx[0], w4[0], 0.0, 0.0, 0.0, np.zeros(2),
        idx, idx, w4, idx, idx, w4, idx, idx, w4,
        np.zeros((1, 2)), np.zeros((1, 2)),
        1e-6, 0, 2,
    )
    _KERNEL_WARM = True


class StabilityError(ValueError):
    """Time step violates the CFL bound for this sample."""


class SolverBlowUpError(RuntimeError):
    """Non-finite field values appeared during stepping."""

    def __init__(self, step: int) -> None:
        super().__init__(f"non-finite field values at step {step}")
        self.step = step


@dataclass(frozen=True)
class Level:
    """One rung of the discretization hierarchy: h = h0 2^-l, dt = dt0 2^-l."""

    index: int
    h: float
    dt: float

    def __post_init__(self) -> None:
        if self.index < 0 or self.h <= 0 or self.dt <= 0:
            raise ValueError("level needs index >= 0 and positive h, dt")

    @classmethod
    def from_base(cls, h0: float, dt0: float, index: int) -> "Level":
        return cls(index=index, h=h0 * 2.0**-index, dt=dt0 * 2.0**-index)

    @property
    def h0(self) -> float:
        return self.h * 2.0**self.index


@dataclass(frozen=True)
class SourceSpec:
    """Moment-tensor point source with a Gaussian source-time function."""

    x: float
    depth: float
    moment: tuple[tuple[float, float], tuple[float, float]]
    f0: float
    t_center: float
    t_start: float
    horizon: float

    def __post_init__(self) -> None:
        if self.moment[0][1] != self.moment[1][0]:
            raise ValueError("moment tensor must be symmetric")
        if not self.f0 > 0:
            raise ValueError("corner frequency must be positive")
        if not self.t_start < self.t_center < self.horizon:
            raise ValueError("need t_start < t_center < horizon")
        if self.depth < 0:
            raise ValueError("source depth must be nonnegative")


@dataclass(frozen=True)
class Geometry:
    """Receiver offsets relative to the source and domain padding."""

    offsets: tuple[float, ...]
    receiver_depth: float
    pad_x: float
    pad_z: float

    def __post_init__(self) -> None:
        if len(self.offsets) < 1:
            raise ValueError("need at least one receiver")
        if not (self.pad_x > 0 and self.pad_z > 0):
            raise ValueError("pads must be strictly positive")
        if self.receiver_depth < 0:
            raise ValueError("receiver depth must be nonnegative")


@dataclass(frozen=True)
class Seismogram:
    """Per-receiver displacement components on a uniform time grid."""

    receiver: int
    t0: float
    dt: float
    ux: np.ndarray
    uz: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.ux.size) * self.dt

    @property
    def n_steps(self) -> int:
        return self.ux.size - 1


@dataclass(frozen=True)
class SimulationResult:
    seismograms: list[Seismogram]
    work_seconds: float
    cells: int
    steps: int
    level_index: int
    energy_times: np.ndarray | None = field(default=None, repr=False)
    energy: np.ndarray | None = field(default=None, repr=False)


def gaussian_stf(t: np.ndarray | float, f0: float, t_c: float) -> np.ndarray | float:
    """Unit-mass Gaussian source-time function with corner frequency f0."""
    if not f0 > 0:
        raise ValueError("f0 must be positive")
    t = np.asarray(t, dtype=float)
    out = 3.0 * f0 / math.sqrt(2.0 * math.pi) * np.exp(-4.5 * f0**2 * (t - t_c) ** 2)
    return out if out.ndim else float(out)


def required_padding(
    medium: LayeredMedium, unc: UncertaintySpec, horizon: float, f0: float
) -> float:
    """Pad distance guaranteeing no boundary reflection returns within the horizon.

    A reflection generated at the pad travels at least twice the pad
    distance before reaching a receiver, so half the horizon at the largest
    admissible compressional speed suffices; one dominant wavelength is
    added as margin.
    """
    if horizon < 0 or not f0 > 0:
        raise ValueError("need horizon >= 0 and f0 > 0")
    v_max = unc.vp_upper_bound(medium)
    return v_max * horizon / 2.0 + v_max / f0


def build_sls_bank(
    medium: LayeredMedium,
    f0: float,
    n_mechanisms: int,
    band: tuple[float, float] | None = None,
) -> tuple[SlsCoefficients, ...]:
    """Per-layer attenuation coefficients fitted to each layer's Q on a shared band."""
    if band is None:
        band = (f0 / 10.0, 10.0 * f0)
    fits: dict[float, SlsCoefficients] = {}
    bank = []
    for layer in medium.layers:
        if layer.q_factor not in fits:
            fits[layer.q_factor] = fit_sls(layer.q_factor, n_mechanisms, band, ref_frequency=f0)
        bank.append(fits[layer.q_factor])
    return tuple(bank)


def _snap(x: float, h0: float, up: bool) -> float:
    r = x / h0
    ri = round(r)
    if abs(r - ri) < 1e-9:
        return ri * h0
    return (math.ceil(r) if up else math.floor(r)) * h0


def _bilinear(zf: float, xf: float, nzf: int, nxf: int):
    """Four (j, i, w) interpolation points, clipped to the subgrid."""
    j0 = min(max(int(math.floor(zf)), 0), nzf - 1)
    i0 = min(max(int(math.floor(xf)), 0), nxf - 1)
    fz = zf - j0
    fx = xf - i0
    j1 = min(j0 + 1, nzf - 1)
    i1 = min(i0 + 1, nxf - 1)
    return (
        (j0, i0, (1 - fz) * (1 - fx)),
        (j0, i1, (1 - fz) * fx),
        (j1, i0, fz * (1 - fx)),
        (j1, i1, fz * fx),
    )


def _sponge_profile(coord: np.ndarray, lo: float, hi: float, width: float,
                    strength: float, dt: float, bottom_only: bool = False) -> np.ndarray:
    # Quartic taper of the damping rate.  Reflection at normal incidence is
    # governed by the sponge width in dominant wavelengths (~4.6% per
    # wavelength-count, measured against large-pad references); the presets
    # size width and strength so it stays below 1% at the largest
    # admissible speed.  The per-step factor scales with dt so all levels
    # approximate one continuum absorber.
    d_hi = np.clip(coord - (hi - width), 0.0, width)
    if bottom_only:
        d = d_hi
    else:
        d = np.maximum(np.clip((lo + width) - coord, 0.0, width), d_hi)
    return np.exp(-strength * dt * (d / width) ** 4)


def simulate(
    medium: LayeredMedium,
    sample: MaterialSample,
    source: SourceSpec,
    geom: Geometry,
    level: Level,
    attenuation: bool = False,
    sls_bank: tuple[SlsCoefficients, ...] | None = None,
    c_cfl: float = 0.45,
    sponge_cells: int = 36,
    sponge_strength: float = 3.0,
    energy_every: int = 0,
) -> SimulationResult:
    """Run one deterministic forward solve and return receiver seismograms.

    The same inputs always produce bit-identical output.  Work is the
    wall time of this call times its worker count (always one: the kernel
    is single-threaded).
    """
    _ensure_kernel_warm()
    t_begin = time.perf_counter()
    h, dt = level.h, level.dt
    h0 = level.h0
    if dt > c_cfl * h / sample.vp_max * (1 + 1e-12):
        raise StabilityError(
            f"dt={dt} exceeds CFL bound {c_cfl * h / sample.vp_max:.6g} "
            f"(h={h}, vp_max={sample.vp_max:.1f})"
        )

    rec_x = np.asarray([source.x + off for off in geom.offsets])
    x_lo = _snap(min(source.x, rec_x.min()) - geom.pad_x, h0, up=False)
    x_hi = _snap(max(source.x, rec_x.max()) + geom.pad_x, h0, up=True)
    z_hi = _snap(max(source.depth, geom.receiver_depth) + geom.pad_z, h0, up=True)
    nx = round((x_hi - x_lo) / h) + 1
    nz = round(z_hi / h) + 1
    steps = round((source.horizon - source.t_start) / dt)
    if abs(steps * dt - (source.horizon - source.t_start)) > 1e-9:
        raise ValueError("time interval is not a whole number of steps at this level")

    width = sponge_cells * h0
    if np.any(rec_x < x_lo + width) or np.any(rec_x > x_hi - width) or (
        geom.receiver_depth > z_hi - width
    ):
        raise ValueError("receivers must lie inside the unpadded region")

    # material rows (values constant in x; node rows at j*h, half rows at (j+1/2)*h)
    z_nodes = np.arange(nz) * h
    z_half = (np.arange(nz - 1) + 0.5) * h
    idx_n = np.searchsorted(medium.tops, z_nodes + 1e-9 * h, side="right") - 1
    idx_h = np.searchsorted(medium.tops, z_half, side="right") - 1
    rho_n = sample.rho[idx_n]
    rho_h = sample.rho[idx_h]
    mu_n = rho_n * sample.vs[idx_n] ** 2
    mu_h = rho_h * sample.vs[idx_h] ** 2
    lam_n = rho_n * sample.vp[idx_n] ** 2 - 2.0 * mu_n

    n_mech = 0
    c1 = np.zeros(0)
    c2 = np.zeros(0)
    y_n = np.zeros((0, nz))
    y_h = np.zeros((0, nz - 1))
    if attenuation:
        if sls_bank is None:
            sls_bank = build_sls_bank(medium, source.f0, 3)
        if len(sls_bank) != len(medium):
            raise ValueError("sls_bank must hold one entry per layer")
        omegas = np.array(sls_bank[0].omegas)
        for entry in sls_bank[1:]:
            if entry.omegas != sls_bank[0].omegas:
                raise ValueError("all layers must share one relaxation-frequency set")
        n_mech = len(omegas)
        c1 = (2.0 - omegas * dt) / (2.0 + omegas * dt)
        c2 = 2.0 * omegas * dt / (2.0 + omegas * dt)
        y_layer = np.array([bank.weights for bank in sls_bank])  # (n_layers, B)
        scale_layer = np.array([bank.scale for bank in sls_bank])
        y_n = np.ascontiguousarray(y_layer[idx_n].T)
        y_h = np.ascontiguousarray(y_layer[idx_h].T)
        lam_n = lam_n * scale_layer[idx_n]
        mu_n = mu_n * scale_layer[idx_n]
        mu_h = mu_h * scale_layer[idx_h]

    lm_n = lam_n + 2.0 * mu_n
    surf_a = float(4.0 * mu_n[0] * (lam_n[0] + mu_n[0]) / lm_n[0])
    bx = dt / (h * rho_n)
    bz = dt / (h * rho_h)

    # half-step sponge factors per subgrid axis (left/right columns, bottom
    # rows only); the kernel applies them before and after every update
    x_n = x_lo + np.arange(nx) * h
    x_h = x_n[:-1] + 0.5 * h
    gxn = _sponge_profile(x_n, x_lo, x_hi, width, sponge_strength, 0.5 * dt)
    gxh = _sponge_profile(x_h, x_lo, x_hi, width, sponge_strength, 0.5 * dt)
    gzn = _sponge_profile(z_nodes, 0.0, z_hi, width, sponge_strength, 0.5 * dt, bottom_only=True)
    gzh = _sponge_profile(z_half, 0.0, z_hi, width, sponge_strength, 0.5 * dt, bottom_only=True)
    wx = min(int(math.ceil(width / h)) + 2, nx)
    wb = min(int(math.ceil(width / h)) + 2, nz)

    # moment injection: stress increments on the nearest nodes, bilinear weights / h^2
    sxf = (source.x - x_lo) / h
    szf = source.depth / h
    pts_n = _bilinear(szf, sxf, nz, nx)
    pts_h = _bilinear(szf - 0.5, sxf - 0.5, nz - 1, nx - 1)
    sj_n = np.array([p[0] for p in pts_n], dtype=np.int64)
    si_n = np.array([p[1] for p in pts_n], dtype=np.int64)
    sw_n = np.array([p[2] for p in pts_n]) / h**2
    sj_h = np.array([p[0] for p in pts_h], dtype=np.int64)
    si_h = np.array([p[1] for p in pts_h], dtype=np.int64)
    sw_h = np.array([p[2] for p in pts_h]) / h**2
    mxx = source.moment[0][0]
    mzz = source.moment[1][1]
    mxz = source.moment[0][1]
    t_grid = source.t_start + np.arange(steps + 1) * dt
    ds = np.diff(gaussian_stf(t_grid, source.f0, source.t_center))

    # receiver interpolation stencils (fixed four terms per field)
    n_rec = len(geom.offsets)
    rvx_j = np.zeros((n_rec, 4), dtype=np.int64)
    rvx_i = np.zeros((n_rec, 4), dtype=np.int64)
    rvx_w = np.zeros((n_rec, 4))
    rvz_j = np.zeros((n_rec, 4), dtype=np.int64)
    rvz_i = np.zeros((n_rec, 4), dtype=np.int64)
    rvz_w = np.zeros((n_rec, 4))
    rvzx_j = np.zeros((n_rec, 4), dtype=np.int64)
    rvzx_i = np.zeros((n_rec, 4), dtype=np.int64)
    rvzx_w = np.zeros((n_rec, 4))
    z_r = geom.receiver_depth
    for r, xr in enumerate(rec_x):
        for k, (j, i, w) in enumerate(_bilinear(z_r / h, (xr - x_lo) / h - 0.5, nz, nx - 1)):
            rvx_j[r, k], rvx_i[r, k], rvx_w[r, k] = j, i, w
        if z_r >= 0.5 * h:
            for k, (j, i, w) in enumerate(
                _bilinear(z_r / h - 0.5, (xr - x_lo) / h, nz - 1, nx)
            ):
                rvz_j[r, k], rvz_i[r, k], rvz_w[r, k] = j, i, w
        else:
            # mirror through the free surface: vz(-h/2) = vz(h/2) + h*(lam/(lam+2mu)) dvx/dx
            xf = (xr - x_lo) / h
            i0 = int(math.floor(xf))
            fx = xf - i0
            rvz_j[r, :2] = 0
            rvz_i[r, 0], rvz_w[r, 0] = i0, 1.0 - fx
            rvz_i[r, 1], rvz_w[r, 1] = i0 + 1, fx
            frac = z_r / h + 0.5
            c = (1.0 - frac) * lam_n[0] / lm_n[0]
            rvzx_j[r, :3] = 0
            rvzx_i[r, 0], rvzx_w[r, 0] = i0 - 1, -c * (1.0 - fx)
            rvzx_i[r, 1], rvzx_w[r, 1] = i0, c * (1.0 - 2.0 * fx)
            rvzx_i[r, 2], rvzx_w[r, 2] = i0 + 1, c * fx

    vx = np.zeros((nz, nx - 1))
    vz = np.zeros((nz - 1, nx))
    txx = np.zeros((nz, nx))
    tzz = np.zeros((nz, nx))
    txz = np.zeros((nz - 1, nx - 1))
    rxx = np.zeros((nz, nx, n_mech))
    rzz = np.zeros((nz, nx, n_mech))
    rxz = np.zeros((nz - 1, nx - 1, n_mech))
    rec_vx = np.zeros((n_rec, steps))
    rec_vz = np.zeros((n_rec, steps))

    energy_vals: list[float] = []
    energy_steps: list[int] = []
    interior = None
    if energy_every > 0:
        iw = int(math.ceil(width / h))
        interior = (slice(0, nz - iw), slice(iw, nx - iw))

    def probe_energy(step: int) -> None:
        js, isl = interior
        kin = 0.5 * np.sum(rho_n[js, None] * vx[js, isl.start : isl.stop - 1] ** 2)
        jh = slice(js.start, min(js.stop, nz - 1))
        kin += 0.5 * np.sum(rho_h[jh, None] * vz[jh, isl] ** 2)
        det = lm_n**2 - lam_n**2
        sxx = txx[js, isl]
        szz = tzz[js, isl]
        exx = (lm_n[js, None] * sxx - lam_n[js, None] * szz) / det[js, None]
        ezz = (lm_n[js, None] * szz - lam_n[js, None] * sxx) / det[js, None]
        pot = 0.5 * np.sum(sxx * exx + szz * ezz)
        pot += 0.5 * np.sum(txz[jh, isl.start : isl.stop - 1] ** 2 / mu_h[jh, None])
        energy_vals.append(float((kin + pot) * h**2))
        energy_steps.append(step)

    chunk = energy_every if energy_every > 0 else _CHUNK_STEPS
    n = 0
    while n < steps:
        n_next = min(n + chunk, steps)
        _kernel.run_steps(
            vx, vz, txx, tzz, txz,
            bx, bz, lm_n, lam_n, mu_h, surf_a,
            y_n, y_h, rxx, rzz, rxz, c1, c2,
            gxn, gxh, gzn, gzh, wx, wb,
            sj_n, si_n, sw_n, sj_h, si_h, sw_h, mxx, mzz, mxz, ds,
            rvx_j, rvx_i, rvx_w, rvz_j, rvz_i, rvz_w, rvzx_j, rvzx_i, rvzx_w,
            rec_vx, rec_vz,
            dt / h, n, n_next,
        )
        peak = float(np.max(np.abs(vx)))
        if not math.isfinite(peak) or peak > 1e10:
            raise SolverBlowUpError(n_next)
        if energy_every > 0:
            probe_energy(n_next)
        n = n_next

    seismograms = []
    for r in range(n_rec):
        ux = np.concatenate([[0.0], dt * np.cumsum(rec_vx[r])])
        uz = np.concatenate([[0.0], dt * np.cumsum(rec_vz[r])])
        seismograms.append(Seismogram(receiver=r, t0=source.t_start, dt=dt, ux=ux, uz=uz))

    energy_times = None
    energy = None
    if energy_every > 0:
        energy_times = source.t_start + np.array(energy_steps, dtype=float) * dt
        energy = np.array(energy_vals)

    return SimulationResult(
        seismograms=seismograms,
        work_seconds=time.perf_counter() - t_begin,
        cells=(nx - 1) * (nz - 1),
        steps=steps,
        level_index=level.index,
        energy_times=energy_times,
        energy=energy,
    )


def measure_work(result: SimulationResult) -> float:
    """Core time of a completed solve: wall time times its (single) worker."""
    return result.work_seconds
