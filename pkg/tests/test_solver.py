import math

import numpy as np
import pytest
from scipy.integrate import quad

from mlmc_seis.medium import LayerSpec, LayeredMedium, UncertaintySpec, sample_material
from mlmc_seis.solver import (
    Geometry,
    Level,
    SolverBlowUpError,
    SourceSpec,
    StabilityError,
    build_sls_bank,
    gaussian_stf,
    measure_work,
    required_padding,
    simulate,
)

HOMOG = LayeredMedium(layers=(LayerSpec(None, 2600.0, 2900.0, 5000.0, 300.0),))
HOMOG_UNC = UncertaintySpec(q=0.0, r=0.0, nu_lb=5000.0 / 2900.0 * 0.999,
                            nu_ub=5000.0 / 2900.0 * 1.001)

DESK = LayeredMedium(layers=(
    LayerSpec(4000.0, 2400.0, 2400.0, 4104.0, 120.0),
    LayerSpec(6000.0, 2600.0, 2800.0, 4788.0, 180.0),
    LayerSpec(None, 2800.0, 3200.0, 5472.0, 250.0),
))
DESK_UNC = UncertaintySpec(q=0.1, r=0.1, nu_lb=1.64, nu_ub=1.78)
DESK_SRC = SourceSpec(x=0.0, depth=6000.0, moment=((5.6e13, 8.0e13), (8.0e13, -2.6e14)),
                      f0=1.0, t_center=0.0, t_start=-1.2, horizon=6.0)
DESK_GEOM = Geometry(offsets=(4000.0, 6000.0, 8000.0), receiver_depth=0.0,
                     pad_x=38000.0, pad_z=38000.0)


def test_stf_peak_value_and_symmetry():
    assert gaussian_stf(0.0, 2.0, 0.0) == pytest.approx(6.0 / math.sqrt(2 * math.pi), rel=1e-14)
    for a in (0.05, 0.3, 1.7):
        assert gaussian_stf(1.0 + a, 2.0, 1.0) == pytest.approx(
            gaussian_stf(1.0 - a, 2.0, 1.0), rel=1e-12
        )


def test_stf_has_unit_mass():
    mass, _ = quad(lambda t: gaussian_stf(t, 2.0, 0.0), -5.0, 5.0)
    assert mass == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        gaussian_stf(0.0, -1.0, 0.0)


def test_required_padding_arithmetic():
    crust = LayeredMedium(layers=(
        LayerSpec(10000.0, 2500.0, 3529.0, 6034.6, 300.0),
        LayerSpec(None, 2900.0, 4533.6, 7752.5, 600.0),
    ))
    unc = UncertaintySpec(q=0.1, r=0.1, nu_lb=1.64, nu_ub=1.78)
    vp_max = 1.1 * 4533.6 * 1.78
    # zero horizon leaves only the wavelength margin
    assert required_padding(crust, unc, 0.0, 2.0) == pytest.approx(vp_max / 2.0)
    # the bound dominates half the horizon at the largest admissible speed
    assert required_padding(crust, unc, 25.0, 2.0) >= 0.5 * 25.0 * vp_max
    # linear growth in the horizon
    p1 = required_padding(crust, unc, 10.0, 2.0)
    p2 = required_padding(crust, unc, 20.0, 2.0)
    assert p2 - p1 == pytest.approx(vp_max * 10.0 / 2.0, rel=1e-12)


def test_mesh_bookkeeping_between_levels():
    sample = sample_material(DESK, DESK_UNC, "mesh")
    r0 = simulate(DESK, sample, DESK_SRC, DESK_GEOM, Level.from_base(1000.0, 0.05, 0))
    r1 = simulate(DESK, sample, DESK_SRC, DESK_GEOM, Level.from_base(1000.0, 0.05, 1))
    assert r1.cells == 4 * r0.cells
    assert r1.steps == 2 * r0.steps
    assert measure_work(r1) > 0


def test_zero_moment_produces_zero_seismograms():
    sample = sample_material(DESK, DESK_UNC, "zero")
    src = SourceSpec(x=0.0, depth=6000.0, moment=((0.0, 0.0), (0.0, 0.0)),
                     f0=0.75, t_center=0.0, t_start=-1.6, horizon=6.0)
    res = simulate(DESK, sample, src, DESK_GEOM, Level.from_base(1000.0, 0.05, 0))
    for s in res.seismograms:
        assert not np.any(s.ux) and not np.any(s.uz)


def test_simulation_is_bit_deterministic():
    sample = sample_material(DESK, DESK_UNC, "det")
    bank = build_sls_bank(DESK, 0.75, 3)
    kwargs = dict(attenuation=True, sls_bank=bank)
    a = simulate(DESK, sample, DESK_SRC, DESK_GEOM, Level.from_base(1000.0, 0.05, 1), **kwargs)
    b = simulate(DESK, sample, DESK_SRC, DESK_GEOM, Level.from_base(1000.0, 0.05, 1), **kwargs)
    for sa, sb in zip(a.seismograms, b.seismograms):
        assert np.array_equal(sa.ux, sb.ux)
        assert np.array_equal(sa.uz, sb.uz)


def test_cfl_violation_is_rejected():
    sample = sample_material(DESK, DESK_UNC, "cfl")
    bad = Level(index=0, h=1000.0, dt=0.2)
    with pytest.raises(StabilityError):
        simulate(DESK, sample, DESK_SRC, DESK_GEOM, bad)


def test_unstable_run_reports_blowup_step():
    sample = sample_material(HOMOG, HOMOG_UNC, "blowup")
    src = SourceSpec(x=0.0, depth=4000.0, moment=((1e13, 0.0), (0.0, 1e13)),
                     f0=1.0, t_center=0.0, t_start=-1.0, horizon=7.0)
    geom = Geometry(offsets=(2000.0,), receiver_depth=0.0, pad_x=8000.0, pad_z=8000.0)
    # dt at 0.8 h/vp passes a loosened admission check but is von Neumann unstable
    lev = Level(index=0, h=500.0, dt=0.08)
    with pytest.raises(SolverBlowUpError) as err:
        simulate(HOMOG, sample, src, geom, lev, c_cfl=1.0, sponge_cells=8)
    assert err.value.step > 0


def test_first_arrival_matches_ray_theory():
    # explosive source in a homogeneous half-space: pure P radiation;
    # the envelope peak at the receiver tracks the ray travel time
    sample = sample_material(HOMOG, HOMOG_UNC, "ray")
    src = SourceSpec(x=0.0, depth=10000.0, moment=((1e13, 0.0), (0.0, 1e13)),
                     f0=4.0, t_center=0.0, t_start=-0.4, horizon=4.0)
    geom = Geometry(offsets=(10000.0,), receiver_depth=0.0, pad_x=12000.0, pad_z=12000.0)
    res = simulate(HOMOG, sample, src, geom, Level.from_base(250.0, 0.02, 1))
    s = res.seismograms[0]
    amp = np.hypot(s.ux, s.uz)
    t_peak = s.times[int(np.argmax(amp))]
    t_ray = math.sqrt(2.0) * 1e4 / 5000.0
    assert abs(t_peak - t_ray) / t_ray < 0.02


def test_energy_decays_after_the_pulse():
    sample = sample_material(DESK, DESK_UNC, "energy")
    res = simulate(DESK, sample, DESK_SRC, DESK_GEOM, Level.from_base(1000.0, 0.05, 1),
                   attenuation=False, energy_every=20)
    t, e = res.energy_times, res.energy
    late = e[t > 1.0]
    assert late.size > 5
    # absorbing pads only remove energy once the source is quiet
    assert np.all(np.diff(late) <= 1e-6 * late[0])
    assert late[-1] < 0.7 * late[0]


def test_attenuation_reduces_peak_amplitude():
    sample = sample_material(DESK, DESK_UNC, "atten")
    bank = build_sls_bank(DESK, 0.75, 3)
    lev = Level.from_base(1000.0, 0.05, 1)
    elastic = simulate(DESK, sample, DESK_SRC, DESK_GEOM, lev, attenuation=False)
    damped = simulate(DESK, sample, DESK_SRC, DESK_GEOM, lev, attenuation=True, sls_bank=bank)
    for se, sd in zip(elastic.seismograms, damped.seismograms):
        assert np.hypot(sd.ux, sd.uz).max() < np.hypot(se.ux, se.uz).max()


def test_sponge_reflection_below_one_percent_at_normal_incidence():
    # worst case for the absorber: the largest admissible wave speed of the
    # reduced preset's medium, a vertical path onto the bottom sponge, and
    # a large-pad run as the boundary-free reference
    vp = 1.1 * 3200.0 * 1.78
    vs = vp / 1.7
    med = LayeredMedium(layers=(LayerSpec(None, 2500.0, vs, vp, 200.0),))
    unc = UncertaintySpec(q=0.0, r=0.0, nu_lb=1.7 * 0.999, nu_ub=1.7 * 1.001)
    sample = sample_material(med, unc, "sponge")
    horizon = 20.0
    src = SourceSpec(x=0.0, depth=2000.0, moment=((1e13, 0.0), (0.0, 1e13)),
                     f0=1.0, t_center=0.0, t_start=-1.2, horizon=horizon)
    lev = Level.from_base(1000.0, 0.05, 1)
    cells, strength = 36, 3.0
    rec_depth = 4000.0
    # sponge edge two wavelengths below the receiver; round trip must fit
    z_hi = math.ceil((rec_depth + 2.1 * vp / src.f0 + cells * 1000.0) / 1000.0) * 1000.0
    assert ((z_hi - src.depth) + (z_hi - rec_depth)) / vp < horizon - 1.0
    g_small = Geometry(offsets=(0.0,), receiver_depth=rec_depth,
                       pad_x=70000.0, pad_z=z_hi - rec_depth)
    g_big = Geometry(offsets=(0.0,), receiver_depth=rec_depth,
                     pad_x=70000.0, pad_z=z_hi - rec_depth + 70000.0)
    a = simulate(med, sample, src, g_small, lev,
                 sponge_cells=cells, sponge_strength=strength).seismograms[0]
    b = simulate(med, sample, src, g_big, lev,
                 sponge_cells=cells, sponge_strength=strength).seismograms[0]
    peak = np.hypot(b.ux, b.uz).max()
    reflected = np.hypot(a.ux - b.ux, a.uz - b.uz).max()
    assert reflected / peak < 0.01


def test_receivers_must_stay_clear_of_the_sponge():
    # pads narrower than the sponge put the receiver inside the taper
    sample = sample_material(DESK, DESK_UNC, "clear")
    geom = Geometry(offsets=(5000.0,), receiver_depth=0.0, pad_x=15000.0, pad_z=38000.0)
    with pytest.raises(ValueError, match="unpadded"):
        simulate(DESK, sample, DESK_SRC, geom, Level.from_base(1000.0, 0.05, 0))


def test_level_construction():
    lev = Level.from_base(2500.0, 6.25e-3, 3)
    assert lev.h == 312.5
    assert lev.dt == 7.8125e-4
    assert lev.h0 == 2500.0
    with pytest.raises(ValueError):
        Level(index=-1, h=100.0, dt=0.1)
    with pytest.raises(ValueError):
        SourceSpec(x=0.0, depth=100.0, moment=((1.0, 2.0), (3.0, 4.0)),
                   f0=1.0, t_center=0.0, t_start=-1.0, horizon=5.0)


def test_work_measurement_repeats_within_noise():
    sample = sample_material(DESK, DESK_UNC, "repeat")
    lev = Level.from_base(1000.0, 0.05, 1)
    simulate(DESK, sample, DESK_SRC, DESK_GEOM, lev)  # warm caches
    works = [measure_work(simulate(DESK, sample, DESK_SRC, DESK_GEOM, lev))
             for _ in range(3)]
    assert max(works) <= 1.25 * min(works)
