import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mlmc_seis.data import DataSet
from mlmc_seis.qoi import (
    GridMismatchError,
    SignedSeries,
    qoi_e,
    qoi_w,
    split_signs,
    w2_squared,
    wasserstein_misfit_pair,
)
from mlmc_seis.rng import make_rng
from mlmc_seis.solver import Seismogram


def make_sim(values, t0, dt):
    """values: (n_rec, 2, J+1)."""
    return [
        Seismogram(receiver=r, t0=t0, dt=dt, ux=values[r, 0], uz=values[r, 1])
        for r in range(values.shape[0])
    ]


def make_pair(horizon=8.0, rate=20.0, stride=4, n_rec=2, t0=-1.0, fill=0.0):
    dt = 1.0 / (rate * stride)
    j_total = round((horizon - t0) / dt)
    sim_values = np.full((n_rec, 2, j_total + 1), fill)
    k = round(horizon * rate)
    data_values = np.full((n_rec, 2, k + 1), fill)
    return sim_values, data_values, dt


def test_identical_signals_give_zero_misfit():
    sim_values, data_values, dt = make_pair(fill=0.3)
    sim = make_sim(sim_values, -1.0, dt)
    data = DataSet(rate=20.0, horizon=8.0, values=data_values, sigma=0.0)
    assert qoi_e(sim, data) == 0.0


def test_constant_offset_on_one_component_gives_c_squared():
    sim_values, data_values, dt = make_pair()
    c = 0.37
    data_values[1, 1, :] += c
    sim = make_sim(sim_values, -1.0, dt)
    data = DataSet(rate=20.0, horizon=8.0, values=data_values, sigma=0.0)
    assert qoi_e(sim, data) == pytest.approx(c**2, rel=1e-12)


def test_noise_floor_of_interpolated_iid_noise():
    # data = sim + N(0, sigma^2) at observation times, piecewise-linear:
    # E[Q] = (2/3) sigma^2 * components * receivers
    rate, horizon, stride, n_rec, sigma = 20.0, 8.0, 32, 3, 0.05
    dt = 1.0 / (rate * stride)
    t0 = -1.0
    j_total = round((horizon - t0) / dt)
    t_sim = t0 + np.arange(j_total + 1) * dt
    k = round(horizon * rate)
    t_obs = np.arange(k + 1) / rate
    slopes = np.linspace(-0.5, 0.5, n_rec * 2).reshape(n_rec, 2)
    sim_values = slopes[:, :, None] * t_sim[None, None, :]
    clean = slopes[:, :, None] * t_obs[None, None, :]
    sim = make_sim(sim_values, t0, dt)
    rng = make_rng("qoi-noise-floor")
    draws = 1000
    qs = np.empty(draws)
    for i in range(draws):
        noisy = clean + sigma * rng.standard_normal(clean.shape)
        data = DataSet(rate=rate, horizon=horizon, values=noisy, sigma=sigma)
        qs[i] = qoi_e(sim, data)
    expected = (2.0 / 3.0) * sigma**2 * 2 * n_rec
    se = qs.std(ddof=1) / np.sqrt(draws)
    assert abs(qs.mean() - expected) < 3 * se


def test_grid_containment_is_enforced():
    sim_values, data_values, dt = make_pair()
    sim = make_sim(sim_values, -1.0, dt)
    with pytest.raises(GridMismatchError):
        qoi_e(sim, DataSet(rate=30.0, horizon=8.0, values=np.zeros((2, 2, 241)), sigma=0.0))


def test_split_single_crossing():
    s = SignedSeries(t=np.array([0.0, 1.0]), values=np.array([1.0, -1.0]))
    pos, neg = split_signs(s)
    np.testing.assert_array_equal(pos.t, [0.0, 0.5, 1.0])
    np.testing.assert_array_equal(pos.values, [1.0, 0.0, 0.0])
    np.testing.assert_array_equal(neg.values, [0.0, 0.0, -1.0])


def test_split_all_positive_is_identity():
    s = SignedSeries(t=np.array([0.0, 0.5, 1.0]), values=np.array([1.0, 2.0, 0.5]))
    pos, neg = split_signs(s)
    np.testing.assert_array_equal(pos.t, s.t)
    np.testing.assert_array_equal(pos.values, s.values)
    assert not np.any(neg.values)


def test_split_sine_finds_interior_zero_and_conserves_mass():
    t = np.linspace(0.0, 1.0, 1000)
    s = SignedSeries(t=t, values=np.sin(2 * np.pi * t))
    pos, neg = split_signs(s)
    inserted = np.setdiff1d(pos.t, t)
    assert inserted.size == 1
    assert abs(inserted[0] - 0.5) < 1e-5
    assert pos.mass() + neg.mass() == pytest.approx(s.mass(), abs=1e-12)


def test_exact_zero_sample_gains_no_knot():
    s = SignedSeries(t=np.array([0.0, 0.5, 1.0]), values=np.array([1.0, 0.0, -1.0]))
    pos, neg = split_signs(s)
    assert pos.t.size == 3


def test_w2_identical_densities():
    t = np.linspace(0.0, 1.0, 64)
    f = SignedSeries(t=t, values=np.exp(-((t - 0.4) ** 2) / 0.01))
    assert w2_squared(f, f) == pytest.approx(0.0, abs=1e-14)


def test_w2_disjoint_uniforms_is_shift_squared():
    f = SignedSeries(t=np.array([0.0, 0.5]), values=np.array([1.0, 1.0]))
    g = SignedSeries(t=np.array([0.5, 1.0]), values=np.array([1.0, 1.0]))
    assert w2_squared(f, g) == pytest.approx(0.25, rel=1e-12)


def test_w2_triangles_match_dense_quadrature():
    t_f = np.linspace(0.1, 0.5, 50)
    t_g = np.linspace(0.35, 0.85, 50)
    f = SignedSeries(t=t_f, values=np.maximum(0.0, 1 - np.abs((t_f - 0.3) / 0.2)))
    g = SignedSeries(t=t_g, values=np.maximum(0.0, 1 - np.abs((t_g - 0.6) / 0.25)))

    def dense_w2(a, b, n=1_000_001):
        tau = np.linspace(0.0, 1.0, n)
        pa = np.interp(tau, a.t, a.values)
        pb = np.interp(tau, b.t, b.values)
        out = []
        for p in (pa, pb):
            cdf = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(tau))])
            cdf /= cdf[-1]
            out.append(cdf)
        ps = np.linspace(0.0, 1.0, n)
        keep_a = np.concatenate([[True], np.diff(out[0]) > 0])
        keep_b = np.concatenate([[True], np.diff(out[1]) > 0])
        qa = np.interp(ps, out[0][keep_a], tau[keep_a])
        qb = np.interp(ps, out[1][keep_b], tau[keep_b])
        return np.trapezoid((qa - qb) ** 2, ps)

    assert w2_squared(f, g) == pytest.approx(dense_w2(f, g), abs=1e-4)


def test_w2_symmetry_and_nonnegativity():
    rng = make_rng("w2-sym")
    for _ in range(20):
        t = np.sort(rng.random(30))
        t[0], t[-1] = 0.0, 1.0
        f = SignedSeries(t=t, values=rng.random(30))
        g = SignedSeries(t=t, values=rng.random(30))
        a, b = w2_squared(f, g), w2_squared(g, f)
        assert a >= 0.0
        assert abs(a - b) < 1e-10


def test_w2_rejects_negative_or_empty():
    t = np.array([0.0, 1.0])
    with pytest.raises(ValueError):
        w2_squared(SignedSeries(t=t, values=np.array([-1.0, 1.0])),
                   SignedSeries(t=t, values=np.array([1.0, 1.0])))
    with pytest.raises(ValueError):
        w2_squared(SignedSeries(t=t, values=np.array([0.0, 0.0])),
                   SignedSeries(t=t, values=np.array([1.0, 1.0])))


def gaussian_derivative(t, center, width):
    x = (t - center) / width
    return -x * np.exp(-0.5 * x**2)


def test_single_signed_pair_falls_back_to_one():
    t = np.linspace(0.0, 1.0, 512)
    both_signs = gaussian_derivative(t, 0.5, 0.05)
    positive_only = np.exp(-((t - 0.5) ** 2) / 0.005)
    got = wasserstein_misfit_pair(
        SignedSeries(t=t, values=positive_only),
        SignedSeries(t=t, values=both_signs),
    )
    pos_ref, _ = split_signs(SignedSeries(t=t, values=both_signs))
    expected = 1.0 + w2_squared(SignedSeries(t=t, values=positive_only), pos_ref)
    assert got == pytest.approx(expected, rel=1e-12)


def test_shift_law_and_convexity():
    # shifting a fully interior pulse moves both sign parts rigidly:
    # the misfit is 2 (s/T)^2 in normalized time, convex in the shift
    t = np.linspace(0.0, 1.0, 8192)
    base = gaussian_derivative(t, 0.5, 0.03)
    ref = SignedSeries(t=t, values=base)
    shifts = np.linspace(-0.05, 0.05, 11)
    values = []
    for s in shifts:
        shifted = SignedSeries(t=t, values=gaussian_derivative(t, 0.5 + s, 0.03))
        values.append(wasserstein_misfit_pair(shifted, ref))
    values = np.array(values)
    for s, v in zip(shifts, values):
        if s != 0.0:
            assert v == pytest.approx(2.0 * s**2, rel=0.01)
    second = np.diff(values, 2)
    assert np.all(second >= -1e-9 * values.max())


def test_scale_invariance_of_misfit_pair():
    t = np.linspace(0.0, 1.0, 1024)
    a = SignedSeries(t=t, values=gaussian_derivative(t, 0.45, 0.04))
    b = SignedSeries(t=t, values=gaussian_derivative(t, 0.55, 0.05))
    base = wasserstein_misfit_pair(a, b)
    scaled = wasserstein_misfit_pair(
        SignedSeries(t=t, values=17.0 * a.values),
        SignedSeries(t=t, values=17.0 * b.values),
    )
    assert scaled == pytest.approx(base, rel=1e-12)


@settings(deadline=None, max_examples=60)
@given(st.integers(min_value=0, max_value=10**9))
def test_split_mass_conservation_property(seed):
    rng = make_rng(f"mass/{seed}")
    n = int(rng.integers(3, 60))
    t = np.sort(rng.random(n))
    t = np.unique(np.concatenate([[0.0], t, [1.0]]))
    v = rng.standard_normal(t.size)
    s = SignedSeries(t=t, values=v)
    pos, neg = split_signs(s)
    assert pos.mass() + neg.mass() == pytest.approx(s.mass(), abs=1e-12)
    assert np.all(pos.values >= 0.0) and np.all(neg.values <= 0.0)


def test_qoi_w_identical_is_zero_and_zero_sim_hits_cap():
    # coincident grids: the data equals the simulated series on t >= 0
    sim_values, data_values, dt = make_pair(n_rec=1, stride=1)
    t_sim = -1.0 + np.arange(sim_values.shape[2]) * dt
    for comp in (0, 1):
        sim_values[0, comp] = gaussian_derivative(t_sim, 4.0, 0.5)
    j0 = round(1.0 / dt)
    data_values[0] = sim_values[0, :, j0:]
    sim = make_sim(sim_values, -1.0, dt)
    data = DataSet(rate=20.0, horizon=8.0, values=data_values, sigma=0.0)
    assert qoi_w(sim, data) == pytest.approx(0.0, abs=1e-12)

    # identically zero simulation: every pair contributes the maximal value 1
    zero_sim = make_sim(np.zeros_like(sim_values), -1.0, dt)
    assert qoi_w(zero_sim, data) == pytest.approx(4.0)
