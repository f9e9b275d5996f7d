import numpy as np
import pytest

from mlmc_seis.data import DataSet, generate_synthetic
from mlmc_seis.medium import LayerSpec, LayeredMedium, UncertaintySpec, sample_material
from mlmc_seis.qoi import GridMismatchError
from mlmc_seis.solver import Geometry, Level, SourceSpec, simulate
from mlmc_seis.store import read_dataset, write_dataset

MED = LayeredMedium(layers=(LayerSpec(None, 2500.0, 2500.0, 4500.0, 200.0),))
UNC = UncertaintySpec(q=0.05, r=0.05, nu_lb=1.75, nu_ub=1.85)
SRC = SourceSpec(x=0.0, depth=3000.0, moment=((2e13, 1e13), (1e13, -3e13)),
                 f0=1.5, t_center=0.0, t_start=-0.8, horizon=10.0)
GEOM = Geometry(offsets=(2000.0, 3000.0, 4000.0), receiver_depth=0.0,
                pad_x=6000.0, pad_z=6000.0)
H0, DT0 = 500.0, 3.125e-3
RATE = 160.0
THETA = sample_material(MED, UNC, "data-theta")
SOLVER_KW = dict(sponge_cells=6, sponge_strength=3.0)


def gen(sigma, key="data-test", fine=1, **kw):
    return generate_synthetic(MED, THETA, SRC, GEOM, Level.from_base(H0, DT0, fine),
                              RATE, sigma, key, attenuation=False, **SOLVER_KW, **kw)


DS = gen(sigma=2.5e-3)


def test_noiseless_data_is_the_subsampled_fine_solve():
    ds = gen(sigma=0.0)
    fine = Level.from_base(H0, DT0, 1)
    res = simulate(MED, THETA, SRC, GEOM, fine, attenuation=False, **SOLVER_KW)
    stride = round(1.0 / (RATE * fine.dt))
    j0 = round(-SRC.t_start / fine.dt)
    for r, seis in enumerate(res.seismograms):
        np.testing.assert_array_equal(ds.values[r, 0], seis.ux[j0::stride])
        np.testing.assert_array_equal(ds.values[r, 1], seis.uz[j0::stride])


def test_noise_variance_matches_sigma():
    clean = gen(sigma=0.0)
    resid = DS.values - clean.values
    n = resid.size
    assert n >= 9600
    assert abs(resid.var(ddof=1) - DS.sigma**2) < 0.05 * DS.sigma**2


def test_noise_is_white():
    clean = gen(sigma=0.0)
    resid = (DS.values - clean.values).reshape(-1)
    n = resid.size
    lag1 = np.corrcoef(resid[:-1], resid[1:])[0, 1]
    assert abs(lag1) < 3.0 / np.sqrt(n)


def test_regeneration_is_bit_identical():
    again = gen(sigma=2.5e-3)
    np.testing.assert_array_equal(DS.values, again.values)
    assert DS.meta["material_digest"] == again.meta["material_digest"]


def test_auto_sigma_is_one_percent_of_peak():
    ds = gen(sigma=None, key="auto-sigma")
    clean = gen(sigma=0.0)
    assert ds.sigma == pytest.approx(0.01 * np.max(np.abs(clean.values)), rel=1e-12)


def test_incompatible_rate_is_rejected():
    with pytest.raises(GridMismatchError):
        generate_synthetic(MED, THETA, SRC, GEOM, Level.from_base(H0, DT0, 1),
                           rate=7.0, sigma=0.0, key="bad", attenuation=False,
                           **SOLVER_KW)


def test_fine_level_must_exceed_hierarchy_max():
    with pytest.raises(ValueError, match="finer"):
        gen(sigma=0.0, max_level=1)
    gen(sigma=0.0, max_level=0)  # level 1 data over an l_max=0 hierarchy is fine


def test_store_roundtrip_preserves_values(tmp_path):
    path = tmp_path / "data.txt"
    write_dataset(path, DS)
    back = read_dataset(path)
    np.testing.assert_array_equal(back.values, DS.values)
    assert back.rate == DS.rate
    assert back.sigma == DS.sigma
    assert back.horizon == DS.horizon
    assert back.meta["seed"] == DS.meta["seed"]


def test_dataset_validation():
    with pytest.raises(ValueError):
        DataSet(rate=20.0, horizon=8.0, values=np.zeros((2, 2, 161)), sigma=-1.0)
    with pytest.raises(GridMismatchError):
        DataSet(rate=20.0, horizon=8.0, values=np.zeros((2, 2, 100)), sigma=0.0)
