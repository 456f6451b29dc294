import numpy as np
import pytest

from spectraltn.engine import Engine, LocalOperator
from spectraltn.models import (
    ModelSpec,
    build_model,
    correlation_experiment,
    cut,
    hopping_terms,
    mean_spacing,
    model_terms,
    susceptibility_sweep,
    tfi_z,
    xx_sector,
)
from spectraltn.oracle import (
    bdg_solution,
    covariance_row,
    dense_spin_diagonalization,
    tfi_hamiltonian,
    wick_g1_g2,
)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="Hubbard", dims=(8,)),
        dict(kind="FreeFermion1D", dims=(12,), filling=3),
        dict(kind="FreeFermion1D", dims=(8,), filling=9),
        dict(kind="FreeFermion2D", dims=(8,), filling=3),
        dict(kind="FreeFermion2D", dims=(4, 4), filling=3, offset=0.5),
        dict(kind="TFI", dims=(8,), h=np.inf),
        dict(kind="TFI", dims=(8,), offset=0.3),
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ValueError):
        ModelSpec(**kwargs)


def test_mean_spacing():
    assert np.isclose(mean_spacing((1024,), 103), 1024 / 103)
    assert np.isclose(mean_spacing((64, 64), 33), np.sqrt(4096 / 33))
    with pytest.raises(ValueError):
        mean_spacing((8,), 0)


def test_correlations_1d_vs_wick():
    spec = ModelSpec("FreeFermion1D", (64,), filling=11)
    h, st = build_model(spec)
    g1, g2 = correlation_experiment(spec, site0=7)
    w1, w2 = wick_g1_g2(covariance_row(h, st.occupation.occ, 7), origin=7)
    assert np.abs(g1.values - w1).max() < 1e-10
    assert np.abs(g2.values - w2).max() < 1e-10
    i0 = g1.offsets.index(0)
    assert np.isclose(g1.values[i0], 1)
    assert np.isclose(g2.values[i0], 1 / g1.meta["density"])
    assert np.isclose(g1.normalization, 64 / 11)


def test_correlations_2d_cuts():
    spec = ModelSpec("FreeFermion2D", (8, 8), filling=5)
    g1, g2 = correlation_experiment(spec)
    d, v = cut(g2, "axis")
    assert len(d) == 8 and d[0] == 0
    dd, vd = cut(g2, "diagonal")
    assert np.isclose(dd[1], np.sqrt(2))
    assert np.isclose(v[0], 64 / 5) and np.all(v[1:] >= 0)
    with pytest.raises(ValueError):
        cut(g2, "radial")


def test_correlations_reject_non_fermion():
    with pytest.raises(ValueError):
        correlation_experiment(ModelSpec("TFI", (8,), h=1.0))
    with pytest.raises(ValueError):
        correlation_experiment(ModelSpec("FreeFermion1D", (8,), filling=0))


@pytest.mark.parametrize("n", [2, 4, 8])
@pytest.mark.parametrize("hf", [0.5, 1.0, 1.5])
def test_tfi_z_vs_dense(n, hf):
    assert abs(tfi_z(n, hf) - dense_spin_diagonalization(n, hf).z_mean) < 1e-8


def test_tfi_z_all_sites_consistent():
    assert np.isclose(tfi_z(16, 0.8), tfi_z(16, 0.8, all_sites=True))


@pytest.mark.parametrize("hf", [0.1, 0.5, 1.2])
def test_xx_chain_vs_dense(hf):
    _, st = build_model(ModelSpec("XXChain", (8,), h=hf))
    ed = dense_spin_diagonalization(8, hf, "xx")
    eng = Engine(st)
    z = np.array([eng.expect(LocalOperator.one(np.diag([1.0, -1.0])), [x]).real for x in range(8)])
    assert np.abs(z - ed.z).max() < 1e-8


def test_xx_sector_limits():
    assert xx_sector(8, 5.0)[0] == 8
    assert xx_sector(8, -5.0)[0] == 0


def test_model_terms():
    assert len(model_terms(ModelSpec("TFI", (8,), h=1.0))) == 16
    assert len(hopping_terms((4, 4))) == 32
    with pytest.raises(ValueError):
        model_terms(ModelSpec("XXChain", (8,), h=1.0))
    with pytest.raises(ValueError):
        model_terms(ModelSpec("TFI", (8,), h=1.0, offset=0.0))


def test_susceptibility_small_chain():
    sw = susceptibility_sweep(8, np.arange(0.5, 1.6, 0.1), dh=1e-3, richardson=True)
    ref = []
    for hf in sw.h:
        zp = bdg_solution(tfi_hamiltonian(8, hf + 1e-4)).z_mean
        zm = bdg_solution(tfi_hamiltonian(8, hf - 1e-4)).z_mean
        ref.append(-(zp - zm) / 2e-4)
    assert np.abs(sw.chi - ref).max() < 1e-5
    assert sw.chi.min() > 0


def test_susceptibility_threads_match():
    grid = [0.6, 1.0, 1.4]
    a = susceptibility_sweep(16, grid)
    b = susceptibility_sweep(16, grid, threads=2)
    assert np.allclose(a.chi, b.chi)


def test_susceptibility_errors():
    with pytest.raises(ValueError):
        susceptibility_sweep(8, [])
    with pytest.raises(ValueError):
        susceptibility_sweep(8, [1.0], dh=0)
