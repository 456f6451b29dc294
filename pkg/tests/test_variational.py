import numpy as np
import pytest

from spectraltn.engine import Engine, LocalOperator, energy
from spectraltn.graded import WireSpace, creation
from spectraltn.models import ModelSpec, build_model, hopping_terms, tfi_terms
from spectraltn.oracle import bdg_solution, covariance_row, tfi_hamiltonian
from spectraltn.state import MomentumOccupation, dense_amplitudes, loads_state
from spectraltn.variational import (
    OptimizationConfig,
    bond_grow,
    merge_terms,
    minimize_energy,
    template_from_state,
    variational_template,
    write_checkpoint,
    write_energy_trace,
)

CD = creation(WireSpace(1))
C = CD.T.copy()


def test_config_validation():
    with pytest.raises(ValueError):
        OptimizationConfig(rule="adam")
    with pytest.raises(ValueError):
        OptimizationConfig(init="zeros")
    with pytest.raises(ValueError):
        OptimizationConfig(tolerance=0)


def test_template_from_state_same_amplitudes():
    _, st = build_model(ModelSpec("TFI", (8,), h=0.6))
    t = template_from_state(st)
    a, b = dense_amplitudes(st), dense_amplitudes(t)
    assert abs(abs(np.vdot(a, b)) - 1) < 1e-10


def test_qfft_template_is_exact_for_free_fermions():
    spec = ModelSpec("FreeFermion1D", (8,), filling=3)
    h, st = build_model(spec)
    t = variational_template((8,), st.occupation, init="qfft", pairing=False)
    assert abs(energy(t, hopping_terms((8,))) - energy(st, hopping_terms((8,)))) < 1e-12


def test_exact_start_does_not_move():
    n, hf = 8, 1.0
    _, st = build_model(ModelSpec("TFI", (n,), h=hf))
    t = template_from_state(st)
    ref = bdg_solution(tfi_hamiltonian(n, hf)).ground_energy
    r = minimize_energy(t, tfi_terms(n, hf), OptimizationConfig(max_sweeps=2, tolerance=1e-14, rule="gradient"))
    assert abs(r.energy - ref) < 1e-8
    assert abs(r.energies[0] - ref) < 1e-10


@pytest.mark.parametrize("rule", ["svd-polar", "gradient"])
def test_tfi_from_qfft_init(rule):
    n, hf = 4, 1.0
    t = variational_template((n,), init="qfft", offset=0.5)
    ref = bdg_solution(tfi_hamiltonian(n, hf)).ground_energy
    r = minimize_energy(t, tfi_terms(n, hf), OptimizationConfig(max_sweeps=60, tolerance=1e-13, rule=rule))
    assert abs(r.energy - ref) < 1e-8
    steps = np.array(r.step_energies)
    assert np.all(np.diff(steps) <= 1e-12)


def test_gates_stay_unitary():
    t = variational_template((8,), init="random", seed=4, offset=0.5)
    r = minimize_energy(t, tfi_terms(8, 1.2), OptimizationConfig(max_sweeps=2, rule="gradient"))
    for layer in r.state.circuit.layers:
        for pl in layer:
            m = pl.gate.matrix
            assert np.abs(m.conj().T @ m - np.eye(len(m))).max() < 1e-10


def test_free_fermion_from_random_monotone():
    occ = MomentumOccupation.from_modes(8, [0, 1, 7])
    t = variational_template((8,), occ, init="random", seed=0, pairing=False)
    r = minimize_energy(t, hopping_terms((8,)), OptimizationConfig(max_sweeps=6, rule="svd-polar"))
    assert np.all(np.diff(r.energies) <= 1e-12)
    assert r.energy < r.energies[0]


def test_errors():
    t = variational_template((8,), init="identity", pairing=False)
    with pytest.raises(ValueError):
        minimize_energy(t, [(LocalOperator.one(CD @ C + CD), [0])])
    with pytest.raises(ValueError):
        minimize_energy(t, [(LocalOperator.one(np.array([[0, 1j], [0, 0]])), [0])])
    with pytest.raises(ValueError):
        variational_template((8, 8), pairing=True)


def test_bond_grow_identity_factor():
    _, st = build_model(ModelSpec("FreeFermion1D", (8,), filling=3))
    assert bond_grow(st, 1) is st
    with pytest.raises(ValueError):
        bond_grow(st, 3)
    _, tfi = build_model(ModelSpec("TFI", (8,), h=1.0))
    with pytest.raises(ValueError):
        bond_grow(tfi, 2)


@pytest.mark.parametrize("factor", [2, 4])
def test_bond_grow_preserves_observables(factor):
    n = 16
    h, st = build_model(ModelSpec("FreeFermion1D", (n,), filling=5))
    big = bond_grow(st, factor)
    assert big.n == n // factor and big.space.num_species == factor
    e = energy(big, merge_terms(hopping_terms((n,)), factor))
    assert abs(e - energy(st, hopping_terms((n,)))) < 1e-10
    row = covariance_row(h, st.occupation.occ, 1)
    eng = Engine(big)
    for y in range(n):
        if y == 1:
            continue
        (op, sites), = merge_terms([(LocalOperator.two(CD, C), [1, y])], factor)
        v = eng.expect(op, sites)
        assert abs(v - row[y]) < 1e-10


def test_merged_not_worse_than_unmerged():
    n = 8
    occ = MomentumOccupation.from_modes(n, [0, 1, 7])
    terms = hopping_terms((n,))
    t1 = variational_template((n,), occ, init="random", seed=0, pairing=False)
    r1 = minimize_energy(t1, terms, OptimizationConfig(max_sweeps=8, rule="svd-polar"))
    _, st = build_model(ModelSpec("FreeFermion1D", (n,), filling=3))
    t2 = template_from_state(bond_grow(st, 2))
    r2 = minimize_energy(t2, merge_terms(terms, 2), OptimizationConfig(max_sweeps=2, rule="svd-polar"))
    assert r2.energy <= r1.energy + 1e-10


def test_outputs(tmp_path):
    t = variational_template((4,), init="qfft", offset=0.5)
    r = minimize_energy(t, tfi_terms(4, 1.0), OptimizationConfig(max_sweeps=3, rule="gradient"))
    write_energy_trace(tmp_path / "trace.csv", r, {"model": "TFI"})
    lines = (tmp_path / "trace.csv").read_text().splitlines()
    assert lines[0].startswith("#") and "sweep,energy" in lines
    assert len([x for x in lines if x[0].isdigit()]) == len(r.energies)
    write_checkpoint(tmp_path / "ck.json", r)
    back = loads_state((tmp_path / "ck.json").read_text())
    assert abs(energy(back, tfi_terms(4, 1.0)) - r.energy) < 1e-10
