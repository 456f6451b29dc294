import numpy as np
import pytest

from spectraltn.circuit import build_qfft_1d, build_qfft_2d
from spectraltn.graded import WireSpace
from spectraltn.oracle import (
    bdg_solution,
    dense_fermion_hamiltonian,
    hopping_hamiltonian,
    orbital_matrix,
    slater_statevector,
    tfi_hamiltonian,
)
from spectraltn.state import (
    BogoliubovLayer,
    MomentumOccupation,
    bogoliubov_from_hamiltonian,
    build_state,
    dense_amplitudes,
    dumps_state,
    ground_state_occupation,
    loads_state,
    pair_residual,
)


def test_occupation_validation():
    with pytest.raises(ValueError):
        MomentumOccupation((0, 2))
    with pytest.raises(ValueError):
        MomentumOccupation(())
    occ = MomentumOccupation((3, 1, 0), WireSpace(2))
    assert occ.particle_number == 3 and occ.parity == 1


def test_state_size_mismatch():
    with pytest.raises(ValueError):
        build_state(build_qfft_1d(4), MomentumOccupation((0, 1)))
    with pytest.raises(ValueError):
        build_state(build_qfft_1d(4), MomentumOccupation.vacuum(4), momentum_offset=0.25)


def test_vacuum_amplitudes():
    psi = dense_amplitudes(build_state(build_qfft_1d(8), MomentumOccupation.vacuum(8)))
    assert np.isclose(psi[0], 1) and np.isclose(np.linalg.norm(psi), 1)


@pytest.mark.parametrize("n", [2, 4, 8, 16])
def test_single_particle_is_plane_wave(n):
    k = n // 2 - 1 if n > 2 else 1
    psi = dense_amplitudes(build_state(build_qfft_1d(n), MomentumOccupation.from_modes(n, [k])))
    amps = np.array([psi[1 << (n - 1 - x)] for x in range(n)])
    ref = np.exp(2j * np.pi * k * np.arange(n) / n) / np.sqrt(n)
    assert np.allclose(amps, ref, atol=1e-12)


@pytest.mark.parametrize("offset", [0.0, 0.5])
def test_slater_amplitudes(rng, offset):
    n = 8
    h = hopping_hamiltonian((n,), 1.0, offset)
    c = build_qfft_1d(n)
    for _ in range(5):
        modes = sorted(rng.choice(n, size=3, replace=False))
        occ = MomentumOccupation.from_modes(n, modes)
        psi = dense_amplitudes(build_state(c, occ, None, offset))
        ref = slater_statevector(orbital_matrix(h, occ.occ))
        assert np.abs(psi - ref).max() < 1e-10


def test_slater_2d():
    h = hopping_hamiltonian((2, 4))
    occ = ground_state_occupation(h, 3)
    psi = dense_amplitudes(build_state(build_qfft_2d(2, 4), occ))
    assert np.abs(psi - slater_statevector(orbital_matrix(h, occ.occ))).max() < 1e-10


def test_ground_state_occupation_degeneracy():
    h = hopping_hamiltonian((8,))
    occ = ground_state_occupation(h, 2)
    assert occ.degenerate and occ.particle_number == 2
    assert not ground_state_occupation(h, 3).degenerate
    with pytest.raises(ValueError):
        ground_state_occupation(h, 9)


@pytest.mark.parametrize("hf", [0.4, 1.0, 1.6])
def test_bogoliubov_ground_state(hf):
    h = tfi_hamiltonian(8, hf)
    layer, occ = bogoliubov_from_hamiltonian(h)
    assert pair_residual(h, layer) < 1e-12
    psi = dense_amplitudes(build_state(build_qfft_1d(8), occ, layer, 0.5))
    hd = dense_fermion_hamiltonian(h)
    e = np.vdot(psi, hd @ psi).real
    assert abs(e - bdg_solution(h).ground_energy) < 1e-10
    assert np.linalg.norm(hd @ psi - e * psi) < 1e-9


def test_quasiparticle_energies_positive():
    layer, _ = bogoliubov_from_hamiltonian(tfi_hamiltonian(8, 0.7))
    assert layer.quasiparticle_energies().min() > -1e-12


def test_excitation_raises_energy():
    h = tfi_hamiltonian(8, 0.7)
    hd = dense_fermion_hamiltonian(h)
    c = build_qfft_1d(8)
    layer, occ = bogoliubov_from_hamiltonian(h)
    e0 = np.vdot(p := dense_amplitudes(build_state(c, occ, layer, 0.5)), hd @ p).real
    a, b = layer.pairs[0]
    layer2, occ2 = bogoliubov_from_hamiltonian(h, {a})
    p2 = dense_amplitudes(build_state(c, occ2, layer2, 0.5))
    e1 = np.vdot(p2, hd @ p2).real
    assert np.isclose(e1 - e0, layer.quasiparticle_energies()[a])


def test_bogoliubov_layer_validation():
    layer, _ = bogoliubov_from_hamiltonian(tfi_hamiltonian(4, 1.0))
    with pytest.raises(ValueError):
        BogoliubovLayer(layer.pairs, layer.gates[:-1], layer.unpaired, layer.unpaired_gates)


def test_state_round_trip():
    h = tfi_hamiltonian(8, 1.2)
    layer, occ = bogoliubov_from_hamiltonian(h)
    st = build_state(build_qfft_1d(8), occ, layer, 0.5)
    back = loads_state(dumps_state(st))
    assert np.allclose(dense_amplitudes(back), dense_amplitudes(st))
    with pytest.raises(ValueError):
        loads_state('{"format": "other"}')


def test_dense_limit():
    with pytest.raises(ValueError):
        dense_amplitudes(build_state(build_qfft_1d(32), MomentumOccupation.vacuum(32)))
