"""Acceptance criteria 1-8.

Each test records a single PASS/FAIL line (printed in the terminal summary
and to stdout) before asserting, so a failure still reports its numbers.
"""
import os
import time
from itertools import product

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import ACCEPTANCE
from spectraltn.circuit import build_qfft_1d, build_qfft_2d, dft_matrix, single_particle_matrix
from spectraltn.engine import Engine, LocalOperator, compile_state, energy, environment, expect_all_two_site
from spectraltn.graded import WireSpace, creation, number
from spectraltn.models import ModelSpec, build_model, correlation_experiment, susceptibility_sweep, tfi_terms, tfi_z
from spectraltn.oracle import (
    QuadraticHamiltonian,
    bdg_solution,
    covariance_row,
    dense_fermion_hamiltonian,
    dense_spin_diagonalization,
    hopping_hamiltonian,
    orbital_matrix,
    slater_statevector,
    tfi_hamiltonian,
    wick_g1_g2,
)
from spectraltn.state import (
    MomentumOccupation,
    bogoliubov_from_hamiltonian,
    build_state,
    dense_amplitudes,
    to_fock_order,
)
from spectraltn.variational import OptimizationConfig, minimize_energy, variational_template

CD = creation(WireSpace(1))
C = CD.T.copy()


def report(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[k] = line
    print(line)
    assert ok, line


# --- 1 ------------------------------------------------------------------------------


def test_criterion_1_circuit():
    t0 = time.time()
    worst = 0.0
    for n in (2, 4, 8, 16, 32, 64):
        worst = max(worst, np.abs(single_particle_matrix(build_qfft_1d(n)) - dft_matrix(n)).max())
    for nx, ny in ((4, 4), (8, 8)):
        ref = np.kron(dft_matrix(nx), dft_matrix(ny))
        worst = max(worst, np.abs(single_particle_matrix(build_qfft_2d(nx, ny)) - ref).max())
    dt = time.time() - t0
    report(1, worst <= 1e-12 and dt < 1.0, f"max |U - DFT| = {worst:.2e} (tol 1e-12), {dt:.2f} s (< 1 s)")


# --- 2 ------------------------------------------------------------------------------


def _twisted_shift(n, d, offset):
    t = np.zeros((n, n), dtype=complex)
    for i in range(n):
        t[i, (i + d) % n] = np.exp(2j * np.pi * offset) if i + d >= n else 1.0
    return t


def _random_bdg(n, offset, rng):
    a = np.zeros((n, n), dtype=complex)
    b = np.zeros((n, n), dtype=complex)
    for d in range(n):
        t = _twisted_shift(n, d, offset)
        a += (rng.normal() + 1j * rng.normal()) * t
        b += (rng.normal() + 1j * rng.normal()) * t
    return QuadraticHamiltonian(a + a.conj().T, b - b.T, 0.0, (n,), offset)


def test_criterion_2_states():
    t0 = time.time()
    rng = np.random.default_rng(2)
    geoms = [(n,) for n in (2, 4, 8)] + [(2, 2), (2, 4), (4, 2)]
    slater_err, cases = 0.0, 0
    for dims, s in product(geoms, range(1, 7)):
        n = int(np.prod(dims))
        if n * s > 12:
            continue
        h = hopping_hamiltonian(dims)
        c = build_qfft_1d(n, s) if len(dims) == 1 else build_qfft_2d(*dims, s)
        for _ in range(50):
            occ = MomentumOccupation(tuple(rng.integers(0, 1 << s, n)), WireSpace(s))
            psi = to_fock_order(dense_amplitudes(build_state(c, occ)), n, s)
            if occ.particle_number:
                ref = slater_statevector(orbital_matrix(h, occ.occ, s))
            else:
                ref = np.zeros(1 << (n * s), dtype=complex)
                ref[0] = 1.0
            slater_err = max(slater_err, np.abs(psi - ref).max())
            cases += 1
    bdg_err = 0.0
    for n, offset in product((2, 4, 8), (0.0, 0.5)):
        for _ in range(10):
            h = _random_bdg(n, offset, rng)
            layer, occ = bogoliubov_from_hamiltonian(h)
            psi = dense_amplitudes(build_state(build_qfft_1d(n), occ, layer, offset))
            w, v = np.linalg.eigh(dense_fermion_hamiltonian(h).toarray())
            ph = np.vdot(v[:, 0], psi)
            bdg_err = max(bdg_err, np.abs(psi * np.conj(ph) / abs(ph) - v[:, 0]).max())
    dt = time.time() - t0
    ok = slater_err <= 1e-10 and bdg_err <= 1e-8 and dt < 30
    report(2, ok, f"{cases} occupations: Slater err {slater_err:.2e} (1e-10); BdG err {bdg_err:.2e} (1e-8); {dt:.1f} s (< 30 s)")


# --- 3 ------------------------------------------------------------------------------


def test_criterion_3_correlations_1d():
    t0 = time.time()
    spec = ModelSpec("FreeFermion1D", (1024,), filling=103)
    h, st = build_model(spec)
    g1, g2 = correlation_experiment(spec)
    w1, w2 = wick_g1_g2(covariance_row(h, st.occupation.occ, 0))
    err = max(np.abs(g1.values - w1).max(), np.abs(g2.values - w2).max())
    d = np.array(g2.offsets)
    v = g2.values
    far = v[(d > 256) & (d < 768)].mean()
    # antibunching: g2 vanishes at contact, grows to 1 over about one spacing
    dip = v[d == 1][0] < 0.2 and abs(far - 1) < 0.01 and v[d == 1][0] < v[d == 5][0] < far + 0.1
    dt = time.time() - t0
    ok = err <= 1e-10 and dip and not st.occupation.degenerate and dt < 120
    report(3, ok, f"n=1024 N=103: max err {err:.2e} (1e-10); g2(1)={v[d == 1][0]:.3f}, g2(far)={far:.4f}; {dt:.1f} s (< 120 s)")


# --- 4 ------------------------------------------------------------------------------


def _criterion_4(side, filling):
    spec = ModelSpec("FreeFermion2D", (side, side), filling=filling)
    h, st = build_model(spec)
    g1, g2 = correlation_experiment(spec)
    w1, w2 = wick_g1_g2(covariance_row(h, st.occupation.occ, 0))
    sites = [dx * side + dy for dx, dy in g2.offsets]
    return np.abs(g2.values - w2[sites]).max(), st.occupation.degenerate


def test_criterion_4_correlations_2d():
    t0 = time.time()
    filling = int(round(64 * 64 * 2093 / 512**2))
    err, degen = _criterion_4(64, filling)
    dt = time.time() - t0
    report(4, filling == 33 and err <= 1e-8, f"64x64 N={filling}: g2 max err {err:.2e} (1e-8), degenerate shell={degen}; {dt:.1f} s")


@pytest.mark.slow
@pytest.mark.skipif(not os.environ.get("SPECTRALTN_LONG"), reason="set SPECTRALTN_LONG=1 for the 512x512 run")
def test_criterion_4_full_lattice():
    t0 = time.time()
    err, _ = _criterion_4(512, 2093)
    dt = time.time() - t0
    report("4b", err <= 1e-8 and dt < 3600, f"512x512 N=2093: g2 max err {err:.2e} (1e-8); {dt:.0f} s (< 3600 s)")


# --- 5 ------------------------------------------------------------------------------


def test_criterion_5_susceptibility():
    t0 = time.time()
    grid = np.round(0.2 + 0.02 * np.arange(81), 12)
    sw = susceptibility_sweep(1024, grid)
    i = int(np.argmax(sw.chi))
    interior = [k for k in range(1, len(grid) - 1) if sw.chi[k] > sw.chi[k - 1] and sw.chi[k] > sw.chi[k + 1]]
    peak_ok = len(interior) == 1 and abs(grid[i] - 1.0) <= 0.02 + 1e-12
    # engine vs dense diagonalization at the powers of two n <= 12; BdG at n = 12
    zerr = 0.0
    for hf in grid:
        for n in (2, 4, 8):
            zerr = max(zerr, abs(tfi_z(n, hf) - dense_spin_diagonalization(n, hf).z_mean))
        zerr = max(zerr, abs(bdg_solution(tfi_hamiltonian(12, hf)).z_mean - dense_spin_diagonalization(12, hf).z_mean))
    dt = time.time() - t0
    ok = peak_ok and zerr <= 1e-8 and dt < 600
    report(5, ok, f"peak at h={grid[i]:.2f} ({len(interior)} local max); <Z> err vs dense {zerr:.2e} (1e-8); {dt:.0f} s (< 600 s)")


# --- 6 ------------------------------------------------------------------------------


def test_criterion_6_costs():
    n = 256
    _, st = build_model(ModelSpec("FreeFermion1D", (n,), filling=51))
    nop = LocalOperator.one(np.diag([0.0, 1.0]))
    bound = 2 * n * int(np.log2(n))
    eng = Engine(st)
    eng.expect(nop, [77])
    one = eng.stats.steps
    eng = Engine(st)
    eng.expect_all_one_site(nop)
    allone = eng.stats.steps
    eng = Engine(st)
    expect_all_two_site(st, CD, C, 0, eng)
    alltwo = eng.stats.steps
    rng = np.random.default_rng(6)
    chis, c1, c2 = [], [], []
    for s in (1, 2, 3):
        sp = WireSpace(s)
        m = 16
        stc = build_state(build_qfft_1d(m, s), MomentumOccupation(tuple(rng.integers(0, 1 << s, m)), sp))
        nn = number(sp)
        e = Engine(stc)
        e.expect(LocalOperator.one(nn), [5])
        c1.append(e.stats.madds / e.stats.steps)
        e = Engine(stc)
        e.expect(LocalOperator.two(nn, nn), [5, 12])
        c2.append(e.stats.max_step_madds)
        chis.append(sp.dim)
    p1 = np.polyfit(np.log(chis), np.log(c1), 1)[0]
    p2 = np.polyfit(np.log(chis), np.log(c2), 1)[0]
    ok = one == n - 1 and allone <= bound and alltwo <= bound and 4.5 <= p1 <= 5.5 and 7.0 <= p2 <= 8.5
    report(6, ok, f"n={n}: one-site {one} steps, all one-site {allone}, all two-site {alltwo} (bound {bound}); exponents {p1:.2f}, {p2:.2f}")


# --- 7 ------------------------------------------------------------------------------


def test_criterion_7_variational():
    t0 = time.time()
    n, hf = 8, 1.5
    terms = tfi_terms(n, hf)
    ref = dense_spin_diagonalization(n, hf).energy
    t = variational_template((n,), init="identity", offset=0.5)
    cfg = OptimizationConfig(max_sweeps=200, tolerance=1e-4, rule="gradient", init="identity")
    r = minimize_energy(t, terms, cfg, callback=lambda s, e: abs(e - ref) / abs(ref) <= 1e-3)
    rel = abs(r.energy - ref) / abs(ref)
    rise = float(np.max(np.diff(r.step_energies)))
    # environment vs central differences on every gate of the final state
    st = r.state
    net = compile_state(st)
    rng = np.random.default_rng(7)
    fd_err = 0.0
    for g in [g for layer in net.layers for g in layer]:
        env = environment(st, terms, g.key, net).reshape(4, 4)
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        k = a - a.conj().T
        k[np.ix_([0, 3], [1, 2])] = 0
        k[np.ix_([1, 2], [0, 3])] = 0
        pred = 2 * np.sum(env * (g.core @ k)).real
        old, vals = g.core, []
        for step in (1e-5, -1e-5):
            g.core = old @ expm(step * k)
            net.tensors.clear()
            vals.append(energy(st, terms, Engine(st, net)))
        g.core = old
        net.tensors.clear()
        fd = (vals[0] - vals[1]) / 2e-5
        fd_err = max(fd_err, abs(fd - pred) / max(abs(fd), 1e-3))
    dt = time.time() - t0
    ok = rel <= 1e-3 and r.sweeps <= 200 and rise <= 1e-12 and fd_err <= 1e-4 and dt < 300
    report(7, ok, f"rel err {rel:.2e} after {r.sweeps} sweeps; max step rise {rise:.1e}; env vs FD {fd_err:.1e}; {dt:.0f} s (< 300 s)")


# --- 8 ------------------------------------------------------------------------------


def test_criterion_8_sign_structure():
    n = 64
    h, st = build_model(ModelSpec("FreeFermion1D", (n,), filling=21))
    s = expect_all_two_site(st, CD, C, 0)
    ref = covariance_row(h, st.occupation.occ, 0)
    err = np.abs(s.values - ref).max()
    neg = int(np.sum(ref.real < -1e-3))
    report(8, err <= 1e-10 and neg > 0, f"n={n}: max |<c0^dag cD> - oracle| {err:.2e} over {n} offsets ({neg} negative entries)")
