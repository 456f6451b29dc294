"""Invariant suites run by ``spectraltn verify``.

Each check returns ``(name, ok, detail)``; nothing here raises on a failed
comparison.
"""
from __future__ import annotations

import numpy as np

from .circuit import build_qfft_1d, build_qfft_2d, dft_matrix, single_particle_matrix
from .engine import Engine, LocalOperator, expect_all_two_site, energy
from .graded import WireSpace, creation
from .models import ModelSpec, build_model, correlation_experiment, tfi_terms, tfi_z
from .oracle import (
    bdg_solution,
    covariance_row,
    dense_spin_diagonalization,
    hopping_hamiltonian,
    orbital_matrix,
    slater_statevector,
    tfi_hamiltonian,
    wick_g1_g2,
)
from .state import MomentumOccupation, build_state, dense_amplitudes


def _check(name, err, tol):
    return name, bool(err <= tol), f"max error {err:.3e} (tol {tol:.0e})"


def gate_unitarity(sizes=(2, 4, 8, 16, 32, 64)):
    worst = 0.0
    for n in sizes:
        for c in (build_qfft_1d(n), build_qfft_1d(n, 2)):
            for _, _, pl in c.placements():
                m = pl.gate.matrix
                worst = max(worst, np.abs(m.conj().T @ m - np.eye(len(m))).max())
    return _check("gate unitarity", worst, 1e-12)


def dft_equivalence(sizes=(2, 4, 8, 16, 32, 64)):
    worst = 0.0
    for n in sizes:
        worst = max(worst, np.abs(single_particle_matrix(build_qfft_1d(n)) - dft_matrix(n)).max())
    for nx, ny in ((4, 4), (8, 8), (4, 8)):
        ref = np.kron(dft_matrix(nx), dft_matrix(ny))
        worst = max(worst, np.abs(single_particle_matrix(build_qfft_2d(nx, ny)) - ref).max())
    return _check("DFT equivalence", worst, 1e-12)


def slater_equivalence(n=8, trials=10, seed=0):
    rng = np.random.default_rng(seed)
    h = hopping_hamiltonian((n,))
    c = build_qfft_1d(n)
    worst = 0.0
    for _ in range(trials):
        occ = MomentumOccupation(tuple(rng.integers(0, 2, n)))
        psi = dense_amplitudes(build_state(c, occ)).ravel()
        if occ.particle_number == 0:
            ref = np.zeros(1 << n, dtype=complex)
            ref[0] = 1.0
        else:
            ref = slater_statevector(orbital_matrix(h, occ.occ))
        worst = max(worst, np.abs(psi - ref).max())
    return _check(f"amplitudes vs Slater (n={n})", worst, 1e-10)


def correlation_equivalence(n=64, filling=13):
    spec = ModelSpec("FreeFermion1D", (n,), filling=filling)
    h, state = build_model(spec)
    g1, g2 = correlation_experiment(spec)
    w1, w2 = wick_g1_g2(covariance_row(h, state.occupation.occ, 0))
    err = max(np.abs(g1.values - w1).max(), np.abs(g2.values - w2).max())
    return _check(f"g1/g2 vs Wick (n={n}, N={filling})", err, 1e-10)


def sign_structure(n=64, filling=21):
    spec = ModelSpec("FreeFermion1D", (n,), filling=filling)
    h, state = build_model(spec)
    cd = creation(WireSpace(1))
    s = expect_all_two_site(state, cd, cd.T, 0)
    ref = covariance_row(h, state.occupation.occ, 0)
    return _check(f"<c0^dag cD> with sign (n={n})", np.abs(s.values - ref).max(), 1e-10)


def tfi_equivalence(n=64, fields=(0.5, 1.0, 2.0)):
    worst = 0.0
    for hf in fields:
        spec = ModelSpec("TFI", (n,), h=hf)
        _, state = build_model(spec)
        b = bdg_solution(tfi_hamiltonian(n, hf))
        worst = max(worst, abs(tfi_z(n, hf) - b.z_mean))
        worst = max(worst, abs(energy(state, tfi_terms(n, hf)) - b.ground_energy))
    return _check(f"TFI <Z> and energy vs BdG (n={n})", worst, 1e-8)


def dense_spin_checks(sizes=(2, 4, 8), fields=(0.3, 1.0, 1.7)):
    """Engine against dense diagonalization at every power-of-two ``n <= 12``,
    plus the BdG oracle against dense diagonalization at ``n = 12``."""
    worst = 0.0
    for hf in fields:
        for n in sizes:
            worst = max(worst, abs(tfi_z(n, hf) - dense_spin_diagonalization(n, hf).z_mean))
        b = bdg_solution(tfi_hamiltonian(12, hf))
        worst = max(worst, abs(b.z_mean - dense_spin_diagonalization(12, hf).z_mean))
        _, st = build_model(ModelSpec("XXChain", (8,), h=hf / 4))
        ed8 = dense_spin_diagonalization(8, hf / 4, "xx")
        z = Engine(st).expect(LocalOperator.one(np.diag([1.0, -1.0])), [0]).real
        worst = max(worst, abs(z - ed8.z[0]))
    return _check("TFI/XX <Z> vs dense diagonalization (n <= 12)", worst, 1e-8)


def cost_counters(n=256):
    _, state = build_model(ModelSpec("FreeFermion1D", (n,), filling=n // 5))
    n_op = LocalOperator.one(np.diag([0.0, 1.0]))
    eng = Engine(state)
    eng.expect(n_op, [n // 3])
    one = eng.stats.steps
    eng = Engine(state)
    eng.expect_all_one_site(n_op)
    allone = eng.stats.steps
    bound = 2 * n * int(np.log2(n))
    ok = one == n - 1 and allone <= bound
    return "cost counters", ok, f"one-site steps {one} (want {n - 1}); all one-site {allone} (bound {bound})"


FAST = (gate_unitarity, dft_equivalence, slater_equivalence, correlation_equivalence, sign_structure, tfi_equivalence, cost_counters)
FULL = FAST + (dense_spin_checks,)


def run(level: str = "fast"):
    if level not in ("fast", "full"):
        raise ValueError("level must be 'fast' or 'full'")
    out = []
    for fn in FAST if level == "fast" else FULL:
        try:
            out.append(fn())
        except Exception as exc:  # a crash is a failed check, not a usage error
            out.append((fn.__name__, False, f"raised {type(exc).__name__}: {exc}"))
    return out
