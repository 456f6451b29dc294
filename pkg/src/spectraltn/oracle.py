"""Independent free-fermion ground truth.

Everything here is deliberately simple (dense linear algebra, determinants,
exact diagonalization) and shares no code path with the contraction engine.
Fock basis convention: ``|n_0 n_1 ...> = (c_0^dag)^{n_0} (c_1^dag)^{n_1} ... |0>``
stored at index ``sum_x n_x 2**(n-1-x)`` (site 0 is the most significant bit).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

HERMITIAN_TOL = 1e-12


class NotTranslationInvariant(ValueError):
    pass


def _as_sparse(m) -> sp.csr_matrix:
    if m is None:
        return None
    return sp.csr_matrix(m, dtype=complex)


@dataclass(frozen=True)
class QuadraticHamiltonian:
    """``H = sum A_ij c_i^dag c_j + sum (B_ij c_i^dag c_j^dag + h.c.) + constant``.

    ``dims`` is the lattice shape (site index is C order over it) and
    ``offset`` the boundary twist along the first axis: with ``offset=0.5``
    the natural momenta are ``k + 1/2``.
    """

    hopping: object
    pairing: object = None
    constant: float = 0.0
    dims: tuple = None
    offset: float = 0.0

    def __post_init__(self):
        a = _as_sparse(self.hopping)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("hopping must be square")
        d = a - a.getH()
        if d.nnz and abs(d).max() > HERMITIAN_TOL:
            raise ValueError("hopping matrix is not Hermitian")
        object.__setattr__(self, "hopping", a)
        if self.pairing is not None:
            b = _as_sparse(self.pairing)
            if b.shape != (n, n):
                raise ValueError("pairing must match hopping shape")
            if b.nnz and abs(b + b.T).max() > HERMITIAN_TOL:
                raise ValueError("pairing matrix is not antisymmetric")
            if b.nnz == 0:
                b = None
            object.__setattr__(self, "pairing", b)
        dims = (n,) if self.dims is None else tuple(int(d) for d in self.dims)
        if int(np.prod(dims)) != n:
            raise ValueError("dims do not match the number of sites")
        object.__setattr__(self, "dims", dims)
        if self.offset not in (0, 0.0, 0.5):
            raise ValueError("offset must be 0 or 1/2")
        if self.offset and len(dims) != 1:
            raise ValueError("momentum offset is only supported in 1D")

    @property
    def n(self) -> int:
        return self.hopping.shape[0]

    @property
    def has_pairing(self) -> bool:
        return self.pairing is not None

    # -- momentum space -------------------------------------------------------

    def _twists(self):
        return (float(self.offset),) + (0.0,) * (len(self.dims) - 1)

    def translation(self, axis: int) -> sp.csr_matrix:
        """Single-particle (twisted) translation by one site along ``axis``."""
        dims = self.dims
        n = self.n
        idx = np.arange(n)
        coords = np.array(np.unravel_index(idx, dims))
        shifted = coords.copy()
        shifted[axis] = (coords[axis] + 1) % dims[axis]
        wrap = coords[axis] == dims[axis] - 1
        phase = np.where(wrap, np.exp(2j * np.pi * self._twists()[axis]), 1.0)
        rows = np.ravel_multi_index(tuple(shifted), dims)
        return sp.csr_matrix((phase, (rows, idx)), shape=(n, n))

    def check_translation_invariance(self, tol: float = 1e-10) -> None:
        for axis in range(len(self.dims)):
            t = self.translation(axis)
            d = t @ self.hopping @ t.getH() - self.hopping
            if d.nnz and abs(d).max() > tol:
                raise NotTranslationInvariant("hopping is not translation invariant")
            if self.pairing is not None:
                d = t @ self.pairing @ t.T - self.pairing
                if d.nnz and abs(d).max() > tol:
                    raise NotTranslationInvariant("pairing is not translation invariant")

    def momenta(self) -> np.ndarray:
        """``(n, d)`` array of momentum labels ``k_a + twist_a`` in C order."""
        grids = np.meshgrid(*[np.arange(d, dtype=float) for d in self.dims], indexing="ij")
        return np.stack([g.ravel() + t for g, t in zip(grids, self._twists())], axis=1)

    def _row0_phases(self, cols: np.ndarray, sign: float) -> np.ndarray:
        pos = np.array(np.unravel_index(cols, self.dims)).T  # (m, d)
        q = self.momenta()  # (n, d)
        frac = (q[:, None, :] * pos[None, :, :] / np.array(self.dims)).sum(-1)
        return np.exp(sign * 2j * np.pi * frac)  # (n, m)

    def dispersion(self, check: bool = True) -> np.ndarray:
        """``eps[k]`` with ``H_hop = sum_k eps[k] c~_k^dag c~_k``."""
        if check:
            self.check_translation_invariance()
        row = self.hopping.getrow(0)
        cols, vals = row.indices, row.data
        return (self._row0_phases(cols, +1.0) @ vals).real

    def partner(self) -> np.ndarray:
        """Index of the momentum ``-q`` for every ``q``."""
        q = self.momenta()
        neg = np.mod(-q - np.array(self._twists()), np.array(self.dims, dtype=float))
        return np.ravel_multi_index(tuple(np.rint(neg.T).astype(int)), self.dims)

    def pairing_momentum(self, check: bool = True) -> np.ndarray:
        """``delta[k]``: coefficient of ``c~_k^dag c~_{-k}^dag`` (``B~_{k,-k} - B~_{-k,k}``)."""
        if check:
            self.check_translation_invariance()
        if self.pairing is None:
            return np.zeros(self.n, dtype=complex)
        row = self.pairing.getrow(0)
        cols, vals = row.indices, row.data
        # B~_{q q'} = sum_j B_0j exp(-2 pi i q' r_j) for q' the partner of q
        beta = self._row0_phases(cols, -1.0) @ vals  # beta[q'] = sum_j B_0j e^{-i q' r_j}
        part = self.partner()
        return beta[part] - beta


@dataclass
class CorrelationSeries:
    offsets: list
    values: np.ndarray
    normalization: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if len(self.offsets) != len(self.values):
            raise ValueError("offsets and values differ in length")


# --- free-fermion builders ------------------------------------------------------


def hopping_hamiltonian(dims, t: float = 1.0, offset: float = 0.0) -> QuadraticHamiltonian:
    """Nearest-neighbour tunnelling ``-t sum_<ij> c_i^dag c_j + h.c.``, periodic."""
    dims = tuple(int(d) for d in dims)
    n = int(np.prod(dims))
    rows, cols, vals = [], [], []
    idx = np.arange(n)
    coords = np.array(np.unravel_index(idx, dims))
    for axis, d in enumerate(dims):
        if d == 1:
            continue
        nb = coords.copy()
        nb[axis] = (coords[axis] + 1) % d
        j = np.ravel_multi_index(tuple(nb), dims)
        wrap = coords[axis] == d - 1
        tw = offset if axis == 0 else 0.0
        phase = np.where(wrap, np.exp(2j * np.pi * tw), 1.0)
        rows += [idx, j]
        cols += [j, idx]
        vals += [-t * np.conj(phase) * np.ones(n), -t * phase * np.ones(n)]
    a = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    a.sum_duplicates()
    return QuadraticHamiltonian(a, None, 0.0, dims, offset)


def tfi_hamiltonian(n: int, h: float, offset: float = 0.5) -> QuadraticHamiltonian:
    """Fermionized ``sum_i X_i X_{i+1} + h Z_i`` on a ring.

    ``c_i = (X_i + i Y_i)/2 prod_{j<i} Z_j`` gives
    ``X_i X_{i+1} = (c_i^dag - c_i)(c_{i+1}^dag + c_{i+1})`` and
    ``Z_i = 1 - 2 n_i``; the closing bond carries the sign ``-P`` so that
    ``offset=0.5`` is the even-parity sector and ``offset=0`` the odd one.
    """
    if n < 2:
        raise ValueError("need at least two sites")
    a = np.zeros((n, n), dtype=complex)
    b = np.zeros((n, n), dtype=complex)
    closing = np.exp(2j * np.pi * offset)
    for i in range(n):
        j = (i + 1) % n
        s = closing if j < i else 1.0
        a[i, j] += s
        a[j, i] += np.conj(s)
        b[i, j] += 0.5 * s
        b[j, i] -= 0.5 * s
        a[i, i] -= 2.0 * h
    return QuadraticHamiltonian(a, b, float(h * n), (n,), offset)


# --- covariance and Wick --------------------------------------------------------


def plane_wave_orbitals(h: QuadraticHamiltonian, modes) -> np.ndarray:
    """Columns ``phi_k(x) = n**-0.5 exp(2 pi i (k + twist) . x)`` for the given momentum indices."""
    q = h.momenta()[list(modes)]  # (N, d)
    pos = np.array(np.unravel_index(np.arange(h.n), h.dims)).T  # (n, d)
    frac = (pos[:, None, :] * q[None, :, :] / np.array(h.dims)).sum(-1)
    return np.exp(2j * np.pi * frac) / np.sqrt(h.n)


def occupied_modes(occ, species: int = 1) -> list:
    """``(k, b)`` pairs present in a momentum occupation, ascending."""
    out = []
    for k, lab in enumerate(np.asarray(occ).ravel()):
        for b in range(species):
            if (int(lab) >> b) & 1:
                out.append((k, b))
    return out


def orbital_matrix(h: QuadraticHamiltonian, occ, species: int = 1) -> np.ndarray:
    """``(n*s, N)`` orbital matrix; rows are ``site * s + species``."""
    modes = occupied_modes(occ, species)
    ks = [k for k, _ in modes]
    phi = plane_wave_orbitals(h, ks) if ks else np.zeros((h.n, 0), dtype=complex)
    out = np.zeros((h.n * species, len(modes)), dtype=complex)
    for col, (_, b) in enumerate(modes):
        out[b::species, col] = phi[:, col]
    return out


def covariance_matrix(h: QuadraticHamiltonian, occ=None, species: int = 1, count: int | None = None) -> np.ndarray:
    """``G[i, j] = <c_i^dag c_j>`` for a plane-wave Slater determinant.

    If ``h`` is not translation invariant the lowest ``count`` eigenorbitals of
    the hopping matrix are used instead of ``occ``.
    """
    if h.has_pairing:
        raise ValueError("covariance_matrix needs a number-conserving Hamiltonian")
    try:
        h.check_translation_invariance()
        phi = orbital_matrix(h, occ, species)
    except NotTranslationInvariant:
        if count is None:
            count = int(sum(bin(int(a)).count("1") for a in np.asarray(occ).ravel()))
        w, v = np.linalg.eigh(h.hopping.toarray())
        phi = v[:, :count]
    return phi.conj() @ phi.T


def covariance_row(h: QuadraticHamiltonian, occ, site: int = 0) -> np.ndarray:
    """Row ``G[site, :]`` without building the full matrix (one species)."""
    modes = [k for k, _ in occupied_modes(occ, 1)]
    if not modes:
        return np.zeros(h.n, dtype=complex)
    q = h.momenta()[modes]  # (N, d)
    dims = np.array(h.dims)
    pos = np.array(np.unravel_index(np.arange(h.n), h.dims)).T  # (n, d)
    q_over = q / dims
    ref = np.exp(-2j * np.pi * (pos[site] * q_over).sum(-1))  # conj(phi_k(site)) * sqrt(n)
    out = np.empty(h.n, dtype=complex)
    # chunks over target sites keep memory at O(chunk * N)
    step = max(1, (1 << 22) // len(modes))
    for a in range(0, h.n, step):
        ph = np.exp(2j * np.pi * (pos[a : a + step] @ q_over.T))
        out[a : a + step] = ph @ ref / h.n
    return out


def wick_g1_g2(g_row: np.ndarray, nu: float | None = None, origin: int = 0):
    """Normalized ``g1(D) = G_0D / nu`` and ``g2(D) = 1 - |G_0D|^2 / nu^2`` (``D != 0``).

    ``g_row`` is ``G[origin, :]``; ``g2`` at ``D = 0`` is ``<n_0 n_0>/nu^2 = 1/nu``.
    """
    g_row = np.asarray(g_row)
    if nu is None:
        nu = g_row[origin].real
    if nu <= 0:
        raise ValueError("density is zero; correlation functions undefined")
    g1 = g_row / nu
    g2 = 1.0 - np.abs(g_row) ** 2 / nu**2
    g2 = np.asarray(g2, dtype=float)
    g2[origin] = 1.0 / nu
    return g1, g2


def slater_amplitude(orbitals: np.ndarray, positions) -> complex:
    """Amplitude of ``c_{x_1}^dag ... c_{x_N}^dag |0>`` (positions ascending)."""
    positions = list(positions)
    if len(positions) != orbitals.shape[1]:
        raise ValueError("need one position per particle")
    if len(set(positions)) != len(positions):
        return 0.0
    if not positions:
        return 1.0
    return complex(np.linalg.det(orbitals[positions, :]))


def slater_statevector(orbitals: np.ndarray) -> np.ndarray:
    """Dense Fock vector of a Slater determinant (``orbitals`` rows = modes)."""
    m, npart = orbitals.shape
    psi = np.zeros(1 << m, dtype=complex)
    for pos in combinations(range(m), npart):
        idx = sum(1 << (m - 1 - x) for x in pos)
        psi[idx] = slater_amplitude(orbitals, pos)
    return psi


# --- dense Fock-space tools ------------------------------------------------------


def fock_annihilators(m: int) -> list:
    """Jordan-Wigner ``c_i`` as sparse matrices on ``m`` modes."""
    a = sp.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    z = sp.csr_matrix(np.diag([1.0, -1.0]))
    eye = sp.identity(2, format="csr")
    out = []
    for i in range(m):
        op = sp.identity(1, format="csr")
        for j in range(m):
            op = sp.kron(op, z if j < i else (a if j == i else eye), format="csr")
        out.append(op)
    return out


def dense_fermion_hamiltonian(h: QuadraticHamiltonian) -> sp.csr_matrix:
    c = fock_annihilators(h.n)
    cd = [x.getH() for x in c]
    dim = 1 << h.n
    out = h.constant * sp.identity(dim, dtype=complex, format="csr")
    a = h.hopping.tocoo()
    for i, j, v in zip(a.row, a.col, a.data):
        out = out + v * (cd[i] @ c[j])
    if h.pairing is not None:
        b = h.pairing.tocoo()
        for i, j, v in zip(b.row, b.col, b.data):
            t = v * (cd[i] @ cd[j])
            out = out + t + t.getH()
    return out.tocsr()


def _lowest(hmat: sp.spmatrix, k: int = 1):
    dim = hmat.shape[0]
    if dim <= 1024:
        w, v = np.linalg.eigh(hmat.toarray())
        return w[:k], v[:, :k]
    w, v = spla.eigsh(hmat, k=k, which="SA", tol=1e-14)
    order = np.argsort(w)
    return w[order], v[:, order]


def pauli_ops(n: int):
    """Sparse ``X_i, Y_i, Z_i`` lists; site 0 is the most significant bit."""
    x = sp.csr_matrix(np.array([[0, 1], [1, 0]], dtype=complex))
    y = sp.csr_matrix(np.array([[0, -1j], [1j, 0]], dtype=complex))
    z = sp.csr_matrix(np.diag([1.0, -1.0]).astype(complex))
    eye = sp.identity(2, format="csr", dtype=complex)

    def site_op(o, i):
        op = sp.identity(1, format="csr", dtype=complex)
        for j in range(n):
            op = sp.kron(op, o if j == i else eye, format="csr")
        return op

    return ([site_op(x, i) for i in range(n)], [site_op(y, i) for i in range(n)], [site_op(z, i) for i in range(n)])


def spin_hamiltonian(n: int, h: float, model: str = "tfi") -> sp.csr_matrix:
    xs, ys, zs = pauli_ops(n)
    dim = 1 << n
    out = sp.csr_matrix((dim, dim), dtype=complex)
    for i in range(n):
        j = (i + 1) % n
        if n == 1:
            break
        if model == "tfi":
            out = out + xs[i] @ xs[j]
        elif model == "xx":
            out = out - 0.5 * (xs[i] @ xs[j] + ys[i] @ ys[j])
        else:
            raise ValueError(f"unknown spin model {model!r}")
    for i in range(n):
        out = out + h * zs[i]
    return out.tocsr()


@dataclass
class SpinGroundState:
    energy: float
    vector: np.ndarray
    z: np.ndarray
    gap: float

    @property
    def z_mean(self) -> float:
        return float(np.mean(self.z))


def dense_spin_diagonalization(n: int, h: float, model: str = "tfi") -> SpinGroundState:
    """Exact ground state of a periodic spin-1/2 ring (``n <= 14``).

    ``tfi``: ``sum X_i X_{i+1} + h Z_i``; ``xx``: ``-sum (X X + Y Y)/2 + h Z_i``.
    """
    if n > 14:
        raise ValueError("dense diagonalization limited to n <= 14")
    hm = spin_hamiltonian(n, h, model)
    w, v = _lowest(hm, k=2)
    vec = v[:, 0]
    _, _, zs = pauli_ops(n)
    z = np.array([np.vdot(vec, zs[i] @ vec).real for i in range(n)])
    return SpinGroundState(float(w[0]), vec, z, float(w[1] - w[0]))


def spin_expectation(vec: np.ndarray, op: sp.spmatrix) -> complex:
    return complex(np.vdot(vec, op @ vec))


# --- Bogoliubov-de Gennes --------------------------------------------------------


@dataclass
class BdGSolution:
    quasiparticle_energies: np.ndarray
    ground_energy: float
    density: np.ndarray
    momentum_occupation: np.ndarray
    anomalous: np.ndarray = None

    @property
    def z_mean(self) -> float:
        return float(np.mean(1.0 - 2.0 * self.density))


def bdg_solution(h: QuadraticHamiltonian) -> BdGSolution:
    """Ground state of a translation-invariant quadratic Hamiltonian.

    Diagonalizes the ``2x2`` Nambu block ``[[eps_k, D_k], [D_k^*, -eps_-k]]``
    for each pair ``(k, -k)`` with ``D_k`` the coefficient of
    ``c~_k^dag c~_-k^dag``; self-partnered momenta are filled iff ``eps < 0``.
    """
    eps = h.dispersion()
    delta = h.pairing_momentum(check=False)
    part = h.partner()
    n = h.n
    e_qp = np.zeros(n)
    nk = np.zeros(n)
    anom = np.zeros(n, dtype=complex)  # <c~_-k c~_k>
    energy = h.constant
    done = np.zeros(n, dtype=bool)
    for k in range(n):
        if done[k]:
            continue
        kb = part[k]
        if kb == k:
            e_qp[k] = abs(eps[k])
            nk[k] = 1.0 if eps[k] < 0 else 0.0
            energy += min(eps[k], 0.0)
            done[k] = True
            continue
        d = delta[k]
        m = np.array([[eps[k], d], [np.conj(d), -eps[kb]]])
        lam, w = np.linalg.eigh(m)
        # modes: gamma_lam = sum_a conj(w[a, lam]) Psi_a, Psi = (c_k, c_-k^dag)
        neg = lam < 0
        energy += eps[kb] + lam[neg].sum()
        nk[k] = float(np.sum(np.abs(w[0, neg]) ** 2))
        nk[kb] = 1.0 - float(np.sum(np.abs(w[1, neg]) ** 2))
        # <c_k c_-k^dag ...>: <Psi_0 Psi_1^dag> = sum_{unocc} w[0] conj(w[1])
        anom[k] = np.sum(w[0, ~neg] * np.conj(w[1, ~neg]))
        e_qp[k] = abs(lam[1])
        e_qp[kb] = abs(lam[0])
        done[k] = done[kb] = True
    density = np.full(n, nk.sum() / n)
    return BdGSolution(e_qp, float(energy), density, nk, anom)


def bdg_real_space(h: QuadraticHamiltonian):
    """Ground energy and ``<n_i>`` from the full ``2n x 2n`` Nambu matrix."""
    a = h.hopping.toarray()
    b = h.pairing.toarray() if h.pairing is not None else np.zeros_like(a)
    n = h.n
    big = np.block([[a, 2 * b], [2 * b.conj().T, -a.T]])
    w, v = np.linalg.eigh(big)
    pos = w > 0
    energy = h.constant + 0.5 * np.trace(a).real - 0.5 * w[pos].sum()
    q = v[:, pos] @ v[:, pos].conj().T  # <Psi Psi^dag>
    density = 1.0 - np.diag(q)[:n].real
    return float(energy), density
