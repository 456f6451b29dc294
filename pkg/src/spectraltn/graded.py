"""Fermion-parity graded tensors, the elementary gates and graded contraction.

Basis conventions
-----------------
A wire with ``s`` fermion species has ``chi = 2**s`` basis states labelled by
integers; bit ``b`` of the label is the occupation of species ``b`` and

    |label> = (c_0^dag)^{n_0} (c_1^dag)^{n_1} ... |0>

so species are ordered low bit first.  Multi-wire tensors are stored in
C order over their legs, and a multi-wire basis state ``|a_1 a_2 ...>``
means the creation strings of the legs applied left to right.  Reordering
legs is therefore a graded permutation that picks up ``(-1)**(p_a p_b)`` for
every pair of legs that cross.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

DEFAULT_TOL = 1e-10
UNITARY_TOL = 1e-12


@dataclass(frozen=True)
class WireSpace:
    num_species: int = 1

    def __post_init__(self):
        if self.num_species < 1:
            raise ValueError("num_species must be >= 1")

    @property
    def dim(self) -> int:
        return 1 << self.num_species

    def parity(self, a: int) -> int:
        return bin(a).count("1") & 1

    @property
    def parities(self) -> np.ndarray:
        return parity_vector(self.dim)


@lru_cache(maxsize=None)
def _parity_vector(dim: int) -> np.ndarray:
    v = np.array([bin(a).count("1") & 1 for a in range(dim)], dtype=np.int64)
    v.setflags(write=False)
    return v


def parity_vector(dim: int) -> np.ndarray:
    """Parities of the basis labels ``0 .. dim-1``."""
    return _parity_vector(int(dim))


def parity_signs(dim: int) -> np.ndarray:
    return 1.0 - 2.0 * parity_vector(dim)


def pair_sign(dim_a: int, dim_b: int) -> np.ndarray:
    """``(-1)**(p_a p_b)`` as a ``(dim_a, dim_b)`` array."""
    pa = parity_vector(dim_a)
    pb = parity_vector(dim_b)
    return 1.0 - 2.0 * np.outer(pa, pb)


def permutation_sign(dims: Sequence[int], perm: Sequence[int]) -> np.ndarray:
    """Sign array, broadcastable over legs with ``dims``, of a graded permutation.

    ``perm[i]`` is the old position of the leg that ends up at position ``i``.
    """
    k = len(dims)
    pos = np.empty(k, dtype=np.int64)
    pos[list(perm)] = np.arange(k)
    sign = np.ones(tuple(dims))
    for a in range(k):
        for b in range(a + 1, k):
            if pos[a] > pos[b]:
                shape = [1] * k
                shape[a] = dims[a]
                sa = parity_vector(dims[a]).reshape(shape)
                shape = [1] * k
                shape[b] = dims[b]
                sb = parity_vector(dims[b]).reshape(shape)
                sign = sign * (1 - 2 * (sa * sb))
    return sign


def graded_transpose(t: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """Reorder the legs of a state-like tensor with fermionic crossing signs."""
    perm = list(perm)
    if perm == list(range(t.ndim)):
        return t
    return np.transpose(t * permutation_sign(t.shape, perm), perm)


def graded_transpose_operator(op: np.ndarray, perm: Sequence[int]) -> np.ndarray:
    """Reorder the modes of an operator tensor with legs (ket..., bra...)."""
    k = op.ndim // 2
    perm = list(perm)
    if perm == list(range(k)):
        return op
    s = permutation_sign(op.shape[:k], perm)
    full = op * s.reshape(s.shape + (1,) * k) * s.reshape((1,) * k + s.shape)
    return np.transpose(full, perm + [k + p for p in perm])


def partial_trace_tail(op: np.ndarray, keep: int) -> np.ndarray:
    """Trace out every mode after the first ``keep`` of an operator tensor.

    With the kept modes leading, this is the ordinary partial trace and the
    result reproduces all expectation values on the kept modes, odd ones
    included.
    """
    k = op.ndim // 2
    dims = op.shape[:k]
    dk = int(np.prod(dims[:keep], dtype=np.int64))
    dr = int(np.prod(dims[keep:], dtype=np.int64))
    m = op.reshape(dk, dr, dk, dr)
    return np.einsum("arbr->ab", m).reshape(dims[:keep] * 2)


def graded_kron(*ops: np.ndarray) -> np.ndarray:
    """Product of parity-even operators on disjoint mode groups, in the given order."""
    out = np.ones((), dtype=complex)
    for op in ops:
        k_out = out.ndim // 2
        k_op = op.ndim // 2
        t = np.multiply.outer(out, op)
        perm = (
            list(range(k_out))
            + [2 * k_out + i for i in range(k_op)]
            + [k_out + i for i in range(k_out)]
            + [2 * k_out + k_op + i for i in range(k_op)]
        )
        out = np.transpose(t, perm)
    return out


@dataclass(frozen=True)
class GradedTensor:
    """Dense complex tensor whose legs are fermionic wires.

    ``modes`` labels each leg; the tuple order is the fermionic mode order
    the data is written in.
    """

    indices: tuple
    data: np.ndarray
    modes: tuple = field(default=None)

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        shape = tuple(w.dim for w in self.indices)
        if data.shape != shape:
            raise ValueError(f"data shape {data.shape} does not match wire dims {shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        modes = self.modes if self.modes is not None else tuple(range(len(self.indices)))
        if len(modes) != len(self.indices):
            raise ValueError("one mode label per index required")
        object.__setattr__(self, "modes", tuple(modes))

    @property
    def rank(self) -> int:
        return len(self.indices)

    def transpose(self, perm: Sequence[int]) -> "GradedTensor":
        perm = list(perm)
        return GradedTensor(
            tuple(self.indices[p] for p in perm),
            graded_transpose(self.data, perm),
            tuple(self.modes[p] for p in perm),
        )

    def conj(self) -> "GradedTensor":
        return GradedTensor(self.indices, self.data.conj(), self.modes)

    def dagger(self) -> "GradedTensor":
        """Complex conjugate with the leg order reversed (the graded adjoint)."""
        rev = list(range(self.rank))[::-1]
        return GradedTensor(
            tuple(self.indices[i] for i in rev),
            np.transpose(self.data.conj(), rev),
            tuple(self.modes[i] for i in rev),
        )


def contract(a: GradedTensor, b: GradedTensor, pairs: Sequence[tuple[int, int]]) -> GradedTensor:
    """Contract legs ``a[i]`` with ``b[j]`` for each ``(i, j)`` in ``pairs``.

    The contracted legs of ``a`` are moved (graded) to its end in pair order
    and those of ``b`` to its front in the mirrored order, so that the bonds
    nest without crossings; the plain contraction is then sign free.  Result
    legs are the surviving legs of ``a`` followed by those of ``b``, each in
    their original relative order.
    """
    ia = [p[0] for p in pairs]
    ib = [p[1] for p in pairs]
    if len(set(ia)) != len(ia) or len(set(ib)) != len(ib):
        raise ValueError("duplicate index in pairs")
    for i, j in pairs:
        if a.indices[i] != b.indices[j]:
            raise ValueError(f"dimension mismatch between a[{i}] and b[{j}]")
    keep_a = [i for i in range(a.rank) if i not in ia]
    keep_b = [j for j in range(b.rank) if j not in ib]
    at = graded_transpose(a.data, keep_a + ia)
    bt = graded_transpose(b.data, ib[::-1] + keep_b)
    k = len(pairs)
    da = int(np.prod([a.indices[i].dim for i in keep_a], dtype=np.int64))
    db = int(np.prod([b.indices[j].dim for j in keep_b], dtype=np.int64))
    dc = int(np.prod([a.indices[i].dim for i in ia], dtype=np.int64))
    # a's contracted legs are in pair order; b's reversed, so flip b's block
    bt = bt.reshape(tuple(b.indices[j].dim for j in ib[::-1]) + (db,))
    bt = np.transpose(bt, list(range(k))[::-1] + [k]).reshape(dc, db)
    out = at.reshape(da, dc) @ bt
    shape = tuple(a.indices[i].dim for i in keep_a) + tuple(b.indices[j].dim for j in keep_b)
    return GradedTensor(
        tuple(a.indices[i] for i in keep_a) + tuple(b.indices[j] for j in keep_b),
        out.reshape(shape),
        tuple(a.modes[i] for i in keep_a) + tuple(b.modes[j] for j in keep_b),
    )


# --- gates -----------------------------------------------------------------


@dataclass(frozen=True)
class Gate:
    """A one- or two-wire unitary with legs ``(out..., in...)``."""

    tensor: GradedTensor
    label: str = "custom"
    tol: float = UNITARY_TOL

    def __post_init__(self):
        r = self.tensor.rank
        if r not in (2, 4):
            raise ValueError("gates act on one or two wires")
        k = r // 2
        if self.tensor.indices[:k] != self.tensor.indices[k:]:
            raise ValueError("gate input and output wire spaces differ")
        m = self.matrix
        err = np.abs(m.conj().T @ m - np.eye(m.shape[0])).max()
        if err > self.tol:
            raise ValueError(f"gate {self.label} is not unitary (error {err:.2e})")

    @property
    def arity(self) -> int:
        return self.tensor.rank // 2

    @property
    def space(self) -> WireSpace:
        return self.tensor.indices[0]

    @property
    def matrix(self) -> np.ndarray:
        d = self.tensor.indices[0].dim ** (self.tensor.rank // 2)
        return self.tensor.data.reshape(d, d)

    def dagger(self) -> "Gate":
        return Gate.from_matrix(self.matrix.conj().T, self.space, self.arity, self.label + "^dag", self.tol)

    @classmethod
    def from_matrix(cls, m, space: WireSpace, arity: int, label: str = "custom", tol: float = UNITARY_TOL) -> "Gate":
        m = np.asarray(m, dtype=complex)
        shape = (space.dim,) * (2 * arity)
        return cls(GradedTensor((space,) * (2 * arity), m.reshape(shape)), label, tol)


def is_parity_preserving(m: np.ndarray, dim: int, arity: int, tol: float = 1e-12) -> bool:
    p = parity_vector(dim)
    if arity == 1:
        tot = p
    else:
        tot = (p[:, None] + p[None, :]).ravel() & 1
    mask = tot[:, None] != tot[None, :]
    return bool(np.all(np.abs(np.asarray(m)[mask]) <= tol))


def fock_from_single_particle(u: np.ndarray) -> np.ndarray:
    """Fock-space matrix of the number-conserving Gaussian unitary with
    ``U c_j^dag U^dag = sum_i u[i, j] c_i^dag`` on ``m`` modes.

    Basis label bit ``m-1-i`` is the occupation of mode ``i`` (mode 0 is the
    leftmost creation operator and the most significant bit), matching C-order
    reshapes of multi-wire tensors for one species per wire.
    """
    u = np.asarray(u, dtype=complex)
    m = u.shape[0]
    dim = 1 << m
    out = np.zeros((dim, dim), dtype=complex)
    labs = np.arange(dim)
    bits = (labs[:, None] >> (m - 1 - np.arange(m))[None, :]) & 1
    count = bits.sum(1)
    out[0, 0] = 1.0
    for k in range(1, m + 1):
        sel = labs[count == k]
        modes = np.nonzero(bits[sel])[1].reshape(len(sel), k)
        # minors in row blocks to bound memory
        step = max(1, 400_000 // (len(sel) * k * k))
        for r0 in range(0, len(sel), step):
            rows = modes[r0 : r0 + step]
            sub = u[rows[:, None, :, None], modes[None, :, None, :]]
            out[np.ix_(sel[r0 : r0 + step], sel)] = np.linalg.det(sub)
    return out


def _mode_lift(u_modes: np.ndarray, space: WireSpace, arity: int) -> np.ndarray:
    """Lift a single-particle matrix over modes ``(wire, species)`` to a gate matrix.

    ``u_modes`` is indexed by ``wire * s + species``.  The Fock lift uses mode
    order (wire 0 species 0, wire 0 species 1, ...), and labels within a wire
    carry species ``b`` in bit ``b``, so the bit order inside each wire is
    reversed relative to :func:`fock_from_single_particle`.
    """
    s = space.num_species
    m = arity * s
    f = fock_from_single_particle(u_modes)
    dim = 1 << m
    relabel = np.empty(dim, dtype=np.int64)
    for lab in range(dim):
        wires = []
        for w in range(arity):
            wl = 0
            for b in range(s):
                bit = (lab >> (m - 1 - (w * s + b))) & 1
                wl |= bit << b
            wires.append(wl)
        idx = 0
        for wl in wires:
            idx = idx * space.dim + wl
        relabel[lab] = idx
    out = np.zeros_like(f)
    out[np.ix_(relabel, relabel)] = f
    return out


_F2_MATRIX = np.array(
    [
        [1, 0, 0, 0],
        [0, 2**-0.5, 2**-0.5, 0],
        [0, 2**-0.5, -(2**-0.5), 0],
        [0, 0, 0, -1],
    ],
    dtype=complex,
)

# single-particle action of F2 on (first leg, second leg)
F2_SINGLE_PARTICLE = np.array([[-1.0, 1.0], [1.0, 1.0]]) / np.sqrt(2.0)


@lru_cache(maxsize=64)
def f2_gate(space: WireSpace = WireSpace(1)) -> Gate:
    """Two-site fermionic Fourier transform (beam splitter), one per species."""
    if space.num_species == 1:
        return Gate.from_matrix(_F2_MATRIX, space, 2, "F2")
    s = space.num_species
    u = np.zeros((2 * s, 2 * s))
    for b in range(s):
        idx = [b, s + b]
        u[np.ix_(idx, idx)] = F2_SINGLE_PARTICLE
    return Gate.from_matrix(_mode_lift(u, space, 2), space, 2, "F2")


def twiddle_phases(k: int, n: int, space: WireSpace = WireSpace(1)) -> np.ndarray:
    counts = np.array([bin(a).count("1") for a in range(space.dim)])
    return np.exp(2j * np.pi * k * counts / n)


@lru_cache(maxsize=1 << 16)
def twiddle_gate(k: int, n: int, space: WireSpace = WireSpace(1)) -> Gate:
    """Phase ``exp(2 pi i k m / n)`` on a basis state holding ``m`` fermions."""
    if n <= 0:
        raise ValueError("n must be positive")
    return Gate.from_matrix(np.diag(twiddle_phases(k, n, space)), space, 1, f"TWIDDLE({k},{n})")


def phase_gate(phi: float, space: WireSpace = WireSpace(1), label: str | None = None) -> Gate:
    counts = np.array([bin(a).count("1") for a in range(space.dim)])
    return Gate.from_matrix(np.diag(np.exp(1j * phi * counts)), space, 1, label or f"PHASE({phi!r})")


def swap_matrix(da: int, db: int) -> np.ndarray:
    s = pair_sign(da, db)
    out = np.zeros((db, da, da, db), dtype=complex)
    for x in range(da):
        for y in range(db):
            out[y, x, x, y] = s[x, y]
    return out.reshape(da * db, da * db)


def swap_gate(a: WireSpace = WireSpace(1), b: WireSpace | None = None) -> Gate:
    """Fermionic swap ``|x>|y> -> (-1)**(p_x p_y) |y>|x>``."""
    b = a if b is None else b
    if a != b:
        raise ValueError("swap between different wire spaces is not a square gate")
    return Gate.from_matrix(swap_matrix(a.dim, b.dim), a, 2, "SWAP")


def identity_gate(space: WireSpace, arity: int = 2) -> Gate:
    return Gate.from_matrix(np.eye(space.dim**arity), space, arity, "ID")


# --- local fermion operators -------------------------------------------------


def creation(space: WireSpace, species: int = 0) -> np.ndarray:
    """``c_b^dag`` on one wire in the label basis."""
    d = space.dim
    out = np.zeros((d, d))
    below = (1 << species) - 1
    for a in range(d):
        if not (a >> species) & 1:
            sign = -1.0 if bin(a & below).count("1") & 1 else 1.0
            out[a | (1 << species), a] = sign
    return out


def annihilation(space: WireSpace, species: int = 0) -> np.ndarray:
    return creation(space, species).T.copy()


def number(space: WireSpace, species: int | None = None) -> np.ndarray:
    d = space.dim
    if species is None:
        return np.diag([float(bin(a).count("1")) for a in range(d)])
    return np.diag([float((a >> species) & 1) for a in range(d)])


def parity_operator(space: WireSpace) -> np.ndarray:
    return np.diag(parity_signs(space.dim))


def operator_parity(m: np.ndarray, tol: float = 1e-14) -> int | None:
    """0 for even, 1 for odd, ``None`` for mixed parity."""
    m = np.asarray(m)
    p = parity_vector(m.shape[0])
    odd_mask = (p[:, None] ^ p[None, :]).astype(bool)
    has_odd = np.abs(m[odd_mask]).max(initial=0.0) > tol
    has_even = np.abs(m[~odd_mask]).max(initial=0.0) > tol
    if has_odd and has_even:
        return None
    return 1 if has_odd else 0


def random_parity_unitary(space: WireSpace, arity: int, rng: np.random.Generator) -> np.ndarray:
    """Haar random unitary within each total-parity block."""
    d = space.dim**arity
    p = parity_vector(space.dim)
    tot = p if arity == 1 else ((p[:, None] + p[None, :]).ravel() & 1)
    out = np.zeros((d, d), dtype=complex)
    for par in (0, 1):
        idx = np.flatnonzero(tot == par)
        z = (rng.standard_normal((len(idx), len(idx))) + 1j * rng.standard_normal((len(idx), len(idx)))) / np.sqrt(2)
        q, r = np.linalg.qr(z)
        q = q * (np.diag(r) / np.abs(np.diag(r)))
        out[np.ix_(idx, idx)] = q
    return out


def parity_polar(m: np.ndarray, dim: int, arity: int) -> np.ndarray:
    """Unitary polar factor of ``m`` taken blockwise in total parity."""
    p = parity_vector(dim)
    tot = p if arity == 1 else ((p[:, None] + p[None, :]).ravel() & 1)
    out = np.zeros_like(m, dtype=complex)
    for par in (0, 1):
        idx = np.flatnonzero(tot == par)
        blk = m[np.ix_(idx, idx)]
        u, _, vh = np.linalg.svd(blk)
        out[np.ix_(idx, idx)] = u @ vh
    return out


__all__ = [
    "DEFAULT_TOL",
    "Gate",
    "GradedTensor",
    "WireSpace",
    "annihilation",
    "contract",
    "creation",
    "f2_gate",
    "fock_from_single_particle",
    "graded_kron",
    "graded_transpose",
    "graded_transpose_operator",
    "identity_gate",
    "is_parity_preserving",
    "number",
    "operator_parity",
    "pair_sign",
    "parity_operator",
    "parity_polar",
    "parity_vector",
    "partial_trace_tail",
    "permutation_sign",
    "phase_gate",
    "random_parity_unitary",
    "swap_gate",
    "twiddle_gate",
]

