"""Spectral tensor network states: a momentum product state fed through a circuit."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .circuit import (
    Circuit,
    Permutation,
    Placement,
    circuit_from_dict,
    circuit_to_dict,
    gate_from_dict,
    gate_to_dict,
)
from .graded import Gate, WireSpace, graded_transpose, identity_gate, is_parity_preserving, phase_gate
from .oracle import QuadraticHamiltonian

DEGENERACY_TOL = 1e-10
DENSE_LIMIT = 16


@dataclass(frozen=True)
class MomentumOccupation:
    """One basis label per momentum wire; ``degenerate`` flags an open Fermi shell."""

    occ: tuple
    space: WireSpace = WireSpace(1)
    degenerate: bool = False

    def __post_init__(self):
        occ = tuple(int(a) for a in np.asarray(self.occ).ravel())
        if not occ:
            raise ValueError("empty occupation")
        for a in occ:
            if not 0 <= a < self.space.dim:
                raise ValueError(f"label {a} out of range for chi={self.space.dim}")
        object.__setattr__(self, "occ", occ)

    @property
    def n(self) -> int:
        return len(self.occ)

    @property
    def labels(self) -> np.ndarray:
        return np.array(self.occ, dtype=np.int64)

    @property
    def particle_number(self) -> int:
        return sum(bin(a).count("1") for a in self.occ)

    @property
    def parity(self) -> int:
        return self.particle_number & 1

    @classmethod
    def vacuum(cls, n: int, space: WireSpace = WireSpace(1)) -> "MomentumOccupation":
        return cls((0,) * n, space)

    @classmethod
    def from_modes(cls, n: int, modes, space: WireSpace = WireSpace(1)) -> "MomentumOccupation":
        occ = [0] * n
        for k in modes:
            occ[k] |= 1
        return cls(tuple(occ), space)


@dataclass(frozen=True)
class BogoliubovLayer:
    """Two-wire gates on ``(k, -k)`` wire pairs plus one-wire gates on self-partnered wires."""

    pairs: tuple
    gates: tuple
    unpaired: tuple = ()
    unpaired_gates: tuple = ()
    pair_energies: np.ndarray = field(default=None, compare=False)

    def __post_init__(self):
        pairs = tuple((int(a), int(b)) for a, b in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "unpaired", tuple(int(w) for w in self.unpaired))
        if len(self.gates) != len(pairs) or len(self.unpaired_gates) != len(self.unpaired):
            raise ValueError("one gate per pair and per unpaired wire")
        wires = [w for p in pairs for w in p] + list(self.unpaired)
        if sorted(wires) != list(range(len(wires))):
            raise ValueError("pairs and unpaired wires must partition the wires")
        for g in self.gates:
            if g.arity != 2 or not is_parity_preserving(g.matrix, g.space.dim, 2):
                raise ValueError("pair gates must be parity-preserving two-wire gates")
        for g in self.unpaired_gates:
            if g.arity != 1 or not is_parity_preserving(g.matrix, g.space.dim, 1):
                raise ValueError("unpaired gates must be parity-preserving one-wire gates")

    @property
    def n(self) -> int:
        return 2 * len(self.pairs) + len(self.unpaired)

    @property
    def space(self) -> WireSpace:
        return (self.gates or self.unpaired_gates)[0].space

    def layer(self) -> tuple:
        out = [Placement(g, p) for p, g in zip(self.pairs, self.gates)]
        out += [Placement(g, (w,)) for w, g in zip(self.unpaired, self.unpaired_gates)]
        return tuple(out)

    def quasiparticle_energies(self) -> np.ndarray:
        """Excitation energy of a single quasiparticle on each wire (pairs only)."""
        out = np.zeros(self.n)
        if self.pair_energies is None:
            raise ValueError("layer carries no energies")
        for (a, b), e in zip(self.pairs, self.pair_energies):
            # e = (even ground, even excited, |10>, |01>)
            out[a] = e[2] - e[0]
            out[b] = e[3] - e[0]
        return out


@dataclass(frozen=True)
class SpectralState:
    circuit: Circuit
    occupation: MomentumOccupation
    bogoliubov: BogoliubovLayer = None
    momentum_offset: float = 0.0

    def __post_init__(self):
        if self.occupation.n != self.circuit.num_wires:
            raise ValueError("occupation length does not match circuit wires")
        if self.occupation.space != self.circuit.wire_space:
            raise ValueError("occupation and circuit use different wire spaces")
        if self.bogoliubov is not None and self.bogoliubov.n != self.circuit.num_wires:
            raise ValueError("Bogoliubov layer size does not match circuit")
        if self.momentum_offset not in (0, 0.0, 0.5):
            raise ValueError("momentum offset must be 0 or 1/2")

    @property
    def n(self) -> int:
        return self.circuit.num_wires

    @property
    def space(self) -> WireSpace:
        return self.circuit.wire_space

    @cached_property
    def full_circuit(self) -> Circuit:
        """Bogoliubov layer, transform and offset phases as one circuit."""
        c = self.circuit
        if self.momentum_offset:
            c = apply_momentum_offset(c, self.momentum_offset)
        if self.bogoliubov is not None:
            c = c.with_layers((self.bogoliubov.layer(),) + c.layers)
        return c


# --- construction ----------------------------------------------------------------


def _sorted_with_ties(values: np.ndarray, tol: float):
    order = np.argsort(values, kind="stable")
    groups, cur = [], [order[0]]
    for i in order[1:]:
        if abs(values[i] - values[cur[-1]]) <= tol:
            cur.append(i)
        else:
            groups.append(sorted(cur))
            cur = [i]
    groups.append(sorted(cur))
    return groups


def ground_state_occupation(h: QuadraticHamiltonian, count: int, tol: float = DEGENERACY_TOL) -> MomentumOccupation:
    """Fill the ``count`` lowest momentum modes (ties broken by wire index)."""
    if h.has_pairing:
        raise ValueError("ground_state_occupation needs zero pairing")
    n = h.n
    if not 0 <= count <= n:
        raise ValueError(f"particle number {count} outside [0, {n}]")
    eps = h.dispersion()
    chosen, degenerate = [], False
    for g in _sorted_with_ties(eps, tol):
        room = count - len(chosen)
        if room <= 0:
            break
        if len(g) > room:
            degenerate = True
        chosen.extend(g[:room])
    occ = np.zeros(n, dtype=np.int64)
    occ[chosen] = 1
    return MomentumOccupation(tuple(occ), WireSpace(1), degenerate)


def build_state(c: Circuit, occ: MomentumOccupation, bog: BogoliubovLayer = None, momentum_offset: float = 0.0) -> SpectralState:
    return SpectralState(c, occ, bog, momentum_offset)


def apply_momentum_offset(c: Circuit, offset: float) -> Circuit:
    """Append phases ``exp(i pi x / n * n_x)`` on the real-space wires.

    The result maps wire ``k`` to ``n**-0.5 sum_x exp(2 pi i (k + 1/2) x / n) c_x^dag``.
    """
    if offset not in (0, 0.0, 0.5):
        raise ValueError("offset must be 0 or 1/2")
    if len(c.dims) != 1:
        raise ValueError("momentum offset is only supported for 1D circuits")
    if not offset:
        return c
    n = c.num_wires
    layer = []
    for w in range(n):
        x = c.site_permutation.image[w]
        if x:
            layer.append(Placement(phase_gate(2 * np.pi * offset * x / n, c.wire_space, f"OFFSET({x},{n})"), (w,)))
    return c.with_layers(c.layers + (tuple(layer),))


def _pair_unitary(eps_a: float, eps_b: float, delta: complex):
    """Eigenbasis of ``eps_a n_a + eps_b n_b + delta c_a^dag c_b^dag + h.c.`` (basis 2 n_a + n_b)."""
    even = np.array([[0.0, np.conj(delta)], [delta, eps_a + eps_b]], dtype=complex)
    lam, vec = np.linalg.eigh(even)
    u = np.zeros((4, 4), dtype=complex)
    u[np.ix_([0, 3], [0, 3])] = vec
    u[1, 1] = u[2, 2] = 1.0
    return u, np.array([lam[0], lam[1], eps_a, eps_b])


def bogoliubov_from_hamiltonian(h: QuadraticHamiltonian, excitations=None):
    """Bogoliubov layer and quasiparticle occupation for a translation-invariant ``h``.

    Wire ``k`` carries momentum ``k + offset`` and is paired with the wire
    holding ``-k - 2 offset``.  Each pair gate diagonalizes the even-parity
    block ``{|00>, |11>}``; the returned occupation is the ground state unless
    ``excitations`` (a set of wires) asks for quasiparticles on top of it.
    """
    eps = h.dispersion()
    delta = h.pairing_momentum(check=False)
    part = h.partner()
    space = WireSpace(1)
    pairs, gates, energies, unpaired, ugates = [], [], [], [], []
    occ = np.zeros(h.n, dtype=np.int64)
    for k in range(h.n):
        kb = int(part[k])
        if kb == k:
            unpaired.append(k)
            ugates.append(identity_gate(space, 1))
            occ[k] = 1 if eps[k] < 0 else 0
            continue
        if kb < k:
            continue
        u, e = _pair_unitary(eps[k], eps[kb], delta[k])
        pairs.append((k, kb))
        gates.append(Gate.from_matrix(u, space, 2, f"BOG({k},{kb})", tol=1e-10))
        energies.append(e)
        best = int(np.argmin(e))
        occ[k], occ[kb] = [(0, 0), (1, 1), (1, 0), (0, 1)][best]
    layer = BogoliubovLayer(tuple(pairs), tuple(gates), tuple(unpaired), tuple(ugates), np.array(energies).reshape(-1, 4))
    if excitations:
        for w in excitations:
            occ[w] ^= 1
    return layer, MomentumOccupation(tuple(occ), space)


def pair_residual(h: QuadraticHamiltonian, layer: BogoliubovLayer) -> float:
    """Largest off-diagonal element of each rotated pair Hamiltonian."""
    eps = h.dispersion(check=False)
    delta = h.pairing_momentum(check=False)
    worst = 0.0
    for (a, b), g in zip(layer.pairs, layer.gates):
        hp = np.diag([0.0, eps[b], eps[a], eps[a] + eps[b]]).astype(complex)
        hp[3, 0] = delta[a]
        hp[0, 3] = np.conj(delta[a])
        r = g.matrix.conj().T @ hp @ g.matrix
        worst = max(worst, np.abs(r - np.diag(np.diag(r))).max())
    return float(worst)


# --- dense verification path -------------------------------------------------------


def _apply_gate(psi: np.ndarray, pl: Placement) -> np.ndarray:
    n = psi.ndim
    wires = list(pl.wires)
    rest = [w for w in range(n) if w not in wires]
    perm = wires + rest
    t = graded_transpose(psi, perm)
    d = pl.gate.space.dim ** len(wires)
    t = (pl.gate.matrix @ t.reshape(d, -1)).reshape(t.shape)
    inv = np.argsort(perm)
    return graded_transpose(t, list(inv))


def apply_circuit_dense(psi: np.ndarray, c: Circuit, include_permutation: bool = True) -> np.ndarray:
    for layer in c.layers:
        if isinstance(layer, Permutation):
            psi = graded_transpose(psi, list(layer.inverse().image))
            continue
        for pl in layer:
            psi = _apply_gate(psi, pl)
    if include_permutation:
        # bottom wire w holds site image[w]; reorder to site order
        psi = graded_transpose(psi, list(c.site_permutation.inverse().image))
    return psi


def dense_amplitudes(state: SpectralState) -> np.ndarray:
    """Statevector over real-space sites (C order, site 0 first)."""
    n, s = state.n, state.space.num_species
    if n * s > DENSE_LIMIT:
        raise ValueError(f"dense amplitudes limited to n*s <= {DENSE_LIMIT}")
    psi = np.zeros((state.space.dim,) * n, dtype=complex)
    psi[tuple(state.occupation.occ)] = 1.0
    return apply_circuit_dense(psi, state.full_circuit).ravel()


def to_fock_order(psi: np.ndarray, n: int, species: int) -> np.ndarray:
    """Reindex a label-basis vector to Fock order with mode ``site * s + b``.

    Within a wire, species ``b`` is label bit ``b``; in the Fock index the
    first mode of a site is its most significant bit.  Mode order (and so
    every sign) is the same in both.
    """
    if species == 1:
        return psi
    rev = [int(format(a, f"0{species}b")[::-1], 2) for a in range(1 << species)]
    t = np.asarray(psi).reshape((1 << species,) * n)
    for ax in range(n):
        t = np.take(t, rev, axis=ax)
    return t.ravel()


# --- interchange -------------------------------------------------------------------

STATE_FORMAT = "spectraltn-state"


def state_to_dict(state: SpectralState) -> dict:
    d = {
        "format": STATE_FORMAT,
        "version": 1,
        "circuit": circuit_to_dict(state.circuit),
        "occupation": list(state.occupation.occ),
        "degenerate": state.occupation.degenerate,
        "momentum_offset": state.momentum_offset,
        "bogoliubov": None,
    }
    if state.bogoliubov is not None:
        b = state.bogoliubov
        d["bogoliubov"] = {
            "pairs": [gate_to_dict(g, p) for p, g in zip(b.pairs, b.gates)],
            "unpaired": [gate_to_dict(g, (w,)) for w, g in zip(b.unpaired, b.unpaired_gates)],
        }
    return d


def state_from_dict(d: dict) -> SpectralState:
    if d.get("format") != STATE_FORMAT:
        raise ValueError("not a spectraltn state document")
    c = circuit_from_dict(d["circuit"])
    occ = MomentumOccupation(tuple(d["occupation"]), c.wire_space, bool(d.get("degenerate", False)))
    bog = None
    if d.get("bogoliubov"):
        b = d["bogoliubov"]
        pairs = [tuple(g["wires"]) for g in b["pairs"]]
        gates = [gate_from_dict(g, c.wire_space, 2) for g in b["pairs"]]
        unp = [g["wires"][0] for g in b["unpaired"]]
        ugates = [gate_from_dict(g, c.wire_space, 1) for g in b["unpaired"]]
        bog = BogoliubovLayer(tuple(pairs), tuple(gates), tuple(unp), tuple(ugates))
    return SpectralState(c, occ, bog, float(d.get("momentum_offset", 0.0)))


def dumps_state(state: SpectralState) -> str:
    return json.dumps(state_to_dict(state))


def loads_state(text: str) -> SpectralState:
    return state_from_dict(json.loads(text))
