"""Expectation values of spectral states by outside-in contraction.

The circuit is compiled into layers of two-wire gates (one-wire gates are
folded into their neighbours, wire permutations into relabelings).  Reduced
densities of one or two wires are then computed top-down with memoization:
a wire's density after layer ``j`` needs only the densities of the gate
inputs at layer ``j-1``, and inputs whose past light cones are disjoint are
uncorrelated, so their joint density is a product.  Gates that do not touch
the wires of interest cancel against their adjoints and are never visited.
"""
from __future__ import annotations

import bisect
import sys
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .circuit import Permutation
from .graded import operator_parity, parity_signs, permutation_sign
from .oracle import CorrelationSeries
from .state import SpectralState


# --- operators ----------------------------------------------------------------


@dataclass(frozen=True)
class LocalOperator:
    """Sum of products of one-site operators on one or two sites.

    ``factors`` is a tuple of ``(coefficient, A)`` or ``(coefficient, A, B)``;
    each factor matrix must have definite fermion parity.
    """

    factors: tuple

    def __post_init__(self):
        fs = []
        for f in self.factors:
            coef, *mats = f
            mats = tuple(np.asarray(m, dtype=complex) for m in mats)
            for m in mats:
                if operator_parity(m) is None:
                    raise ValueError("operator factor without definite parity")
            fs.append((complex(coef),) + mats)
        if not fs:
            raise ValueError("empty operator")
        support = {len(f) - 1 for f in fs}
        if len(support) != 1 or support.pop() not in (1, 2):
            raise ValueError("all factors must act on the same number (1 or 2) of sites")
        object.__setattr__(self, "factors", tuple(fs))

    @property
    def support(self) -> int:
        return len(self.factors[0]) - 1

    @property
    def dim(self) -> int:
        return self.factors[0][1].shape[0]

    @classmethod
    def one(cls, a, coef: float = 1.0) -> "LocalOperator":
        return cls(((coef, a),))

    @classmethod
    def two(cls, a, b, coef: float = 1.0) -> "LocalOperator":
        return cls(((coef, a, b),))

    def parities(self) -> list:
        return [tuple(operator_parity(m) for m in f[1:]) for f in self.factors]

    def matrix(self) -> np.ndarray:
        """Matrix in the local basis of the (ordered) support.

        For two sites a product ``A_x B_y`` becomes ``(A P**p(B)) (x) B`` with
        ``P`` the local parity; no string between the sites is required.
        """
        d = self.dim
        if self.support == 1:
            return sum(f[0] * f[1] for f in self.factors)
        out = np.zeros((d * d, d * d), dtype=complex)
        p = np.diag(parity_signs(d))
        for coef, a, b in self.factors:
            if operator_parity(b) == 1:
                a = a @ p
            out += coef * np.kron(a, b)
        return out

    def dagger(self) -> "LocalOperator":
        return LocalOperator(tuple((np.conj(f[0]),) + tuple(m.conj().T for m in f[1:]) for f in self.factors))


def as_operator(op, support: int = 1) -> LocalOperator:
    if isinstance(op, LocalOperator):
        return op
    m = np.asarray(op, dtype=complex)
    return LocalOperator.one(m)


# --- compilation --------------------------------------------------------------


@dataclass(slots=True)
class FusedGate:
    """Two-wire gate ``left @ core @ right`` on engine wires ``wires``."""

    key: tuple
    wires: tuple
    core: np.ndarray
    left: np.ndarray
    right: np.ndarray
    uid: int = 0

    @property
    def matrix(self) -> np.ndarray:
        return self.left @ self.core @ self.right


@dataclass
class Network:
    n: int
    chi: int
    layers: list  # layers[j-1] is the list of FusedGate in layer j
    top: np.ndarray  # (n, chi) top vectors per engine wire
    site_to_wire: np.ndarray
    touch: list  # per wire: sorted layer indices (1-based)
    gate_at: list  # per layer j: dict wire -> (gate, leg)
    classes: np.ndarray  # (L+1, n) light-cone class ids
    laminar: bool
    masks: list = None  # exact light-cone sets when not laminar
    tensors: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gate_tensor(self, g: FusedGate, swap_out: bool = False, swap_in: bool = False) -> np.ndarray:
        # keyed by the identity of the factor matrices, which compiled gates
        # share; the entry holds them so the ids stay valid
        key = (id(g.left), id(g.core), id(g.right), swap_out, swap_in)
        hit = self.tensors.get(key)
        if hit is None:
            t = orient(g.matrix.reshape((self.chi,) * 4), swap_out, swap_in)
            hit = (g.left, g.core, g.right, np.ascontiguousarray(t))
            self.tensors[key] = hit
        return hit[3]

    def cls(self, j: int, w: int):
        return self.classes[j, w] if self.laminar else self.masks[j][w]

    def related(self, j: int, a: int, b: int) -> bool:
        if self.laminar:
            return self.classes[j, a] == self.classes[j, b]
        return (self.masks[j][a] & self.masks[j][b]) != 0


def orient(g4: np.ndarray, swap_out: bool, swap_in: bool) -> np.ndarray:
    """Exchange the output and/or input legs of a two-wire gate tensor (graded)."""
    chi = g4.shape[-1]
    s = 1.0 - 2.0 * np.outer(K.parity_of(chi), K.parity_of(chi))
    if swap_out:
        g4 = np.swapaxes(g4 * s[..., :, :, None, None], -4, -3)
    if swap_in:
        g4 = np.swapaxes(g4 * s, -2, -1)
    return g4


def _kron2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.kron for small square matrices without its generic overhead
    return (a[:, None, :, None] * b[None, :, None, :]).reshape(a.shape[0] * b.shape[0], -1)


def compile_state(state: SpectralState) -> Network:
    c = state.full_circuit
    n = c.num_wires
    chi = c.wire_space.dim
    eye = np.eye(chi, dtype=complex)
    eye2 = np.eye(chi * chi, dtype=complex)  # shared; fused matrices are replaced, never edited
    cur = list(range(n))
    pending = [None] * n
    last = [None] * n
    layers = []
    uid = 0
    cores = {}  # one matrix per distinct gate object
    for li, layer in enumerate(c.layers):
        if isinstance(layer, Permutation):
            new = [None] * n
            for w, t in enumerate(layer.image):
                new[t] = cur[w]
            cur = new
            continue
        fused = []
        for gi, pl in enumerate(layer):
            ew = tuple(cur[w] for w in pl.wires)
            m = cores.get(id(pl.gate))
            if m is None:
                m = cores[id(pl.gate)] = pl.gate.matrix
            if pl.gate.arity == 1:
                e = ew[0]
                pending[e] = m if pending[e] is None else m @ pending[e]
                continue
            p, q = ew
            if pending[p] is None and pending[q] is None:
                right = eye2
            else:
                right = _kron2(eye if pending[p] is None else pending[p], eye if pending[q] is None else pending[q])
            pending[p] = pending[q] = None
            g = FusedGate((li, gi), ew, m, eye2, right, uid)
            uid += 1
            fused.append(g)
            last[p] = (g, 0)
            last[q] = (g, 1)
        if fused:
            layers.append(fused)
    top = np.zeros((n, chi), dtype=complex)
    for w, a in enumerate(state.occupation.occ):
        top[w, a] = 1.0
    for e in range(n):
        if pending[e] is None:
            continue
        if last[e] is None:
            top[e] = pending[e] @ top[e]
        else:
            g, leg = last[e]
            lm = _kron2(pending[e], eye) if leg == 0 else _kron2(eye, pending[e])
            g.left = lm @ g.left
    site_to_wire = np.empty(n, dtype=np.int64)
    for w, site in enumerate(c.site_permutation.image):
        site_to_wire[site] = cur[w]
    touch = [[] for _ in range(n)]
    gate_at = [None]
    for j, layer in enumerate(layers, start=1):
        d = {}
        for g in layer:
            for leg, w in enumerate(g.wires):
                d[w] = (g, leg)
                touch[w].append(j)
        gate_at.append(d)
    classes, laminar = _light_cones(n, layers)
    masks = None
    if not laminar:
        masks = [[1 << w for w in range(n)]]
        for layer in layers:
            row = list(masks[-1])
            for g in layer:
                p, q = g.wires
                row[p] = row[q] = masks[-1][p] | masks[-1][q]
            masks.append(row)
    return Network(n, chi, layers, top, site_to_wire, touch, gate_at, classes, laminar, masks)


def _light_cones(n: int, layers):
    depth = len(layers)
    classes = np.empty((depth + 1, n), dtype=np.int64)
    classes[0] = np.arange(n)
    size = [1] * n
    merged = {}
    laminar = True
    for j, layer in enumerate(layers, start=1):
        prev = classes[j - 1]
        row = prev.copy()
        for g in layer:
            p, q = g.wires
            if prev[p] == prev[q]:
                continue
            # a union of two live classes is named by the pair, so equal sets share an id
            key = (min(prev[p], prev[q]), max(prev[p], prev[q]))
            if key not in merged:
                size.append(size[prev[p]] + size[prev[q]])
                merged[key] = len(size) - 1
            row[p] = row[q] = merged[key]
        classes[j] = row
        if laminar:
            live = np.unique(row)
            if int(sum(size[i] for i in live)) != n:
                laminar = False
    return classes, laminar


# --- statistics ----------------------------------------------------------------


@dataclass
class Stats:
    steps: int = 0
    madds: int = 0
    max_step_madds: int = 0
    kernel_calls: dict = field(default_factory=dict)
    odd_zero: bool = False

    def record(self, kind: str, madds: int) -> None:
        self.steps += 1
        self.madds += madds
        self.max_step_madds = max(self.max_step_madds, madds)
        self.kernel_calls[kind] = self.kernel_calls.get(kind, 0) + 1

    def reset(self) -> None:
        self.steps = self.madds = self.max_step_madds = 0
        self.kernel_calls = {}
        self.odd_zero = False

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "multiply_adds": self.madds,
            "max_step_multiply_adds": self.max_step_madds,
            "kernel_calls": dict(self.kernel_calls),
        }


# --- contraction -------------------------------------------------------------------


class Engine:
    """Per-batch contraction context: compiled network, memo and counters.

    ``ket_override`` maps a fused-gate uid to a (possibly batched) gate tensor
    used on the ket side only; this is how environments are obtained.
    ``memo`` seeds the density cache, keyed by ``(layer, wires)``; entries
    must come from a network whose gates agree down to that layer.  The
    cache keeps at most ``memo_limit`` entries (default ``max(2**16, 4 n)``),
    dropping the least recently used.  One site touches about ``n``
    densities, and with sites visited in wire order ``4 n`` entries keep
    every reusable density alive, so the step counts are those of an
    unbounded cache while memory stays linear in ``n``.
    """

    MEMO_MIN = 1 << 16

    def __init__(
        self,
        state: SpectralState,
        network: Network = None,
        ket_override: dict = None,
        memo: dict = None,
        memo_limit: int = None,
    ):
        self.state = state
        self.net = network if network is not None else compile_state(state)
        self.memo = OrderedDict(memo) if memo else OrderedDict()
        self.memo_limit = memo_limit or max(self.MEMO_MIN, 4 * self.net.n)
        self.stats = Stats()
        self.ket_override = ket_override or {}
        self.pv = K.parity_of(self.net.chi)
        need = 2 * self.net.depth + 100
        if sys.getrecursionlimit() < need:
            sys.setrecursionlimit(need)

    # -- helpers -----------------------------------------------------------

    def wire(self, site: int) -> int:
        n = self.net.n
        if not 0 <= site < n:
            raise IndexError(f"site {site} out of range [0, {n})")
        return int(self.net.site_to_wire[site])

    def _gates(self, g: FusedGate, swap_out: bool, swap_in: bool):
        gb = self.net.gate_tensor(g, swap_out, swap_in)
        ov = self.ket_override.get(g.uid)
        if ov is None:
            return gb, gb
        return orient(ov, swap_out, swap_in), gb

    def _last_touch(self, w: int, j: int) -> int:
        t = self.net.touch[w]
        i = bisect.bisect_right(t, j)
        return t[i - 1] if i else 0

    def _reorder(self, rho: np.ndarray, have: tuple, want: tuple) -> np.ndarray:
        if have == want:
            return rho
        return reorder_ops(rho, [have.index(w) for w in want])

    # -- public primitives ----------------------------------------------------

    def joint(self, j: int, wires: tuple) -> np.ndarray:
        """Density tensor on ``wires`` (in that order) after layer ``j``."""
        rho, order = None, []
        for g in self._groups(j, wires):
            part = self.density(j, g)
            rho = part if rho is None else kron_ops(rho, len(order), part, len(g))
            order.extend(g)
        return self._reorder(rho, tuple(order), tuple(wires))

    def _groups(self, j: int, wires) -> list:
        groups = []
        for w in wires:
            for g in groups:
                if any(self.net.related(j, w, x) for x in g):
                    g.append(w)
                    break
            else:
                groups.append([w])
        # merge groups linked through a later wire (only matters when not laminar)
        merged = True
        while merged and len(groups) > 1:
            merged = False
            for a in range(len(groups)):
                for b in range(a + 1, len(groups)):
                    if any(self.net.related(j, x, y) for x in groups[a] for y in groups[b]):
                        groups[a].extend(groups.pop(b))
                        merged = True
                        break
                if merged:
                    break
        return [tuple(sorted(g)) for g in groups]

    def density(self, j: int, wires: tuple) -> np.ndarray:
        """Density on a sorted tuple of correlated wires after layer ``j``."""
        wires = tuple(wires)
        jj = max(self._last_touch(w, j) for w in wires)
        if jj == 0:
            return self._top(wires)
        key = (jj, wires)
        hit = self.memo.get(key)
        if hit is not None:
            self.memo.move_to_end(key)
            return hit
        rho = self._step(jj, wires)
        self.memo[key] = rho
        if len(self.memo) > self.memo_limit:
            self.memo.popitem(last=False)
        return rho

    def _top(self, wires) -> np.ndarray:
        rho = None
        for k, w in enumerate(wires):
            part = np.outer(self.net.top[w], self.net.top[w].conj())
            rho = part if rho is None else kron_ops(rho, k, part, 1)
        return rho

    # -- one contraction step -------------------------------------------------------

    def _step(self, j: int, wires: tuple) -> np.ndarray:
        net, chi = self.net, self.net.chi
        gates = []
        for w in wires:
            ga = net.gate_at[j].get(w)
            if ga is not None and all(ga[0] is not g for g, _ in gates):
                gates.append(ga)
        if len(wires) == 1:
            g, leg = gates[0]
            a, b = g.wires
            gk, gb = self._gates(g, leg == 1, False)
            if not net.related(j - 1, a, b):
                r1 = self.density(j - 1, (a,))
                r2 = self.density(j - 1, (b,))
                self.stats.record("descend", K.madds_descend(chi))
                return K.descend(gk, gb, r1, r2)
            r = self.joint(j - 1, (a, b))
            self.stats.record("pair->single", K.madds_from_pair_single(chi))
            return K.from_pair_single(gk, gb, r)
        if len(wires) == 2 and len(gates) == 1:
            g, _ = gates[0]
            a, b = g.wires
            gk, gb = self._gates(g, False, False)
            if not net.related(j - 1, a, b):
                out = K.fuse(gk, gb, self.density(j - 1, (a,)), self.density(j - 1, (b,)))
            else:
                out = K.apply_pair(gk, gb, self.joint(j - 1, (a, b)))
            self.stats.record("fuse", K.madds_fuse(chi))
            return self._reorder(out, g.wires, wires)
        if len(wires) == 2 and len(gates) == 2:
            out = self._pair_step(j, wires, gates)
            if out is not None:
                return out
        return self._generic(j, wires, gates)

    def _pair_step(self, j, wires, gates):
        net, chi = self.net, self.net.chi
        (g1, leg1), (g2, leg2) = gates
        xa, xb = g1.wires
        ins2 = g2.wires
        ya = [y for y in ins2 if net.related(j - 1, xa, y)]
        yb = [y for y in ins2 if net.related(j - 1, xb, y)]
        if len(ya) != 1 or len(yb) != 1 or ya[0] == yb[0] or net.related(j - 1, xa, xb):
            return None
        ya, yb = ya[0], yb[0]
        g1k, g1b = self._gates(g1, leg1 == 1, False)
        g2k, g2b = self._gates(g2, leg2 == 1, ins2[0] != ya)
        ra = self.joint(j - 1, (xa, ya))
        rb = self.joint(j - 1, (xb, yb))
        self.stats.record("pair-descend", K.madds_pair_descend(chi))
        out = K.pair_descend(g1k, g1b, g2k, g2b, ra, rb, self.pv)
        return out

    def _generic(self, j, wires, gates):
        """Dense fallback: joint density of all inputs, gates applied one by one, traced."""
        chi = self.net.chi
        inputs = []
        for g, _ in gates:
            inputs.extend(g.wires)
        inputs.extend(w for w in wires if w not in inputs)
        rho = self.joint(j - 1, tuple(inputs))
        k = len(inputs)
        letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
        ket, bra = list(letters[:k]), list(letters[k : 2 * k])
        fresh = iter(letters[2 * k :])
        out = rho
        for i, (g, _) in enumerate(gates):
            gk, gb = self._gates(g, False, False)
            p, q = 2 * i, 2 * i + 1
            # ket side: G[o1, o2, i1, i2] rho[i1, i2, ...]
            o1, o2 = next(fresh), next(fresh)
            src = "".join(ket + bra)
            ket2 = list(ket)
            ket2[p], ket2[q] = o1, o2
            out = np.einsum(f"...{o1}{o2}{ket[p]}{ket[q]},...{src}->...{''.join(ket2 + bra)}", gk, out, optimize=True)
            ket = ket2
            o1, o2 = next(fresh), next(fresh)
            src = "".join(ket + bra)
            bra2 = list(bra)
            bra2[p], bra2[q] = o1, o2
            out = np.einsum(f"{o1}{o2}{bra[p]}{bra[q]},...{src}->...{''.join(ket + bra2)}", gb.conj(), out, optimize=True)
            bra = bra2
        keep = list(wires)
        perm = [inputs.index(w) for w in keep] + [i for i, w in enumerate(inputs) if w not in keep]
        self.stats.record("generic", 2 * len(gates) * chi ** (2 * k + 2))
        return trace_tail_ops(reorder_ops(out, perm), k, len(keep))

    # -- observables ---------------------------------------------------------------

    def bottom(self, wires: tuple) -> np.ndarray:
        return self.joint(self.net.depth, tuple(wires))

    def reduced_density(self, sites) -> np.ndarray:
        sites = list(sites)
        if len(set(sites)) != len(sites):
            raise ValueError("sites must be distinct")
        rho = self.bottom(tuple(self.wire(s) for s in sites))
        d = self.net.chi ** len(sites)
        return rho.reshape(rho.shape[: rho.ndim - 2 * len(sites)] + (d, d))

    def expect(self, op: LocalOperator, sites) -> complex:
        op = as_operator(op)
        sites = list(sites)
        if op.support != len(sites):
            raise ValueError("operator support does not match the number of sites")
        if op.support == 1:
            if all(p == (1,) for p in op.parities()):
                self.stats.odd_zero = True
                return 0.0
        rho = self.reduced_density(sites)
        return np.einsum("...ab,ba->...", rho, op.matrix())

    def expect_all_one_site(self, op) -> np.ndarray:
        op = as_operator(op)
        out = np.empty(self.net.n, dtype=complex)
        for x in sorted(range(self.net.n), key=self.wire):
            out[x] = self.expect(op, [x])
        return out


def kron_ops(a: np.ndarray, ka: int, b: np.ndarray, kb: int) -> np.ndarray:
    """Product of even operators on ``ka`` then ``kb`` wires; leading batch axes broadcast."""
    chi = a.shape[-1]
    da, db = chi**ka, chi**kb
    a2 = a.reshape(a.shape[: a.ndim - 2 * ka] + (da, da))
    b2 = b.reshape(b.shape[: b.ndim - 2 * kb] + (db, db))
    out = np.einsum("...ij,...kl->...ikjl", a2, b2)
    return out.reshape(out.shape[:-4] + (chi,) * (2 * (ka + kb)))


def reorder_ops(op: np.ndarray, perm) -> np.ndarray:
    """Graded reordering of the wires of a (possibly batched) operator tensor."""
    k = len(perm)
    perm = list(perm)
    if perm == list(range(k)):
        return op
    nb = op.ndim - 2 * k
    s = permutation_sign(op.shape[nb : nb + k], perm)
    full = op * s.reshape(s.shape + (1,) * k) * s.reshape((1,) * k + s.shape)
    axes = list(range(nb)) + [nb + p for p in perm] + [nb + k + p for p in perm]
    return np.transpose(full, axes)


def trace_tail_ops(op: np.ndarray, k: int, keep: int) -> np.ndarray:
    """Trace all but the first ``keep`` of ``k`` wires (leading batch axes kept)."""
    chi = op.shape[-1]
    nb = op.ndim - 2 * k
    dk, dr = chi**keep, chi ** (k - keep)
    m = op.reshape(op.shape[:nb] + (dk, dr, dk, dr))
    out = np.einsum("...arbr->...ab", m)
    return out.reshape(op.shape[:nb] + (chi,) * (2 * keep))


# --- module-level API ---------------------------------------------------------------


def _engine(state, engine):
    return engine if engine is not None else Engine(state)


def causal_cone(state: SpectralState, sites) -> list:
    """Gates of the full circuit that survive unitary cancellation for ``sites``.

    Returned as ``(layer, index)`` keys of ``state.full_circuit``; one-wire
    gates on the cone's wires are included.
    """
    c = state.full_circuit
    n = c.num_wires
    sites = list(sites)
    for s in sites:
        if not 0 <= s < n:
            raise IndexError(f"site {s} out of range")
    inv = c.site_permutation.inverse().image
    live = {inv[s] for s in sites}
    out = []
    for li in range(len(c.layers) - 1, -1, -1):
        layer = c.layers[li]
        if isinstance(layer, Permutation):
            live = {layer.inverse().image[w] for w in live}
            continue
        for gi, pl in enumerate(layer):
            if any(w in live for w in pl.wires):
                out.append((li, gi))
                live.update(pl.wires)
    return sorted(out)


def expect_one_site(state: SpectralState, op, site: int, engine: Engine = None) -> complex:
    return _engine(state, engine).expect(as_operator(op), [site])


def expect_all_one_site(state: SpectralState, op, engine: Engine = None) -> np.ndarray:
    return _engine(state, engine).expect_all_one_site(op)


def expect_two_site(state: SpectralState, op_a, site_a: int, op_b, site_b: int, engine: Engine = None) -> complex:
    if site_a == site_b:
        raise ValueError("coincident sites: multiply the operators and use expect_one_site")
    a = np.asarray(op_a.factors[0][1] if isinstance(op_a, LocalOperator) else op_a, dtype=complex)
    b = np.asarray(op_b.factors[0][1] if isinstance(op_b, LocalOperator) else op_b, dtype=complex)
    return _engine(state, engine).expect(LocalOperator.two(a, b), [site_a, site_b])


def site_offsets(dims, site0: int):
    """All sites with their offsets from ``site0`` (periodic, per axis)."""
    dims = tuple(dims)
    n = int(np.prod(dims))
    c0 = np.unravel_index(site0, dims)
    offs, sites = [], []
    for s in range(n):
        c = np.unravel_index(s, dims)
        d = tuple(int((c[i] - c0[i]) % dims[i]) for i in range(len(dims)))
        offs.append(d[0] if len(dims) == 1 else d)
        sites.append(s)
    return offs, sites


def expect_all_two_site(state: SpectralState, op_a, op_b, site0: int = 0, engine: Engine = None) -> CorrelationSeries:
    """``<A_{site0} B_{site0 + D}>`` for every offset ``D``.

    The ``D = 0`` entry is ``<(A B)_{site0}>``.
    """
    eng = _engine(state, engine)
    a = np.asarray(op_a, dtype=complex)
    b = np.asarray(op_b, dtype=complex)
    offs, sites = site_offsets(state.circuit.dims, site0)
    vals = np.empty(len(sites), dtype=complex)
    two = LocalOperator.two(a, b)
    # wire order keeps shared densities in the memo while they are needed
    for i in sorted(range(len(sites)), key=lambda i: eng.wire(sites[i])):
        s = sites[i]
        if s == site0:
            vals[i] = eng.expect(LocalOperator.one(a @ b), [s]) if operator_parity(a @ b) is not None else np.nan
        else:
            vals[i] = eng.expect(two, [site0, s])
    return CorrelationSeries(offs, vals, 1.0, {"site0": site0, **eng.stats.as_dict()})


def reduced_density(state: SpectralState, sites, engine: Engine = None) -> np.ndarray:
    return _engine(state, engine).reduced_density(sites)


def energy(state: SpectralState, terms, engine: Engine = None) -> float:
    """``sum <term>`` over ``(LocalOperator, sites)`` pairs."""
    eng = _engine(state, engine)
    total = 0j
    for op, sites in terms:
        total += eng.expect(op, sites)
    if abs(total.imag) > 1e-8 * max(1.0, abs(total.real)):
        raise ValueError(f"energy has imaginary part {total.imag:.3e}; terms not Hermitian?")
    return float(total.real)


def expect_one_site_bogoliubov(state: SpectralState, op, site: int, engine: Engine = None) -> complex:
    if state.bogoliubov is None:
        raise ValueError("state has no Bogoliubov layer")
    return expect_one_site(state, op, site, engine)


# --- environments ---------------------------------------------------------------------


def find_gate(net: Network, gate_id) -> tuple:
    """Fused gate whose core is the two-wire gate ``gate_id`` and its layer index."""
    gate_id = tuple(gate_id)
    for j, layer in enumerate(net.layers, start=1):
        for g in layer:
            if g.key == gate_id:
                return g, j
    raise KeyError(f"no two-wire gate with id {gate_id}")


def parity_entries(chi: int) -> list:
    """``(row, col)`` entries of a two-wire gate matrix allowed by parity."""
    p = K.parity_of(chi)
    tot = ((p[:, None] + p[None, :]) & 1).ravel()
    return [(a, b) for a in range(chi * chi) for b in range(chi * chi) if tot[a] == tot[b]]


def environment(state: SpectralState, terms, gate_id, network: Network = None, memo: dict = None) -> np.ndarray:
    """``dE/dG`` for the two-wire gate ``gate_id`` of ``state.full_circuit``.

    ``E`` is the energy routed through the gate: the sum of the terms whose
    causal cone contains it, seen as a function of the ket-side gate with the
    bra side held fixed.  It is linear in ``G``, so ``sum(env * G) == E``.
    Terms outside the cone do not depend on a unitary ``G`` and contribute
    nothing; entries that would break fermion parity are zero.  Returned as a
    ``(chi,)*4`` tensor ``[o1, o2, i1, i2]``.  ``memo`` may hold densities of
    an engine on the same network; only entries above the gate are reused.
    """
    net = network if network is not None else compile_state(state)
    g, j = find_gate(net, gate_id)
    chi = net.chi
    d = chi * chi
    entries = parity_entries(chi)
    basis = np.zeros((len(entries), d, d), dtype=complex)
    for i, (a, b) in enumerate(entries):
        basis[i, a, b] = 1.0
    ov = (g.left @ basis @ g.right).reshape((len(entries),) + (chi,) * 4)
    seed = {k: v for k, v in memo.items() if k[0] < j} if memo else None
    eng = Engine(state, net, {g.uid: ov}, seed)
    env = np.zeros(len(entries), dtype=complex)
    for op, sites in terms:
        v = eng.expect(op, sites)
        if np.ndim(v):
            env += v
    out = np.zeros((d, d), dtype=complex)
    for i, (a, b) in enumerate(entries):
        out[a, b] = env[i]
    return out.reshape((chi,) * 4)
