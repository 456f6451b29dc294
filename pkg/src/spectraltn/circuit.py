"""Log-depth fermionic FFT circuits in one and two dimensions.

The circuits run from momentum space (top, wire ``k`` holds mode ``k``) to
real space (bottom).  A single fermion entering on momentum wire ``k`` leaves
in the plane wave ``n**-0.5 * exp(2 pi i k x / n)`` over sites ``x``; wire
``w`` at the bottom carries site ``site_permutation.image[w]``.
"""
from __future__ import annotations

import json
import re
from functools import lru_cache
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .graded import Gate, WireSpace, f2_gate, twiddle_gate, twiddle_phases


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _log2(n: int) -> int:
    return n.bit_length() - 1


@dataclass(frozen=True)
class Permutation:
    """Wire relabelling: the content of wire ``w`` moves to ``image[w]``."""

    image: tuple

    def __post_init__(self):
        image = tuple(int(i) for i in self.image)
        if sorted(image) != list(range(len(image))):
            raise ValueError("permutation image must be a bijection on [0, n)")
        object.__setattr__(self, "image", image)

    def __len__(self):
        return len(self.image)

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.image)
        for w, t in enumerate(self.image):
            inv[t] = w
        return Permutation(tuple(inv))

    def compose(self, other: "Permutation") -> "Permutation":
        """Apply ``self`` first, then ``other``."""
        return Permutation(tuple(other.image[t] for t in self.image))

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(tuple(range(n)))


def bit_reverse(x: int, bits: int) -> int:
    out = 0
    for _ in range(bits):
        out = (out << 1) | (x & 1)
        x >>= 1
    return out


def bit_reversal(n: int) -> Permutation:
    if not _is_pow2(n):
        raise ValueError(f"{n} is not a power of two")
    k = _log2(n)
    return Permutation(tuple(bit_reverse(x, k) for x in range(n)))


@dataclass(frozen=True, slots=True)
class Placement:
    gate: Gate
    wires: tuple

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if len(self.wires) != self.gate.arity or len(set(self.wires)) != len(self.wires):
            raise ValueError("placement wires do not match gate arity")


Layer = Union[tuple, Permutation]


@dataclass(frozen=True)
class Circuit:
    num_wires: int
    wire_space: WireSpace
    layers: tuple = ()
    site_permutation: Permutation = None
    dims: tuple = None

    def __post_init__(self):
        n = self.num_wires
        if self.site_permutation is None:
            object.__setattr__(self, "site_permutation", Permutation.identity(n))
        if self.dims is None:
            object.__setattr__(self, "dims", (n,))
        if int(np.prod(self.dims)) != n:
            raise ValueError("dims do not multiply to num_wires")
        layers = []
        for layer in self.layers:
            if isinstance(layer, Permutation):
                if len(layer) != n:
                    raise ValueError("permutation layer has wrong length")
                layers.append(layer)
                continue
            layer = tuple(layer)
            seen = set()
            for pl in layer:
                if pl.gate.space != self.wire_space:
                    raise ValueError("gate wire space differs from circuit wire space")
                for w in pl.wires:
                    if not 0 <= w < n:
                        raise ValueError(f"wire {w} out of range")
                    if w in seen:
                        raise ValueError("gates within a layer must touch disjoint wires")
                    seen.add(w)
            layers.append(layer)
        object.__setattr__(self, "layers", tuple(layers))

    @property
    def gate_layers(self):
        return [l for l in self.layers if not isinstance(l, Permutation)]

    def placements(self) -> Iterable[tuple[int, int, Placement]]:
        for li, layer in enumerate(self.layers):
            if isinstance(layer, Permutation):
                continue
            for gi, pl in enumerate(layer):
                yield li, gi, pl

    def two_body_count(self) -> int:
        return sum(1 for _, _, pl in self.placements() if pl.gate.arity == 2)

    def two_body_depth(self) -> int:
        return sum(1 for l in self.gate_layers if any(pl.gate.arity == 2 for pl in l))

    def with_layers(self, layers, site_permutation=None) -> "Circuit":
        return Circuit(
            self.num_wires,
            self.wire_space,
            tuple(layers),
            self.site_permutation if site_permutation is None else site_permutation,
            self.dims,
        )


@lru_cache(maxsize=1 << 16)
def _f2_twiddled(r: int, block: int, space: WireSpace) -> Gate:
    tw = np.diag(twiddle_phases(r, block, space))
    m = np.kron(tw, np.eye(space.dim)) @ f2_gate(space).matrix
    return Gate.from_matrix(m, space, 2, f"F2W({r},{block})")


def _butterfly_stage(n: int, block: int, space: WireSpace, fuse: bool, wire_of=None):
    """One radix-2 stage on blocks of ``block`` consecutive (virtual) wires.

    Returns ``(two_body_layer, twiddle_layer)``; with ``fuse`` the twiddles
    are multiplied into the two-body gates and the twiddle layer is empty.
    """
    wire_of = wire_of or (lambda v: v)
    f2 = f2_gate(space)
    half = block // 2
    gates, twiddles = [], []
    for b0 in range(0, n, block):
        for r in range(half):
            p, q = wire_of(b0 + r + half), wire_of(b0 + r)
            if fuse and r:
                gates.append(Placement(_f2_twiddled(r, block, space), (p, q)))
            else:
                gates.append(Placement(f2, (p, q)))
                if r:
                    twiddles.append(Placement(twiddle_gate(r, block, space), (p,)))
    return tuple(gates), tuple(twiddles)


@lru_cache(maxsize=32)
def build_qfft_1d(n: int, species: int = 1) -> Circuit:
    """Decimation-in-time fermionic FFT on ``n = 2**k`` wires.

    Stage ``j`` pairs wires ``(b + r + m/2, b + r)`` inside blocks of size
    ``m = n / 2**j`` with an F2 gate, followed by the twiddle
    ``exp(2 pi i r / m)`` on the first wire of the pair.
    """
    if not _is_pow2(n):
        raise ValueError(f"n={n} is not a power of two")
    space = WireSpace(species)
    layers = []
    block = n
    while block > 1:
        g, t = _butterfly_stage(n, block, space, fuse=False)
        layers.append(g)
        if t:
            layers.append(t)
        block //= 2
    return Circuit(n, space, tuple(layers), bit_reversal(n), (n,))


@lru_cache(maxsize=32)
def build_qfft_2d(nx: int, ny: int, species: int = 1, order: str = "xy") -> Circuit:
    """FFT on an ``nx x ny`` lattice, wire ``wx * ny + wy``.

    Stages along x and y alternate per length scale (``order`` picks which
    axis goes first); twiddles are fused into the two-body gates.
    """
    if not (_is_pow2(nx) and _is_pow2(ny)):
        raise ValueError(f"lattice {nx}x{ny} is not power-of-two")
    if order not in ("xy", "yx"):
        raise ValueError("order must be 'xy' or 'yx'")
    space = WireSpace(species)
    n = nx * ny
    x_stages = []
    block = nx
    while block > 1:
        stage = []
        for wy in range(ny):
            g, _ = _butterfly_stage(nx, block, space, fuse=True, wire_of=lambda v, wy=wy: v * ny + wy)
            stage.extend(g)
        x_stages.append(tuple(stage))
        block //= 2
    y_stages = []
    block = ny
    while block > 1:
        stage = []
        for wx in range(nx):
            g, _ = _butterfly_stage(ny, block, space, fuse=True, wire_of=lambda v, wx=wx: wx * ny + v)
            stage.extend(g)
        y_stages.append(tuple(stage))
        block //= 2
    first, second = (x_stages, y_stages) if order == "xy" else (y_stages, x_stages)
    layers = []
    for i in range(max(len(first), len(second))):
        if i < len(first):
            layers.append(first[i])
        if i < len(second):
            layers.append(second[i])
    bx, by = _log2(nx), _log2(ny)
    image = tuple(bit_reverse(w // ny, bx) * ny + bit_reverse(w % ny, by) for w in range(n))
    return Circuit(n, space, tuple(layers), Permutation(image), (nx, ny))


# --- single-particle view ----------------------------------------------------


def gate_single_particle(gate: Gate) -> np.ndarray:
    """``u[i, j]``: amplitude for one fermion in gate mode ``j`` to end in mode ``i``.

    Modes are ``leg * s + species``.
    """
    s = gate.space.num_species
    chi = gate.space.dim
    a = gate.arity
    idx = []
    for leg in range(a):
        for b in range(s):
            labels = [0] * a
            labels[leg] = 1 << b
            i = 0
            for lab in labels:
                i = i * chi + lab
            idx.append(i)
    return gate.matrix[np.ix_(idx, idx)]


def single_particle_matrix(c: Circuit, include_permutation: bool = True) -> np.ndarray:
    """Single-particle transfer matrix ``M[y, x]`` of the circuit.

    Mode index is ``wire * s + species`` on input; on output it is
    ``site * s + species`` with the site permutation applied, or the bottom
    wire index otherwise.
    """
    s = c.wire_space.num_species
    n = c.num_wires * s
    m = np.eye(n, dtype=complex)
    for layer in c.layers:
        if isinstance(layer, Permutation):
            m = _permute_rows(m, layer, s)
            continue
        for pl in layer:
            rows = [w * s + b for w in pl.wires for b in range(s)]
            m[rows, :] = gate_single_particle(pl.gate) @ m[rows, :]
    if include_permutation:
        m = _permute_rows(m, c.site_permutation, s)
    return m


def _permute_rows(m: np.ndarray, perm: Permutation, s: int) -> np.ndarray:
    out = np.empty_like(m)
    for w, t in enumerate(perm.image):
        out[t * s : (t + 1) * s] = m[w * s : (w + 1) * s]
    return out


def dft_matrix(n: int, offset: float = 0.0) -> np.ndarray:
    """``M[x, k] = n**-0.5 exp(2 pi i (k + offset) x / n)``."""
    x = np.arange(n)
    return np.exp(2j * np.pi * np.outer(x, x + offset) / n) / np.sqrt(n)


# --- equivalent schedules ----------------------------------------------------

SCHEDULES = ("dit", "dit-perm-top", "dif", "dif-perm-bottom")


def _relabel(layer, perm: Permutation):
    return tuple(Placement(pl.gate, tuple(perm.image[w] for w in pl.wires)) for pl in layer)


def _push_permutations_down(c: Circuit) -> Circuit:
    """Move every permutation layer to the site permutation."""
    acc = Permutation.identity(c.num_wires)
    layers = []
    for layer in c.layers:
        if isinstance(layer, Permutation):
            acc = acc.compose(layer)
        else:
            # a gate drawn after ``acc`` acts on wires acc^-1(v) before it
            layers.append(_relabel(layer, acc.inverse()))
    return c.with_layers(layers, acc.compose(c.site_permutation))


def _transpose_gate(g: Gate) -> Gate:
    label = g.label if g.label.startswith(("F2", "TWIDDLE", "SWAP", "ID")) else g.label + "^T"
    return Gate.from_matrix(g.matrix.T, g.space, g.arity, label)


def variant_layer_order(c: Circuit, schedule: str = "dit") -> Circuit:
    """An equivalent decomposition of a canonical 1D FFT circuit.

    ``dit``
        the circuit itself.
    ``dit-perm-top``
        the bit reversal pushed through the gates to the momentum side.
    ``dif``
        the transposed circuit read backwards (the transform is symmetric),
        which puts the permutation at the top and the twiddles before the
        F2 gates of each stage.
    ``dif-perm-bottom``
        ``dif`` with its permutation pushed back to the real-space side.
    """
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}; expected one of {SCHEDULES}")
    if schedule == "dit":
        return c
    base = _push_permutations_down(c)
    p = base.site_permutation
    ident = Permutation.identity(c.num_wires)
    if schedule == "dit-perm-top":
        layers = [p] + [_relabel(l, p) for l in base.layers]
        return c.with_layers(layers, ident)
    # M = P L_m ... L_1 and M = M^T = L_1^T ... L_m^T P^T
    rev = [tuple(Placement(_transpose_gate(pl.gate), pl.wires) for pl in l) for l in reversed(base.layers)]
    dif = c.with_layers([p.inverse()] + rev, ident)
    if schedule == "dif":
        return dif
    return _push_permutations_down(dif)


# --- interchange format --------------------------------------------------------

FORMAT = "spectraltn-circuit"
_BUILTIN = re.compile(r"^(F2|SWAP|TWIDDLE\((-?\d+),(\d+)\)|F2W\((-?\d+),(\d+)\))$")


def _builtin_gate(label: str, space: WireSpace):
    from .graded import swap_gate

    m = _BUILTIN.match(label)
    if not m:
        return None
    if label == "F2":
        return f2_gate(space)
    if label == "SWAP":
        return swap_gate(space)
    if m.group(2) is not None:
        return twiddle_gate(int(m.group(2)), int(m.group(3)), space)
    r, block = int(m.group(4)), int(m.group(5))
    tw = np.diag(twiddle_phases(r, block, space))
    return Gate.from_matrix(np.kron(tw, np.eye(space.dim)) @ f2_gate(space).matrix, space, 2, label)


def gate_to_dict(g: Gate, wires=None) -> dict:
    d = {"label": g.label}
    if wires is not None:
        d["wires"] = list(wires)
    builtin = _builtin_gate(g.label, g.space)
    if builtin is None or not np.array_equal(builtin.matrix, g.matrix):
        d["re"] = g.matrix.real.ravel().tolist()
        d["im"] = g.matrix.imag.ravel().tolist()
    return d


def gate_from_dict(d: dict, space: WireSpace, arity: int, tol: float = 1e-10) -> Gate:
    if "re" in d:
        m = np.array(d["re"]) + 1j * np.array(d["im"])
        dim = space.dim**arity
        return Gate.from_matrix(m.reshape(dim, dim), space, arity, d["label"], tol)
    g = _builtin_gate(d["label"], space)
    if g is None:
        raise ValueError(f"gate {d['label']!r} has no matrix and is not a builtin")
    return g


def circuit_to_dict(c: Circuit) -> dict:
    layers = []
    for layer in c.layers:
        if isinstance(layer, Permutation):
            layers.append({"type": "permutation", "image": list(layer.image)})
        else:
            layers.append({"type": "gates", "gates": [gate_to_dict(pl.gate, pl.wires) for pl in layer]})
    return {
        "format": FORMAT,
        "version": 1,
        "num_wires": c.num_wires,
        "species": c.wire_space.num_species,
        "dims": list(c.dims),
        "site_permutation": list(c.site_permutation.image),
        "layers": layers,
    }


def circuit_from_dict(d: dict) -> Circuit:
    if d.get("format") != FORMAT:
        raise ValueError("not a spectraltn circuit document")
    space = WireSpace(int(d["species"]))
    layers = []
    for layer in d["layers"]:
        if layer["type"] == "permutation":
            layers.append(Permutation(tuple(layer["image"])))
        else:
            layers.append(
                tuple(Placement(gate_from_dict(g, space, len(g["wires"])), tuple(g["wires"])) for g in layer["gates"])
            )
    return Circuit(int(d["num_wires"]), space, tuple(layers), Permutation(tuple(d["site_permutation"])), tuple(d["dims"]))


def dumps_circuit(c: Circuit) -> str:
    return json.dumps(circuit_to_dict(c), indent=1)


def loads_circuit(text: str) -> Circuit:
    return circuit_from_dict(json.loads(text))


def circuits_equal(a: Circuit, b: Circuit) -> bool:
    """Bit-exact structural equality."""
    if (a.num_wires, a.wire_space, a.dims, a.site_permutation) != (b.num_wires, b.wire_space, b.dims, b.site_permutation):
        return False
    if len(a.layers) != len(b.layers):
        return False
    for la, lb in zip(a.layers, b.layers):
        if isinstance(la, Permutation) or isinstance(lb, Permutation):
            if la != lb:
                return False
            continue
        if len(la) != len(lb):
            return False
        for pa, pb in zip(la, lb):
            if pa.wires != pb.wires or pa.gate.label != pb.gate.label:
                return False
            if not np.array_equal(pa.gate.matrix, pb.gate.matrix):
                return False
    return True
