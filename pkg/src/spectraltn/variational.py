"""Variational energy minimization over the gates of a spectral state."""
from __future__ import annotations

import csv
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import expm

from .circuit import Circuit, Permutation, Placement, build_qfft_1d, build_qfft_2d
from .engine import Engine, LocalOperator, compile_state, energy, environment
from .graded import Gate, WireSpace, _mode_lift, creation, identity_gate, parity_polar, random_parity_unitary
from .state import BogoliubovLayer, MomentumOccupation, SpectralState, dumps_state

RULES = ("svd-polar", "gradient")
INITS = ("qfft", "random", "identity")


@dataclass
class OptimizationConfig:
    max_sweeps: int = 200
    tolerance: float = 1e-10
    rule: str = "svd-polar"
    seed: int = 0
    init: str = "identity"
    step: float = 0.5
    monotone_tol: float = 1e-12

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if self.max_sweeps < 0:
            raise ValueError("max_sweeps must be >= 0")


@dataclass
class OptimizationResult:
    state: SpectralState
    energies: list  # energy after each sweep, entry 0 is the initial energy
    step_energies: list  # energy after every gate visit
    sweeps: int
    converged: bool
    config: OptimizationConfig = None

    @property
    def energy(self) -> float:
        return self.energies[-1]


# --- templates ------------------------------------------------------------------------


def template_from_state(state: SpectralState, label: str = "VAR") -> SpectralState:
    """Equivalent state whose circuit has only two-wire gates and no permutations."""
    net = compile_state(state)
    space = state.space
    layers = []
    for layer in net.layers:
        layers.append(tuple(Placement(Gate.from_matrix(g.matrix, space, 2, label, tol=1e-9), g.wires) for g in layer))
    occ = []
    for w in range(net.n):
        v = net.top[w]
        a = int(np.argmax(np.abs(v)))
        if abs(abs(v[a]) - 1.0) > 1e-10:
            raise ValueError("top vector is not a basis state; cannot form a template")
        occ.append(a)
    # the top phase is global; fold it into nothing
    image = [0] * net.n
    for site, w in enumerate(net.site_to_wire):
        image[int(w)] = site
    c = Circuit(net.n, space, tuple(layers), Permutation(tuple(image)), state.circuit.dims)
    return SpectralState(c, MomentumOccupation(tuple(occ), space))


def _pairs_for(n: int, offset: float):
    pairs, unpaired = [], []
    for k in range(n):
        kb = int((-k - 2 * offset) % n)
        if kb == k:
            unpaired.append(k)
        elif k < kb:
            pairs.append((k, kb))
    return pairs, unpaired


def variational_template(
    dims,
    occupation=None,
    init: str = "identity",
    seed: int = 0,
    pairing: bool = True,
    offset: float = 0.0,
    species: int = 1,
) -> SpectralState:
    """Gates on the butterfly geometry, optionally topped by a ``(k, -k)`` pair layer.

    ``init="qfft"`` reproduces the exact Fourier transform (with the offset
    phases folded in) and identity pair gates; ``identity`` and ``random``
    keep the geometry but replace every gate.
    """
    dims = tuple(int(d) for d in dims)
    if init not in INITS:
        raise ValueError(f"init must be one of {INITS}")
    space = WireSpace(species)
    n = int(np.prod(dims))
    c = build_qfft_1d(n, species) if len(dims) == 1 else build_qfft_2d(dims[0], dims[1], species)
    occ = MomentumOccupation.vacuum(n, space) if occupation is None else occupation
    if not isinstance(occ, MomentumOccupation):
        occ = MomentumOccupation(tuple(occ), space)
    bog = None
    if pairing:
        if len(dims) != 1:
            raise ValueError("pair layer only for 1D templates")
        pairs, unpaired = _pairs_for(n, offset)
        bog = BogoliubovLayer(
            tuple(pairs),
            tuple(identity_gate(space, 2) for _ in pairs),
            tuple(unpaired),
            tuple(identity_gate(space, 1) for _ in unpaired),
        )
    return reinitialize(template_from_state(SpectralState(c, occ, bog, offset)), init, seed)


def reinitialize(template: SpectralState, init: str = "identity", seed: int = 0) -> SpectralState:
    """Keep the geometry of ``template``; reset every gate (``qfft`` keeps them)."""
    if init not in INITS:
        raise ValueError(f"init must be one of {INITS}")
    if init == "qfft":
        return template
    space = template.space
    rng = np.random.default_rng(seed)
    d = space.dim**2
    layers = []
    for layer in template.circuit.layers:
        new = []
        for pl in layer:
            m = np.eye(d) if init == "identity" else random_parity_unitary(space, 2, rng)
            new.append(Placement(Gate.from_matrix(m, space, 2, "VAR", tol=1e-9), pl.wires))
        layers.append(tuple(new))
    return SpectralState(template.circuit.with_layers(layers), template.occupation)


# --- bond growth -------------------------------------------------------------------------


def merge_operator(op: np.ndarray, species: int, space: WireSpace) -> np.ndarray:
    """Embed a one-site (``chi=2``) operator as species ``species`` of a merged wire."""
    op = np.asarray(op, dtype=complex)
    cd = creation(space, species)
    c = cd.T
    n = cd @ c
    eye = np.eye(space.dim)
    return op[0, 0] * (eye - n) + op[0, 1] * c + op[1, 0] * cd + op[1, 1] * n


def merge_terms(terms, factor: int):
    """Re-index ``(LocalOperator, sites)`` terms of a one-species model for merged sites."""
    if factor == 1:
        return list(terms)
    space = WireSpace(factor)
    out = []
    for op, sites in terms:
        wires = [s // factor for s in sites]
        spec = [s % factor for s in sites]
        factors = []
        for f in op.factors:
            mats = [merge_operator(m, b, space) for m, b in zip(f[1:], spec)]
            factors.append((f[0],) + tuple(mats))
        if len(sites) == 2 and wires[0] == wires[1]:
            # both sites on one merged wire: ordinary product in mode order
            factors = [(f[0], f[1] @ f[2]) for f in factors]
            out.append((LocalOperator(tuple(factors)), [wires[0]]))
        else:
            out.append((LocalOperator(tuple(factors)), wires))
    return out


def bond_grow(state: SpectralState, factor: int) -> SpectralState:
    """Same state on ``n/factor`` wires, each holding ``factor`` neighbouring sites.

    Site ``x`` becomes species ``x % factor`` of merged site ``x // factor``.
    Supported for 1D Fourier states (no pair layer, one species): wire ``k'``
    carries the momenta ``k' + (n/factor) t`` as species ``t``, mixed into the
    merged-site species by a one-wire gate before a per-species transform.
    """
    if factor == 1:
        return state
    n = state.n
    if factor < 1 or factor & (factor - 1) or n % factor:
        raise ValueError("factor must be a power of two dividing n")
    if state.bogoliubov is not None or state.space.num_species != 1 or len(state.circuit.dims) != 1:
        raise ValueError("bond_grow supports 1D single-species Fourier states without a pair layer")
    m = n // factor
    space = WireSpace(factor)
    theta = state.momentum_offset
    base = build_qfft_1d(m, factor)
    mix = []
    occ = []
    for kp in range(m):
        u = np.zeros((factor, factor), dtype=complex)
        for b in range(factor):
            for t in range(factor):
                k = kp + m * t
                u[b, t] = np.exp(2j * np.pi * (k + theta) * b / n) / np.sqrt(factor)
        mix.append(Placement(Gate.from_matrix(_mode_lift(u, space, 1), space, 1, f"MIX({kp})", tol=1e-10), (kp,)))
        label = 0
        for t in range(factor):
            label |= (state.occupation.occ[kp + m * t] & 1) << t
        occ.append(label)
    c = base.with_layers((tuple(mix),) + base.layers)
    return SpectralState(c, MomentumOccupation(tuple(occ), space), None, theta)


# --- optimization ---------------------------------------------------------------------------


def _check_terms(terms) -> None:
    for op, sites in terms:
        m = op.matrix()
        if np.abs(m - m.conj().T).max() > 1e-12 and op.support == 1:
            raise ValueError("non-Hermitian one-site term")
        if len(sites) not in (1, 2):
            raise ValueError("terms must act on one or two sites")


class _Working:
    """Mutable copy of a template: network, gate list and sweep order."""

    def __init__(self, state: SpectralState):
        self.state = state
        self.net = compile_state(state)
        self.gates = [g for layer in self.net.layers for g in layer]
        self.layer_of = {g.uid: j for j, layer in enumerate(self.net.layers, start=1) for g in layer}
        self.memo = {}  # densities of the current gates
        for g in self.gates:
            if not (np.allclose(g.left, np.eye(len(g.left))) and np.allclose(g.right, np.eye(len(g.right)))):
                raise ValueError("template gates must not carry folded one-wire gates; use template_from_state")

    def set_core(self, g, m) -> None:
        # a new array gets a new gate-tensor cache key
        g.core = m

    def energy(self, terms, changed=None) -> float:
        """Energy with the current gates; densities above ``changed`` are reused."""
        if changed is None:
            eng = Engine(self.state, self.net)
        else:
            j = self.layer_of[changed.uid]
            eng = Engine(self.state, self.net, memo={k: v for k, v in self.memo.items() if k[0] < j})
        e = energy(self.state, terms, eng)
        self.last_memo = eng.memo
        return e

    def accept(self) -> None:
        self.memo = self.last_memo

    def env(self, terms, g) -> np.ndarray:
        d = g.core.shape[0]
        return environment(self.state, terms, g.key, self.net, self.memo).reshape(d, d)

    def order(self, sweep: int) -> list:
        # odd sweeps from the real-space side upward, even sweeps back down
        layers = self.net.layers[::-1] if sweep % 2 == 1 else self.net.layers
        return [g for layer in layers for g in layer]

    def to_state(self) -> SpectralState:
        space = self.state.space
        layers = []
        for layer in self.net.layers:
            layers.append(tuple(Placement(Gate.from_matrix(g.core, space, 2, "VAR", tol=1e-9), g.wires) for g in layer))
        c = self.state.circuit.with_layers(layers)
        return SpectralState(c, self.state.occupation)


def _polar_update(w: _Working, terms, g, e_cur: float):
    env = w.env(terms, g)
    old = g.core
    chi = w.net.chi
    scale = max(np.abs(env).max(), 1e-300)
    for lam in [0.0] + [scale * 2.0**k for k in range(0, 24, 2)]:
        cand = parity_polar(lam * old - env.conj(), chi, 2)
        w.set_core(g, cand)
        e_new = w.energy(terms, g)
        if e_new <= e_cur:
            w.accept()
            return e_new
    w.set_core(g, old)
    return e_cur


def _gradient_update(w: _Working, terms, g, e_cur: float, state: dict):
    env = w.env(terms, g)
    old = g.core
    m = env.T @ old
    k = -(m.conj().T - m) / 2.0
    if np.abs(k).max() < 1e-15:
        return e_cur
    eta = state.get("eta", 0.5)
    for _ in range(30):
        cand = old @ expm(eta * k)
        w.set_core(g, cand)
        e_new = w.energy(terms, g)
        if e_new <= e_cur:
            w.accept()
            state["eta"] = min(eta * 1.5, 10.0)
            return e_new
        eta *= 0.5
    state["eta"] = eta
    w.set_core(g, old)
    return e_cur


def minimize_energy(template: SpectralState, terms, cfg: OptimizationConfig = None, callback=None) -> OptimizationResult:
    """Sweep over the template's two-wire gates, replacing each using its environment.

    The energy after every gate visit never exceeds the previous one: a
    candidate that would raise it is replaced by a more conservative one
    (larger proximity weight for ``svd-polar``, shorter step for
    ``gradient``) or rejected.  ``callback(sweep, energy)`` runs after each
    sweep; returning True stops.
    """
    cfg = cfg or OptimizationConfig()
    n = template.n
    if n & (n - 1):
        raise ValueError("template size must be a power of two")
    _check_terms(terms)
    w = _Working(template)
    e = w.energy(terms)
    w.accept()
    energies = [e]
    steps = [e]
    converged = False
    gstate = {"eta": cfg.step}
    sweeps = 0
    for sweep in range(1, cfg.max_sweeps + 1):
        for g in w.order(sweep):
            if cfg.rule == "svd-polar":
                e_new = _polar_update(w, terms, g, e)
            else:
                e_new = _gradient_update(w, terms, g, e, gstate)
            if e_new > e + cfg.monotone_tol:
                raise AssertionError(f"energy increased by {e_new - e:.3e}")
            e = e_new
            steps.append(e)
        energies.append(e)
        sweeps = sweep
        if abs(energies[-2] - energies[-1]) < cfg.tolerance:
            converged = True
        # a callback returning True ends the run early
        if callback is not None and callback(sweep, e):
            break
        if converged:
            break
    if cfg.max_sweeps == 0:
        converged = True
    return OptimizationResult(w.to_state(), energies, steps, sweeps, converged, cfg)


# --- outputs -------------------------------------------------------------------------------------


def write_energy_trace(path, result: OptimizationResult, meta: dict = None) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in {**(meta or {}), **asdict(result.config)}.items():
            fh.write(f"# {k}: {v}\n")
        wr = csv.writer(fh)
        wr.writerow(["sweep", "energy"])
        for i, e in enumerate(result.energies):
            wr.writerow([i, f"{e:.17g}"])


def write_checkpoint(path, result: OptimizationResult) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_state(result.state))
