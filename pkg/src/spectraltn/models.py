"""Model builders and the observables behind the correlation and susceptibility experiments."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .circuit import build_qfft_1d, build_qfft_2d
from .engine import Engine, LocalOperator, expect_all_two_site
from .graded import WireSpace, creation
from .oracle import CorrelationSeries, QuadraticHamiltonian, hopping_hamiltonian, tfi_hamiltonian
from .state import bogoliubov_from_hamiltonian, build_state, ground_state_occupation

KINDS = ("FreeFermion1D", "FreeFermion2D", "XXChain", "TFI")

_CD = creation(WireSpace(1))
_C = _CD.T.copy()
_N = _CD @ _C
_Z = np.diag([1.0, -1.0]).astype(complex)


def _pow2(d: int) -> bool:
    return d >= 1 and d & (d - 1) == 0


@dataclass(frozen=True)
class ModelSpec:
    """A lattice model.

    ``filling`` is the particle number for the free-fermion kinds; ``h`` is
    the field for TFI and XXChain.  ``offset=None`` picks the natural
    momentum offset: 0 for free fermions, 1/2 (even sector) for TFI, and
    the parity-dependent boundary for XXChain.
    """

    kind: str
    dims: tuple
    filling: int = None
    h: float = 0.0
    offset: float = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in np.atleast_1d(self.dims)))
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        want = 2 if self.kind == "FreeFermion2D" else 1
        if len(self.dims) != want:
            raise ValueError(f"{self.kind} needs {want} lattice dimension(s)")
        if not all(_pow2(d) for d in self.dims):
            raise ValueError("lattice sizes must be powers of two")
        if self.kind.startswith("FreeFermion"):
            if self.filling is None or not 0 <= self.filling <= self.n:
                raise ValueError(f"filling must lie in [0, {self.n}]")
        if self.kind == "TFI" and self.n < 2:
            raise ValueError("TFI needs at least two sites")
        if self.offset not in (None, 0, 0.0, 0.5):
            raise ValueError("offset must be 0 or 1/2")
        if self.offset and self.kind == "FreeFermion2D":
            raise ValueError("momentum offset only in 1D")
        if not np.isfinite(self.h):
            raise ValueError("h must be finite")

    @property
    def n(self) -> int:
        return int(np.prod(self.dims))


# --- Hamiltonians and states ------------------------------------------------------------


def xx_sector(n: int, h: float):
    """Particle number and offset of the XX-ring ground state.

    ``-1/2 sum (X X + Y Y) + h Z`` maps to hopping with a closing-bond sign
    ``-(-1)^N``: odd ``N`` sees periodic momenta, even ``N`` antiperiodic.
    """
    best = None
    for count in range(n + 1):
        offset = 0.0 if count % 2 else 0.5
        eps = np.sort(hopping_hamiltonian((n,), 1.0, offset).dispersion())
        e = eps[:count].sum() + h * (n - 2 * count)
        if best is None or e < best[0] - 1e-12:
            best = (e, count, offset)
    return best[1], best[2]


def hamiltonian(spec: ModelSpec) -> QuadraticHamiltonian:
    if spec.kind == "TFI":
        return tfi_hamiltonian(spec.n, spec.h, 0.5 if spec.offset is None else spec.offset)
    if spec.kind == "XXChain":
        count, offset = xx_sector(spec.n, spec.h)
        if spec.offset is not None:
            offset = spec.offset
        hop = hopping_hamiltonian(spec.dims, 1.0, offset)
        a = hop.hopping - 2.0 * spec.h * sp.identity(spec.n, format="csr")
        return QuadraticHamiltonian(a, None, spec.h * spec.n, spec.dims, offset)
    return hopping_hamiltonian(spec.dims, 1.0, spec.offset or 0.0)


def build_model(spec: ModelSpec):
    """``(QuadraticHamiltonian, SpectralState)`` for the ground state of ``spec``."""
    h = hamiltonian(spec)
    circuit = build_qfft_1d(spec.n) if len(spec.dims) == 1 else build_qfft_2d(*spec.dims)
    if spec.kind == "TFI":
        layer, occ = bogoliubov_from_hamiltonian(h)
        return h, build_state(circuit, occ, layer, h.offset)
    if spec.kind == "XXChain":
        count, _ = xx_sector(spec.n, spec.h)
        return h, build_state(circuit, ground_state_occupation(h, count), None, h.offset)
    return h, build_state(circuit, ground_state_occupation(h, spec.filling), None, h.offset)


# --- local terms for energies -------------------------------------------------------------


def tfi_terms(n: int, h: float):
    """``sum X_i X_{i+1} + h Z_i`` in the even-parity sector as engine terms."""
    x, y = _CD - _C, _CD + _C
    terms = [(LocalOperator.two(x, y), [i, i + 1]) for i in range(n - 1)]
    terms.append((LocalOperator.two(x, y, -1.0), [n - 1, 0]))
    terms += [(LocalOperator.one(h * _Z), [i]) for i in range(n)]
    return terms


def hopping_terms(dims, t: float = 1.0):
    """``-t sum_<ij> c_i^dag c_j + h.c.`` on a periodic lattice."""
    dims = tuple(dims)
    n = int(np.prod(dims))
    terms = []
    for s in range(n):
        c = np.unravel_index(s, dims)
        for axis, d in enumerate(dims):
            if d == 1:
                continue
            nb = list(c)
            nb[axis] = (c[axis] + 1) % d
            j = int(np.ravel_multi_index(tuple(nb), dims))
            # c_s^dag c_j + c_j^dag c_s, written in site order (s, j)
            op = LocalOperator(((-t, _CD, _C), (t, _C, _CD)))
            terms.append((op, [s, j]))
    return terms


def model_terms(spec: ModelSpec):
    if spec.kind == "TFI":
        if spec.offset not in (None, 0.5):
            raise ValueError("engine terms are for the even sector only")
        return tfi_terms(spec.n, spec.h)
    if spec.kind == "XXChain":
        raise ValueError("no local terms for XXChain (sector depends on particle number)")
    return hopping_terms(spec.dims)


# --- correlation experiment ------------------------------------------------------------------


def mean_spacing(dims, count: int) -> float:
    """Mean particle spacing ``(sites / N)**(1/d)``."""
    if count <= 0:
        raise ValueError("no particles")
    return float((np.prod(dims) / count) ** (1.0 / len(dims)))


def correlation_experiment(spec: ModelSpec, site0: int = 0, engine: Engine = None):
    """``(g1, g2)`` over all offsets from ``site0``.

    ``g1 = <c_0^dag c_D> / nu`` and ``g2 = <n_0 n_D> / nu^2``; the
    ``normalization`` of each series is the mean particle spacing.
    """
    if not spec.kind.startswith("FreeFermion"):
        raise ValueError("correlation experiment is for free-fermion models")
    _, state = build_model(spec)
    eng = engine or Engine(state)
    a = expect_all_two_site(state, _CD, _C, site0, eng)
    b = expect_all_two_site(state, _N, _N, site0, eng)
    i0 = a.offsets.index(0 if len(spec.dims) == 1 else (0,) * len(spec.dims))
    nu = a.values[i0].real
    if nu <= 0:
        raise ValueError("density is zero; correlation functions undefined")
    spacing = mean_spacing(spec.dims, spec.filling)
    meta = {"kind": spec.kind, "dims": spec.dims, "filling": spec.filling, "density": nu, **eng.stats.as_dict()}
    g1 = CorrelationSeries(a.offsets, a.values / nu, spacing, dict(meta, name="g1"))
    g2 = CorrelationSeries(b.offsets, (b.values / nu**2).real, spacing, dict(meta, name="g2"))
    return g1, g2


def cut(series: CorrelationSeries, kind: str = "axis"):
    """Points of a 2D series along ``(D, 0)`` (``axis``) or ``(D, D)`` (``diagonal``).

    Returns ``(distance, values)`` with distances in lattice units.
    """
    pts = []
    for off, v in zip(series.offsets, series.values):
        if np.ndim(off) == 0:
            pts.append((float(off), v))
        elif kind == "axis" and off[1] == 0:
            pts.append((float(off[0]), v))
        elif kind == "diagonal" and off[0] == off[1]:
            pts.append((float(np.sqrt(2) * off[0]), v))
    if kind not in ("axis", "diagonal"):
        raise ValueError("cut must be 'axis' or 'diagonal'")
    pts.sort(key=lambda p: p[0])
    return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])


# --- susceptibility ------------------------------------------------------------------------------


def tfi_z(n: int, h: float, all_sites: bool = False) -> float:
    """Site-averaged ``<Z>`` of the TFI ground state from the engine.

    The state is translation invariant, so by default one site stands for
    the average; ``all_sites`` contracts every site.
    """
    _, state = build_model(ModelSpec("TFI", (n,), h=h))
    eng = Engine(state)
    op = LocalOperator.one(_Z)
    if all_sites:
        return float(np.mean(eng.expect_all_one_site(op)).real)
    return float(eng.expect(op, [0]).real)


@dataclass
class SusceptibilitySweep:
    h: np.ndarray
    z: np.ndarray
    chi: np.ndarray
    dh: float
    n: int

    @property
    def peak(self) -> float:
        return float(self.h[int(np.argmax(self.chi))])


def susceptibility_sweep(
    n: int, h_grid, dh: float = 1e-2, richardson: bool = False, all_sites: bool = False, threads: int = 1
) -> SusceptibilitySweep:
    """``chi(h) = -d<Z>/dh`` by central differences around each grid point.

    ``richardson`` combines steps ``dh`` and ``dh/2`` to cancel the
    second-order error.  Field values shared between grid points and
    difference stencils are evaluated once; with ``threads > 1`` they run
    concurrently and are gathered in grid order.
    """
    h_grid = np.asarray(h_grid, dtype=float)
    if h_grid.size == 0:
        raise ValueError("empty h grid")
    if dh <= 0:
        raise ValueError("dh must be positive")
    steps = [dh, dh / 2] if richardson else [dh]
    wanted = sorted({round(float(h + s), 12) for h in h_grid for s in [0.0] + steps + [-x for x in steps]})
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as pool:
            vals = list(pool.map(lambda h: tfi_z(n, h, all_sites), wanted))
    else:
        vals = [tfi_z(n, h, all_sites) for h in wanted]
    zs = dict(zip(wanted, vals))

    def z(h):
        return zs[round(float(h), 12)]

    def deriv(h, step):
        return -(z(h + step) - z(h - step)) / (2 * step)

    chi = []
    for h in h_grid:
        d = deriv(h, dh)
        if richardson:
            d = (4 * deriv(h, dh / 2) - d) / 3
        chi.append(d)
    return SusceptibilitySweep(h_grid, np.array([z(h) for h in h_grid]), np.array(chi), dh, n)
