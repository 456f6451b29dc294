"""Contraction-step kernels.

Every kernel exists twice: a numba version for the unbatched hot path and an
einsum version that also broadcasts over a leading batch axis.  Setting the
environment variable ``SPECTRALTN_DISABLE_NUMBA=1`` (before import) forces
the einsum versions everywhere.

Tensor layouts: gates are ``G[o1, o2, i1, i2]``, one-wire densities
``r[a, a']`` and two-wire densities ``r[a, b, a', b']``.
"""
from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("SPECTRALTN_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised with the env flag
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA
NUMBA_PAIR_MAX_CHI = 4


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"`` at run time (used by the benchmark)."""
    global USE_NUMBA
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba backend unavailable")
        USE_NUMBA = True
    elif name == "numpy":
        USE_NUMBA = False
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"


def parity_of(chi: int) -> np.ndarray:
    return np.array([bin(a).count("1") & 1 for a in range(chi)], dtype=np.int64)


# --- multiply-add counts ------------------------------------------------------


def madds_descend(chi: int) -> int:
    return 3 * chi**5


def madds_from_pair_single(chi: int) -> int:
    return chi**6 + chi**5


def madds_fuse(chi: int) -> int:
    return chi**4 + 2 * chi**6


def madds_pair_descend(chi: int) -> int:
    return 2 * chi**7 + 3 * chi**8


# --- numpy / batched versions -------------------------------------------------

_E = dict(optimize=True)


def descend_np(gk, gb, r1, r2):
    """One wire out of a gate fed by two uncorrelated wires; keeps output leg 0."""
    t = np.einsum("...uvab,...ac->...uvcb", gk, r1, **_E)
    t = np.einsum("...uvcb,...bd->...uvcd", t, r2, **_E)
    return np.einsum("...uvcd,...wvcd->...uw", t, gb.conj(), **_E)


def from_pair_single_np(gk, gb, r):
    t = np.einsum("...uvab,...abcd->...uvcd", gk, r, **_E)
    return np.einsum("...uvcd,...wvcd->...uw", t, gb.conj(), **_E)


def fuse_np(gk, gb, r1, r2):
    r = np.einsum("...ac,...bd->...abcd", r1, r2, **_E)
    return apply_pair_np(gk, gb, r)


def apply_pair_np(gk, gb, r):
    t = np.einsum("...uvab,...abcd->...uvcd", gk, r, **_E)
    return np.einsum("...uvcd,...wxcd->...uvwx", t, gb.conj(), **_E)


def pair_descend_np(g1k, g1b, g2k, g2b, ra, rb, pv):
    """Two wires ``(u, x)`` from gates ``G1: (i, k) -> (u, v)`` and ``G2: (j, l) -> (x, y)``.

    ``ra`` is the density on ``(i, j)`` and ``rb`` on ``(k, l)``; ``v`` and
    ``y`` are traced.  ``pv`` holds basis parities.
    """
    sgn = 1.0 - 2.0 * np.outer(pv, pv)
    # (-1)^{p(v)(p(u)+p(u'))} from moving v past x when (u, x) are kept
    sv = 1.0 - 2.0 * ((pv[:, None, None] * (pv[None, :, None] + pv[None, None, :])) & 1)
    e1 = np.einsum("...uvik,...wvIK,vuw->...uwikIK", g1k, g1b.conj(), sv, **_E)
    e2 = np.einsum("...xyjl,...zyJL->...xzjlJL", g2k, g2b.conj(), **_E)
    r1 = np.einsum("...uwikIK,...ijIJ->...uwkKjJ", e1, ra, **_E)
    r1 = r1 * sgn.T[:, None, :, None] * sgn.T[None, :, None, :]
    r2 = np.einsum("...uwkKjJ,...klKL->...uwjJlL", r1, rb, **_E)
    return np.einsum("...uwjJlL,...xzjlJL->...uxwz", r2, e2, **_E)


# --- numba versions -----------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True)
    def _descend_nb(g, r1, r2):
        chi = r1.shape[0]
        t1 = np.zeros((chi, chi, chi, chi), dtype=np.complex128)
        for u in range(chi):
            for v in range(chi):
                for a in range(chi):
                    for c in range(chi):
                        ra = r1[a, c]
                        if ra == 0:
                            continue
                        for b in range(chi):
                            t1[u, v, c, b] += g[u, v, a, b] * ra
        t2 = np.zeros((chi, chi, chi, chi), dtype=np.complex128)
        for u in range(chi):
            for v in range(chi):
                for c in range(chi):
                    for b in range(chi):
                        x = t1[u, v, c, b]
                        if x == 0:
                            continue
                        for d in range(chi):
                            t2[u, v, c, d] += x * r2[b, d]
        out = np.zeros((chi, chi), dtype=np.complex128)
        for u in range(chi):
            for w in range(chi):
                acc = 0j
                for v in range(chi):
                    for c in range(chi):
                        for d in range(chi):
                            acc += t2[u, v, c, d] * np.conj(g[w, v, c, d])
                out[u, w] = acc
        return out

    @njit(cache=True)
    def _pair_descend_nb(g1, g2, ra, rb, pv):
        chi = pv.shape[0]
        e1 = np.zeros((chi, chi, chi, chi, chi, chi), dtype=np.complex128)
        for u in range(chi):
            for w in range(chi):
                for v in range(chi):
                    s = -1.0 if (pv[v] * (pv[u] + pv[w])) % 2 == 1 else 1.0
                    for i in range(chi):
                        for k in range(chi):
                            x = g1[u, v, i, k] * s
                            if x == 0:
                                continue
                            for I in range(chi):
                                for K in range(chi):
                                    e1[u, w, i, k, I, K] += x * np.conj(g1[w, v, I, K])
        e2 = np.zeros((chi, chi, chi, chi, chi, chi), dtype=np.complex128)
        for x_ in range(chi):
            for z in range(chi):
                for y in range(chi):
                    for j in range(chi):
                        for l in range(chi):
                            a = g2[x_, y, j, l]
                            if a == 0:
                                continue
                            for J in range(chi):
                                for L in range(chi):
                                    e2[x_, z, j, l, J, L] += a * np.conj(g2[z, y, J, L])
        r1 = np.zeros((chi, chi, chi, chi, chi, chi), dtype=np.complex128)
        for u in range(chi):
            for w in range(chi):
                for i in range(chi):
                    for I in range(chi):
                        for k in range(chi):
                            for K in range(chi):
                                a = e1[u, w, i, k, I, K]
                                if a == 0:
                                    continue
                                for j in range(chi):
                                    for J in range(chi):
                                        r1[u, w, k, K, j, J] += a * ra[i, j, I, J]
        for k in range(chi):
            for K in range(chi):
                for j in range(chi):
                    for J in range(chi):
                        if (pv[j] * pv[k] + pv[J] * pv[K]) % 2 == 1:
                            for u in range(chi):
                                for w in range(chi):
                                    r1[u, w, k, K, j, J] = -r1[u, w, k, K, j, J]
        r2 = np.zeros((chi, chi, chi, chi, chi, chi), dtype=np.complex128)
        for u in range(chi):
            for w in range(chi):
                for k in range(chi):
                    for K in range(chi):
                        for j in range(chi):
                            for J in range(chi):
                                a = r1[u, w, k, K, j, J]
                                if a == 0:
                                    continue
                                for l in range(chi):
                                    for L in range(chi):
                                        r2[u, w, j, J, l, L] += a * rb[k, l, K, L]
        out = np.zeros((chi, chi, chi, chi), dtype=np.complex128)
        for u in range(chi):
            for w in range(chi):
                for j in range(chi):
                    for J in range(chi):
                        for l in range(chi):
                            for L in range(chi):
                                a = r2[u, w, j, J, l, L]
                                if a == 0:
                                    continue
                                for x_ in range(chi):
                                    for z in range(chi):
                                        out[u, x_, w, z] += a * e2[x_, z, j, l, J, L]
        return out


def _plain(*arrays) -> bool:
    return all(a.ndim in (2, 4) and a.dtype == np.complex128 for a in arrays)


def descend(gk, gb, r1, r2):
    if USE_NUMBA and gk is gb and _plain(gk, r1, r2):
        return _descend_nb(gk, r1, r2)
    return descend_np(gk, gb, r1, r2)


def from_pair_single(gk, gb, r):
    return from_pair_single_np(gk, gb, r)


def fuse(gk, gb, r1, r2):
    return fuse_np(gk, gb, r1, r2)


def apply_pair(gk, gb, r):
    return apply_pair_np(gk, gb, r)


def pair_descend(g1k, g1b, g2k, g2b, ra, rb, pv):
    # past chi = 4 the einsum path (BLAS) beats the plain loops
    if USE_NUMBA and ra.shape[0] <= NUMBA_PAIR_MAX_CHI and g1k is g1b and g2k is g2b and _plain(g1k, g2k) and ra.ndim == 4 and rb.ndim == 4:
        return _pair_descend_nb(g1k, g2k, ra, rb, pv)
    return pair_descend_np(g1k, g1b, g2k, g2b, ra, rb, pv)
