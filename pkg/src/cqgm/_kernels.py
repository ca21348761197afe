"""Hot statevector kernels.

Each kernel has a numba implementation and a pure-numpy twin with the same
signature.  The numba path is used when numba imports cleanly and the
``CQGM_DISABLE_NUMBA`` environment variable is unset (or ``0``).  Both paths
mutate ``state`` in place.

Qubit ``q`` is bit ``q`` of the basis index (qubit 0 is the least
significant bit).
"""
from __future__ import annotations

import os
from functools import lru_cache

import numpy as np

_DISABLED = os.environ.get("CQGM_DISABLE_NUMBA", "0").lower() not in ("", "0", "false", "no")

try:
    if _DISABLED:
        raise ImportError("numba disabled by CQGM_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


USE_NUMBA = HAVE_NUMBA


# ---------------------------------------------------------------- numpy path


@lru_cache(maxsize=4096)
def _pair_indices(dim: int, target: int, cmask: int, cval: int) -> np.ndarray:
    idx = np.arange(dim, dtype=np.int64)
    keep = (idx & (1 << target)) == 0
    if cmask:
        keep &= (idx & cmask) == cval
    out = idx[keep]
    out.setflags(write=False)
    return out


def apply_1q_numpy(state, target, m00, m01, m10, m11, cmask=0, cval=0):
    """Apply a 2x2 matrix to ``target`` on the amplitudes whose control bits match.

    ``state`` may be 1-D (one state) or 2-D (a batch, one state per row).
    """
    i0 = _pair_indices(state.shape[-1], target, cmask, cval)
    i1 = i0 | (1 << target)
    a0 = state[..., i0]
    a1 = state[..., i1]
    state[..., i0] = m00 * a0 + m01 * a1
    state[..., i1] = m10 * a0 + m11 * a1
    return state


def apply_diagonal_numpy(state, diag):
    state *= diag
    return state


def apply_permutation_numpy(state, perm):
    out = np.empty_like(state)
    out[..., perm] = state
    state[...] = out
    return state


def marginal_numpy(probs, start, size):
    """Marginal of a full probability vector over qubits [start, start+size)."""
    dim = probs.shape[0]
    nq = dim.bit_length() - 1
    t = probs.reshape(1 << (nq - start - size), 1 << size, 1 << start)
    return t.sum(axis=(0, 2))


# ---------------------------------------------------------------- numba path


@njit(cache=True)
def _apply_1q_nb(state, target, m00, m01, m10, m11, cmask, cval):
    bit = 1 << target
    n = state.shape[0]
    for i in range(n):
        if i & bit:
            continue
        if (i & cmask) != cval:
            continue
        j = i | bit
        a0 = state[i]
        a1 = state[j]
        state[i] = m00 * a0 + m01 * a1
        state[j] = m10 * a0 + m11 * a1


@njit(cache=True)
def _apply_1q_batch_nb(batch, target, m00, m01, m10, m11, cmask, cval):
    for r in range(batch.shape[0]):
        _apply_1q_nb(batch[r], target, m00, m01, m10, m11, cmask, cval)


@njit(cache=True)
def _apply_diagonal_nb(state, diag):
    for i in range(state.shape[0]):
        state[i] *= diag[i]


@njit(cache=True)
def _apply_permutation_nb(state, perm, scratch):
    for i in range(state.shape[0]):
        scratch[perm[i]] = state[i]
    for i in range(state.shape[0]):
        state[i] = scratch[i]


@njit(cache=True)
def _marginal_nb(probs, start, size):
    out = np.zeros(1 << size)
    mask = (1 << size) - 1
    for i in range(probs.shape[0]):
        out[(i >> start) & mask] += probs[i]
    return out


def apply_1q_numba(state, target, m00, m01, m10, m11, cmask=0, cval=0):
    if state.ndim == 2:
        _apply_1q_batch_nb(state, target, complex(m00), complex(m01), complex(m10), complex(m11), cmask, cval)
    else:
        _apply_1q_nb(state, target, complex(m00), complex(m01), complex(m10), complex(m11), cmask, cval)
    return state


def apply_diagonal_numba(state, diag):
    if state.ndim == 2:
        state *= diag
    else:
        _apply_diagonal_nb(state, diag.astype(state.dtype, copy=False))
    return state


def apply_permutation_numba(state, perm):
    if state.ndim == 2:
        return apply_permutation_numpy(state, perm)
    _apply_permutation_nb(state, perm, np.empty_like(state))
    return state


def marginal_numba(probs, start, size):
    return _marginal_nb(np.ascontiguousarray(probs, dtype=np.float64), start, size)


if USE_NUMBA:
    apply_1q = apply_1q_numba
    apply_diagonal = apply_diagonal_numba
    apply_permutation = apply_permutation_numba
    marginal = marginal_numba
else:  # pragma: no cover
    apply_1q = apply_1q_numpy
    apply_diagonal = apply_diagonal_numpy
    apply_permutation = apply_permutation_numpy
    marginal = marginal_numpy


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
