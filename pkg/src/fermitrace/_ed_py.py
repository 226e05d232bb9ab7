"""Pure numpy kernels for the exact many-body oracle.

Fallback used when the compiled extension is unavailable (or when
FERMITRACE_PURE_PYTHON is set).  Basis states are bitmasks of occupied
sites in ascending numeric order; amplitude sign conventions follow
creation operators applied in ascending site order, with the usual parity
string over lower sites.
"""
from __future__ import annotations

import numpy as np

_UONE = np.uint64(1)


def popcount(values: np.ndarray) -> np.ndarray:
    return np.bitwise_count(values)


def hop_parity(masks: np.ndarray, i: int, j: int) -> np.ndarray:
    """Parity of occupied sites strictly between i and j (i removed first)."""
    lo, hi = (i, j) if i < j else (j, i)
    between = (_UONE << np.uint64(hi)) - _UONE
    between &= ~((_UONE << np.uint64(lo + 1)) - _UONE)
    return popcount(masks & between) & _UONE


def build_hamiltonian_parts(masks: np.ndarray, one_body: np.ndarray,
                            pair: np.ndarray):
    """COO triplets (rows, cols, data) of the many-body Hamiltonian.

    one_body is the hermitian hopping matrix T[j, i] multiplying a+_j a_i;
    pair[i, j] is the interaction energy of occupied sites i and j (its
    strict upper triangle is summed on the diagonal).
    """
    masks = np.asarray(masks, dtype=np.uint64)
    m = one_body.shape[0]
    b = masks.size
    occ = np.empty((m, b), dtype=bool)
    for i in range(m):
        occ[i] = (masks >> np.uint64(i)) & _UONE == 1

    diag = np.zeros(b, dtype=np.complex128)
    tdiag = one_body.diagonal()
    for i in range(m):
        diag[occ[i]] += tdiag[i]
        for j in range(i + 1, m):
            both = occ[i] & occ[j]
            if pair[i, j] != 0.0:
                diag[both] += pair[i, j]

    rows = [np.arange(b, dtype=np.int64)]
    cols = [np.arange(b, dtype=np.int64)]
    data = [diag]
    for i in range(m):
        for j in range(m):
            if i == j or one_body[j, i] == 0.0:
                continue
            sel = np.nonzero(occ[i] & ~occ[j])[0]
            if sel.size == 0:
                continue
            src = masks[sel]
            dst = (src ^ (_UONE << np.uint64(i))) | (_UONE << np.uint64(j))
            ranks = np.searchsorted(masks, dst)
            sign = 1.0 - 2.0 * hop_parity(src, i, j).astype(np.float64)
            rows.append(ranks.astype(np.int64))
            cols.append(sel.astype(np.int64))
            data.append(one_body[j, i] * sign)
    return (np.concatenate(rows), np.concatenate(cols),
            np.concatenate(data).astype(np.complex128))


def one_pdm(masks: np.ndarray, amps: np.ndarray, m: int) -> np.ndarray:
    """G[x, y] = <a+_y a_x> for the normalized amplitude vector."""
    masks = np.asarray(masks, dtype=np.uint64)
    amps = np.asarray(amps, dtype=np.complex128)
    g = np.zeros((m, m), dtype=np.complex128)
    prob = np.abs(amps) ** 2
    occ = [(masks >> np.uint64(i)) & _UONE == 1 for i in range(m)]
    for i in range(m):
        g[i, i] = prob[occ[i]].sum()
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            sel = np.nonzero(occ[i] & ~occ[j])[0]
            if sel.size == 0:
                continue
            src = masks[sel]
            dst = (src ^ (_UONE << np.uint64(i))) | (_UONE << np.uint64(j))
            ranks = np.searchsorted(masks, dst)
            sign = 1.0 - 2.0 * hop_parity(src, i, j).astype(np.float64)
            g[i, j] += np.sum(amps[ranks].conj() * sign * amps[sel])
    return g
