# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for the exact many-body oracle.

Mirrors _ed_py exactly: same basis order (ascending bitmasks), same sign
convention (parity of occupied sites strictly between source and target).
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()

ctypedef unsigned long long u64


cdef inline int _between_parity(u64 mask, int a, int b) nogil:
    cdef int lo = a if a < b else b
    cdef int hi = b if a < b else a
    cdef int k, c = 0
    for k in range(lo + 1, hi):
        if (mask >> k) & 1ULL:
            c += 1
    return c & 1


cdef inline long long _rank(u64 mask, long long[:, ::1] binom) nogil:
    cdef long long r = 0
    cdef int s = 0, t = 1
    while mask:
        if mask & 1ULL:
            r += binom[s, t]
            t += 1
        mask >>= 1
        s += 1
    return r


def _binom_table(int m, int n):
    tab = np.zeros((m + 1, n + 2), dtype=np.int64)
    tab[:, 0] = 1
    for s in range(1, m + 1):
        for t in range(1, min(s, n + 1) + 1):
            tab[s, t] = tab[s - 1, t - 1] + tab[s - 1, t]
    return tab


def build_hamiltonian_parts(masks, one_body, pair):
    """COO triplets of the many-body Hamiltonian on the bitmask basis."""
    cdef const u64[::1] mk = np.ascontiguousarray(masks, dtype=np.uint64)
    cdef const double complex[:, ::1] tmat = np.ascontiguousarray(one_body, dtype=np.complex128)
    cdef const double[:, ::1] pr = np.ascontiguousarray(pair, dtype=np.float64)
    cdef int m = tmat.shape[0]
    cdef Py_ssize_t nb = mk.shape[0]
    cdef int npart = 0
    if nb > 0:
        npart = int(np.bitwise_count(np.uint64(mk[0])))
    cdef long long[:, ::1] binom = _binom_table(m, npart)

    cdef Py_ssize_t cap = nb * (1 + npart * (m - npart))
    rows_a = np.empty(cap, dtype=np.int64)
    cols_a = np.empty(cap, dtype=np.int64)
    data_a = np.empty(cap, dtype=np.complex128)
    cdef long long[::1] rows = rows_a
    cdef long long[::1] cols = cols_a
    cdef double complex[::1] data = data_a

    cdef Py_ssize_t b, ptr = 0
    cdef int i, j
    cdef u64 mask, dst
    cdef double complex e, tij
    cdef double sgn
    with nogil:
        for b in range(nb):
            mask = mk[b]
            e = 0
            for i in range(m):
                if not (mask >> i) & 1ULL:
                    continue
                e = e + tmat[i, i]
                for j in range(i + 1, m):
                    if (mask >> j) & 1ULL:
                        e = e + pr[i, j]
            rows[ptr] = b
            cols[ptr] = b
            data[ptr] = e
            ptr += 1
            for i in range(m):
                if not (mask >> i) & 1ULL:
                    continue
                for j in range(m):
                    if i == j or (mask >> j) & 1ULL:
                        continue
                    tij = tmat[j, i]
                    if tij == 0:
                        continue
                    dst = (mask ^ (1ULL << i)) | (1ULL << j)
                    sgn = -1.0 if _between_parity(mask, i, j) else 1.0
                    rows[ptr] = _rank(dst, binom)
                    cols[ptr] = b
                    data[ptr] = tij * sgn
                    ptr += 1
    return rows_a[:ptr], cols_a[:ptr], data_a[:ptr]


def one_pdm(masks, amps, int m):
    """G[x, y] = <a+_y a_x> for the normalized amplitude vector."""
    cdef const u64[::1] mk = np.ascontiguousarray(masks, dtype=np.uint64)
    cdef const double complex[::1] cs = np.ascontiguousarray(amps, dtype=np.complex128)
    cdef Py_ssize_t nb = mk.shape[0]
    cdef int npart = 0
    if nb > 0:
        npart = int(np.bitwise_count(np.uint64(mk[0])))
    cdef long long[:, ::1] binom = _binom_table(m, npart)
    g_a = np.zeros((m, m), dtype=np.complex128)
    cdef double complex[:, ::1] g = g_a

    cdef Py_ssize_t b
    cdef int i, j
    cdef u64 mask, dst
    cdef double complex c
    cdef double sgn
    with nogil:
        for b in range(nb):
            mask = mk[b]
            c = cs[b]
            for i in range(m):
                if not (mask >> i) & 1ULL:
                    continue
                g[i, i] = g[i, i] + (c.real * c.real + c.imag * c.imag)
                for j in range(m):
                    if i == j or (mask >> j) & 1ULL:
                        continue
                    dst = (mask ^ (1ULL << i)) | (1ULL << j)
                    sgn = -1.0 if _between_parity(mask, i, j) else 1.0
                    g[i, j] = g[i, j] + cs[_rank(dst, binom)].conjugate() * sgn * c
    return g_a
