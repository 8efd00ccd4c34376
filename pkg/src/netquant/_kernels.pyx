# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled aggregation kernels.

Kept bitwise-identical to `_kernels_py`: neighbor sums go through the same
int64 fixed-point grid, so both backends produce the same embeddings and
neither depends on neighbor order.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport llrint

cnp.import_array()

# 47 fractional bits, 16 bits of headroom; see _kernels_py.
FIXED_POINT_SCALE = 2.0 ** 47

cdef double _SCALE = 2.0 ** 47


def neighbor_sum(indptr, indices, state):
    """Sum rows of `state` over each node's neighbor list."""
    return _neighbor_sum(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
        np.ascontiguousarray(state, dtype=np.float64),
    )


def spmv(indptr, indices, vector):
    """Multiply the implicit 0/1 adjacency matrix by `vector`.

    Entries must lie in [-1, 1]; sums run on the same fixed-point grid as
    `neighbor_sum` so both backends agree bitwise.
    """
    vector = np.ascontiguousarray(vector, dtype=np.float64)
    if vector.size and np.max(np.abs(vector)) > 1.0:
        raise ValueError("spmv entries must lie in [-1, 1]")
    return _spmv(
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
        vector,
    )


cdef _neighbor_sum(const cnp.int64_t[::1] indptr,
                   const cnp.int64_t[::1] indices,
                   const double[:, ::1] state):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t d = state.shape[1]
    cdef Py_ssize_t v, e, k, u

    quantized = np.empty((state.shape[0], d), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] q = quantized
    for v in range(state.shape[0]):
        for k in range(d):
            q[v, k] = llrint(state[v, k] * _SCALE)

    out = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] o = out
    acc_arr = np.zeros(d, dtype=np.int64)
    cdef cnp.int64_t[::1] acc = acc_arr
    for v in range(n):
        for k in range(d):
            acc[k] = 0
        for e in range(indptr[v], indptr[v + 1]):
            u = indices[e]
            for k in range(d):
                acc[k] += q[u, k]
        for k in range(d):
            o[v, k] = (<double> acc[k]) / _SCALE
    return out


cdef _spmv(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
           const double[::1] vector):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t v, e
    cdef cnp.int64_t total

    quantized = np.empty(vector.shape[0], dtype=np.int64)
    cdef cnp.int64_t[::1] q = quantized
    for v in range(vector.shape[0]):
        q[v] = llrint(vector[v] * _SCALE)

    out = np.zeros(n, dtype=np.float64)
    cdef double[::1] o = out
    for v in range(n):
        total = 0
        for e in range(indptr[v], indptr[v + 1]):
            total += q[indices[e]]
        o[v] = (<double> total) / _SCALE
    return out
