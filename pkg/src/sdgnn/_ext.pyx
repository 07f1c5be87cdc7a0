# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: CSR neighbor gathering, segment reductions and
triangle listing. Every function here has a numpy twin in ``kernels.py``
that must return identical results."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

ctypedef fused real:
    float
    double


def csr_gather(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const cnp.int64_t[::1] rows):
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t i, k, pos = 0, total = 0
    cdef cnp.int64_t r
    for i in range(n):
        r = rows[i]
        total += indptr[r + 1] - indptr[r]
    seg_arr = np.empty(total, dtype=np.int64)
    nbr_arr = np.empty(total, dtype=np.int64)
    cdef cnp.int64_t[::1] seg = seg_arr
    cdef cnp.int64_t[::1] nbr = nbr_arr
    for i in range(n):
        r = rows[i]
        for k in range(indptr[r], indptr[r + 1]):
            seg[pos] = i
            nbr[pos] = indices[k]
            pos += 1
    return seg_arr, nbr_arr


cdef void _segment_sum(const real[:, ::1] values, const cnp.int64_t[::1] seg,
                       real[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, d = values.shape[1]
    cdef cnp.int64_t s
    for i in range(values.shape[0]):
        s = seg[i]
        for j in range(d):
            out[s, j] += values[i, j]


cdef void _segment_max(const real[::1] values, const cnp.int64_t[::1] seg,
                       real[::1] out) noexcept nogil:
    cdef Py_ssize_t i
    cdef cnp.int64_t s
    cdef real x, cur
    for i in range(values.shape[0]):
        s = seg[i]
        x = values[i]
        cur = out[s]
        out[s] = x if x > cur else cur


# Dispatch on dtype by hand: letting Cython match fused memoryview
# signatures at call time costs more than the loops themselves.

def segment_sum(values, seg, Py_ssize_t n):
    out = np.zeros((n, values.shape[1]), dtype=values.dtype)
    if values.dtype == np.float64:
        _segment_sum[double](values, seg, out)
    else:
        _segment_sum[float](values, seg, out)
    return out


def segment_max(values, seg, Py_ssize_t n):
    out = np.full(n, -INFINITY, dtype=values.dtype)
    if values.dtype == np.float64:
        _segment_max[double](values, seg, out)
    else:
        _segment_max[float](values, seg, out)
    return out


def list_triangles(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices):
    """Triples (i, j, k), i < j < k, closed in a simple undirected graph given
    as CSR with sorted, duplicate-free rows."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t u, a, b, a_end, b_end, wa_idx, cap = 1024, count = 0
    cdef cnp.int64_t v, wa, wb
    out_arr = np.empty((cap, 3), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    for u in range(n):
        for a in range(indptr[u], indptr[u + 1]):
            v = indices[a]
            if v <= u:
                continue
            # merge-intersect N(u) and N(v) above v
            a_end = indptr[u + 1]
            b = indptr[v]
            b_end = indptr[v + 1]
            wa_idx = a + 1
            while wa_idx < a_end and b < b_end:
                wa = indices[wa_idx]
                wb = indices[b]
                if wb <= v:
                    b += 1
                elif wa < wb:
                    wa_idx += 1
                elif wb < wa:
                    b += 1
                else:
                    if count == cap:
                        cap *= 2
                        grown = np.empty((cap, 3), dtype=np.int64)
                        grown[:count] = out_arr[:count]
                        out_arr = grown
                        out = out_arr
                    out[count, 0] = u
                    out[count, 1] = v
                    out[count, 2] = wa
                    count += 1
                    wa_idx += 1
                    b += 1
    return np.array(out_arr[:count])
