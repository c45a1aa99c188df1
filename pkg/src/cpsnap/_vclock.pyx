# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled vector-clock kernels (see _vclock_py for the reference version)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def assign(node, kind, ref, int n):
    cdef cnp.int64_t[:] nd = np.ascontiguousarray(node, dtype=np.int64)
    cdef cnp.int64_t[:] kd = np.ascontiguousarray(kind, dtype=np.int64)
    cdef cnp.int64_t[:] rf = np.ascontiguousarray(ref, dtype=np.int64)
    cdef Py_ssize_t count = nd.shape[0]
    out_arr = np.zeros((count, n), dtype=np.int32)
    cdef int[:, :] out = out_arr
    cdef cnp.int64_t[:] last = np.full(n, -1, dtype=np.int64)
    cdef Py_ssize_t e, k, p, r, prev
    for e in range(count):
        p = nd[e]
        prev = last[p]
        if prev >= 0:
            for k in range(n):
                out[e, k] = out[prev, k]
        if kd[e] == 2:
            r = rf[e]
            if r < 0 or r >= e:
                raise ValueError(f"receive event {e} has no earlier send")
            for k in range(n):
                if out[r, k] > out[e, k]:
                    out[e, k] = out[r, k]
        out[e, p] += 1
        last[p] = e
    return out_arr


def first_precedence(clocks, owners):
    cdef int[:, :] c = np.ascontiguousarray(clocks, dtype=np.int32)
    cdef cnp.int64_t[:] ow = np.ascontiguousarray(owners, dtype=np.int64)
    cdef Py_ssize_t k = ow.shape[0]
    cdef Py_ssize_t a, b, oa
    cdef int own
    for a in range(k):
        oa = ow[a]
        own = c[a, oa]
        for b in range(k):
            if a != b and ow[b] != oa and c[b, oa] >= own:
                return a, b
    return None
