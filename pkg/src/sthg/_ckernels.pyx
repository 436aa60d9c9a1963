# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled aggregation and edit-distance kernels (see _pykernels for the reference)."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def csr_mean(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices, const double[:, :] m):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t d = m.shape[1]
    out_arr = np.zeros((n, d))
    cdef double[:, :] out = out_arr
    cdef Py_ssize_t i, p, c, j
    cdef double inv
    for i in range(n):
        if indptr[i + 1] == indptr[i]:
            continue
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            for c in range(d):
                out[i, c] += m[j, c]
        inv = 1.0 / (indptr[i + 1] - indptr[i])
        for c in range(d):
            out[i, c] *= inv
    return out_arr


def csr_mean_backward(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices,
                      const double[:, :] grad_out, Py_ssize_t n_src):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t d = grad_out.shape[1]
    grad_arr = np.zeros((n_src, d))
    cdef double[:, :] grad = grad_arr
    cdef Py_ssize_t i, p, c, j
    cdef double inv
    for i in range(n):
        if indptr[i + 1] == indptr[i]:
            continue
        inv = 1.0 / (indptr[i + 1] - indptr[i])
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            for c in range(d):
                grad[j, c] += grad_out[i, c] * inv
    return grad_arr


def csr_max(const cnp.int64_t[:] indptr, const cnp.int64_t[:] indices, const double[:, :] m):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t d = m.shape[1]
    out_arr = np.zeros((n, d))
    arg_arr = np.full((n, d), -1, dtype=np.int64)
    cdef double[:, :] out = out_arr
    cdef cnp.int64_t[:, :] arg = arg_arr
    cdef Py_ssize_t i, p, c, j, first
    cdef double v
    for i in range(n):
        first = indptr[i]
        if indptr[i + 1] == first:
            continue
        j = indices[first]
        for c in range(d):
            out[i, c] = m[j, c]
            arg[i, c] = j
        for p in range(first + 1, indptr[i + 1]):
            j = indices[p]
            for c in range(d):
                v = m[j, c]
                # strict comparison keeps the earliest (lowest-index) source on ties
                if v > out[i, c]:
                    out[i, c] = v
                    arg[i, c] = j
    return out_arr, arg_arr


def csr_max_backward(const cnp.int64_t[:, :] arg, const double[:, :] grad_out, Py_ssize_t n_src):
    cdef Py_ssize_t n = arg.shape[0]
    cdef Py_ssize_t d = arg.shape[1]
    grad_arr = np.zeros((n_src, d))
    cdef double[:, :] grad = grad_arr
    cdef Py_ssize_t i, c
    cdef cnp.int64_t j
    for i in range(n):
        for c in range(d):
            j = arg[i, c]
            if j >= 0:
                grad[j, c] += grad_out[i, c]
    return grad_arr


def edit_distance(a, b):
    cdef cnp.int64_t[:] x = np.ascontiguousarray(a, dtype=np.int64)
    cdef cnp.int64_t[:] y = np.ascontiguousarray(b, dtype=np.int64)
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], i, j
    prev_arr = np.arange(m + 1, dtype=np.int64)
    cur_arr = np.zeros(m + 1, dtype=np.int64)
    cdef cnp.int64_t[:] prev = prev_arr
    cdef cnp.int64_t[:] cur = cur_arr
    cdef cnp.int64_t[:] tmp
    cdef cnp.int64_t sub, dele, ins
    for i in range(1, n + 1):
        cur[0] = i
        for j in range(1, m + 1):
            sub = prev[j - 1] + (x[i - 1] != y[j - 1])
            dele = prev[j] + 1
            ins = cur[j - 1] + 1
            if dele < sub:
                sub = dele
            if ins < sub:
                sub = ins
            cur[j] = sub
        tmp = prev
        prev = cur
        cur = tmp
    return int(prev[m])
