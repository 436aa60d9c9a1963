"""Numpy implementations of the aggregation and edit-distance kernels.

Same signatures as the compiled ``_ckernels`` module. CSR inputs list the
source nodes of every destination row in ascending order.
"""

import numpy as np


def csr_mean(indptr, indices, m):
    n = len(indptr) - 1
    deg = np.diff(indptr)
    out = np.zeros((n, m.shape[1]))
    if len(indices) == 0:
        return out
    rows = np.repeat(np.arange(n), deg)
    np.add.at(out, rows, m[indices])
    nz = deg > 0
    out[nz] /= deg[nz, None]
    return out


def csr_mean_backward(indptr, indices, grad_out, n_src):
    n = len(indptr) - 1
    deg = np.diff(indptr)
    grad = np.zeros((n_src, grad_out.shape[1]))
    if len(indices) == 0:
        return grad
    rows = np.repeat(np.arange(n), deg)
    scale = np.zeros(n)
    nz = deg > 0
    scale[nz] = 1.0 / deg[nz]
    np.add.at(grad, indices, grad_out[rows] * scale[rows, None])
    return grad


def csr_max(indptr, indices, m):
    """Row-wise max over neighbours; ``arg`` holds the winning source (-1 if none).

    Ties go to the lowest source index.
    """
    n = len(indptr) - 1
    d = m.shape[1]
    out = np.zeros((n, d))
    arg = np.full((n, d), -1, dtype=np.int64)
    if len(indices) == 0:
        return out, arg
    deg = np.diff(indptr)
    nz = np.flatnonzero(deg > 0)
    gathered = m[indices]
    best = np.maximum.reduceat(gathered, indptr[nz], axis=0)
    out[nz] = best
    rows = np.repeat(np.arange(n), deg)
    pos = np.arange(len(indices))
    hit = gathered == out[rows]
    cand = np.where(hit, pos[:, None], len(indices))
    first = np.minimum.reduceat(cand, indptr[nz], axis=0)
    arg[nz] = indices[first]
    return out, arg


def csr_max_backward(arg, grad_out, n_src):
    grad = np.zeros((n_src, grad_out.shape[1]))
    r, c = np.nonzero(arg >= 0)
    np.add.at(grad, (arg[r, c], c), grad_out[r, c])
    return grad


def edit_distance(a, b):
    """Unit-cost Levenshtein distance between two integer sequences."""
    a = list(a)
    b = list(b)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        cur = [i] + [0] * len(b)
        for j, y in enumerate(b, 1):
            sub = prev[j - 1] + (x != y)
            dele = prev[j] + 1
            ins = cur[j - 1] + 1
            cur[j] = sub if sub < dele and sub < ins else (dele if dele < ins else ins)
        prev = cur
    return int(prev[-1])
