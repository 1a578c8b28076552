# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the hot loops in ``_pure``.

Semantics must match ``sbrbench.kernels._pure`` exactly; the test suite
cross-checks both backends on random inputs.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log

cnp.import_array()

BACKEND = "cython"


def accumulate_index_overlap(
    cnp.int64_t[::1] indptr,
    cnp.int64_t[::1] session_lists,
    cnp.int64_t[::1] prefix_items,
    cnp.float64_t[::1] prefix_weights,
    Py_ssize_t n_sessions,
):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] acc = np.zeros(n_sessions, dtype=np.float64)
    cdef cnp.float64_t[::1] acc_v = acc
    cdef Py_ssize_t i, j, lo, hi
    cdef double w
    for i in range(prefix_items.shape[0]):
        lo = indptr[prefix_items[i]]
        hi = indptr[prefix_items[i] + 1]
        w = prefix_weights[i]
        for j in range(lo, hi):
            acc_v[session_lists[j]] += w
    return acc


def accumulate_neighbor_scores(
    cnp.int64_t[::1] neighbor_ids,
    cnp.float64_t[::1] sims,
    cnp.int64_t[::1] item_indptr,
    cnp.int64_t[::1] item_lists,
    cnp.float64_t[::1] item_weights,
    Py_ssize_t n_items,
):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.zeros(n_items, dtype=np.float64)
    cdef cnp.float64_t[::1] out_v = out
    cdef Py_ssize_t t, j, lo, hi, sid
    cdef double sim
    for t in range(neighbor_ids.shape[0]):
        sid = neighbor_ids[t]
        sim = sims[t]
        lo = item_indptr[sid]
        hi = item_indptr[sid + 1]
        for j in range(lo, hi):
            out_v[item_lists[j]] += sim * item_weights[j]
    return out


def sgns_update(
    cnp.float64_t[:, ::1] w_in,
    cnp.float64_t[:, ::1] w_out,
    Py_ssize_t center,
    cnp.int64_t[::1] targets,
    cnp.float64_t[::1] labels,
    double lr,
):
    cdef Py_ssize_t d = w_in.shape[1]
    cdef Py_ssize_t n = targets.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] grad_h = np.zeros(d, dtype=np.float64)
    cdef cnp.float64_t[::1] grad_h_v = grad_h
    cdef Py_ssize_t t, k, tgt
    cdef double logit, f, g, p, loss = 0.0
    for t in range(n):
        tgt = targets[t]
        logit = 0.0
        for k in range(d):
            logit += w_in[center, k] * w_out[tgt, k]
        f = 1.0 / (1.0 + exp(-logit))
        g = (labels[t] - f) * lr
        for k in range(d):
            grad_h_v[k] += g * w_out[tgt, k]
            w_out[tgt, k] += g * w_in[center, k]
        p = f if labels[t] > 0 else 1.0 - f
        if p < 1e-12:
            p = 1e-12
        loss += -log(p)
    for k in range(d):
        w_in[center, k] += grad_h_v[k]
    return loss
