# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled row-wise kernels. Same contracts as ``mohn._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log
from libcpp.algorithm cimport partial_sort
from libcpp.pair cimport pair
from libcpp.vector cimport vector

cnp.import_array()

NAME = "cython"

ctypedef pair[double, Py_ssize_t] keyed


def select_smallest(values, Py_ssize_t f_n):
    cdef double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t rows = v.shape[0], n = v.shape[1], i, j
    out_arr = np.empty((rows, f_n), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    cdef vector[keyed] buf
    buf.resize(n)
    for i in range(rows):
        for j in range(n):
            buf[j].first = v[i, j]
            buf[j].second = j
        # pair ordering is lexicographic: (value, index)
        partial_sort(buf.begin(), buf.begin() + f_n, buf.end())
        for j in range(f_n):
            out[i, j] = buf[j].second
    return out_arr


def softmax_xent_rows(logits):
    cdef double[:, ::1] z = np.ascontiguousarray(logits, dtype=np.float64)
    cdef Py_ssize_t rows = z.shape[0], m = z.shape[1], i, j
    loss_arr = np.empty(rows, dtype=np.float64)
    probs_arr = np.empty((rows, m), dtype=np.float64)
    cdef double[::1] loss = loss_arr
    cdef double[:, ::1] probs = probs_arr
    cdef double top, total, lse
    for i in range(rows):
        top = z[i, 0]
        for j in range(1, m):
            if z[i, j] > top:
                top = z[i, j]
        total = 0.0
        for j in range(m):
            total += exp(z[i, j] - top)
        lse = log(total)
        for j in range(m):
            probs[i, j] = exp(z[i, j] - top - lse)
        loss[i] = lse - (z[i, 0] - top)
    return loss_arr, probs_arr


def knn_vote(sims, labels, Py_ssize_t k, double tau, Py_ssize_t n_classes):
    cdef double[:, ::1] s = np.ascontiguousarray(sims, dtype=np.float64)
    cdef cnp.int64_t[::1] lab = np.ascontiguousarray(labels, dtype=np.int64)
    cdef Py_ssize_t rows = s.shape[0], n = s.shape[1], i, j, c, best
    out_arr = np.empty(rows, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef vector[keyed] buf
    cdef vector[double] scores
    buf.resize(n)
    scores.resize(n_classes)
    for i in range(rows):
        for j in range(n):
            buf[j].first = -s[i, j]
            buf[j].second = j
        partial_sort(buf.begin(), buf.begin() + k, buf.end())
        for c in range(n_classes):
            scores[c] = 0.0
        for j in range(k):
            scores[lab[buf[j].second]] += exp(-buf[j].first / tau)
        best = 0
        for c in range(1, n_classes):
            if scores[c] > scores[best]:
                best = c
        out[i] = best
    return out_arr
