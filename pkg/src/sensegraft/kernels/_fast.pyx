# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled scoring/pooling kernels.

Single-pass loops over typed memoryviews; semantics match ``_ref`` (the
numpy reference) to floating-point roundoff.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt, INFINITY


def dot_scores(double[:, ::1] matrix, double[::1] query):
    cdef Py_ssize_t n = matrix.shape[0]
    cdef Py_ssize_t d = matrix.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += matrix[i, j] * query[j]
        ov[i] = acc
    return out


def cosine_scores(double[:, ::1] matrix, double[::1] query):
    cdef Py_ssize_t n = matrix.shape[0]
    cdef Py_ssize_t d = matrix.shape[1]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j
    cdef double acc, sq, qsq, qnorm
    qsq = 0.0
    for j in range(d):
        qsq += query[j] * query[j]
    qnorm = sqrt(qsq)
    for i in range(n):
        acc = 0.0
        sq = 0.0
        for j in range(d):
            acc += matrix[i, j] * query[j]
            sq += matrix[i, j] * matrix[i, j]
        if qnorm > 0.0 and sq > 0.0:
            ov[i] = acc / (sqrt(sq) * qnorm)
        else:
            ov[i] = -INFINITY
    return out


def softmax(double[::1] logits):
    cdef Py_ssize_t n = logits.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    cdef double m = -INFINITY
    cdef double total = 0.0
    for i in range(n):
        if logits[i] > m:
            m = logits[i]
    for i in range(n):
        ov[i] = exp(logits[i] - m)
        total += ov[i]
    for i in range(n):
        ov[i] = ov[i] / total
    return out


def pool_span(double[:, :, ::1] hidden, double[::1] weights,
              Py_ssize_t start, Py_ssize_t end):
    cdef Py_ssize_t layers = hidden.shape[0]
    cdef Py_ssize_t d = hidden.shape[2]
    cdef Py_ssize_t span = end - start
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(d, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t l, t, j
    cdef double acc, acc_l
    for j in range(d):
        acc = 0.0
        for l in range(layers):
            if weights[l] == 0.0:
                continue
            acc_l = 0.0
            for t in range(start, end):
                acc_l = acc_l + hidden[l, t, j]
            acc += weights[l] * (acc_l / span)
        ov[j] = acc
    return out
