# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Fused single-pass kernels for the isotropic Gaussian grid.

Row loops are parallelized with OpenMP; every row (or column for the weighted
squared-distance reduction) is computed independently and sequentially inside,
so results do not depend on the thread count.
"""

import numpy as np

cimport cython
cimport openmp
from cython.parallel cimport prange
from libc.math cimport exp, log, M_PI


def set_num_threads(int k):
    openmp.omp_set_num_threads(k)


def mixture_logpdf(double[:, ::1] X, double[:, ::1] means, double[::1] sigma2,
                   double[::1] logw, double[::1] out):
    cdef Py_ssize_t n = X.shape[0], D = X.shape[1], C = means.shape[0]
    cdef Py_ssize_t i, c, r
    cdef double acc, diff, m, s, v
    cdef double[::1] lognorm = np.empty(C)
    for c in range(C):
        lognorm[c] = logw[c] - 0.5 * D * log(2.0 * M_PI * sigma2[c])
    with nogil:
        for i in prange(n, schedule='static'):
            # streaming log-sum-exp with a running max
            m = -1e300
            s = 0.0
            for c in range(C):
                acc = 0.0
                for r in range(D):
                    diff = X[i, r] - means[c, r]
                    acc = acc + diff * diff
                v = lognorm[c] - acc / (2.0 * sigma2[c])
                if v <= m:
                    s = s + exp(v - m)
                else:
                    s = s * exp(m - v) + 1.0
                    m = v
            out[i] = m + log(s)


def responsibilities(double[:, ::1] X, double[:, ::1] means, double[::1] sigma2,
                     double[::1] logw, double[:, ::1] resp, double[::1] lse):
    cdef Py_ssize_t n = X.shape[0], D = X.shape[1], C = means.shape[0]
    cdef Py_ssize_t i, c, r
    cdef double acc, diff, m, s
    cdef double[::1] lognorm = np.empty(C)
    for c in range(C):
        lognorm[c] = logw[c] - 0.5 * D * log(2.0 * M_PI * sigma2[c])
    with nogil:
        for i in prange(n, schedule='static'):
            m = -1e300
            for c in range(C):
                acc = 0.0
                for r in range(D):
                    diff = X[i, r] - means[c, r]
                    acc = acc + diff * diff
                resp[i, c] = lognorm[c] - acc / (2.0 * sigma2[c])
                if resp[i, c] > m:
                    m = resp[i, c]
            s = 0.0
            for c in range(C):
                resp[i, c] = exp(resp[i, c] - m)
                s = s + resp[i, c]
            for c in range(C):
                resp[i, c] = resp[i, c] / s
            lse[i] = m + log(s)


def weighted_sqdist(double[:, ::1] X, double[:, ::1] means, double[:, ::1] W,
                    double[::1] out):
    cdef Py_ssize_t n = X.shape[0], D = X.shape[1], C = means.shape[0]
    cdef Py_ssize_t i, c, r
    cdef double acc, diff, tot
    with nogil:
        for c in prange(C, schedule='static'):
            tot = 0.0
            for i in range(n):
                acc = 0.0
                for r in range(D):
                    diff = X[i, r] - means[c, r]
                    acc = acc + diff * diff
                tot = tot + W[i, c] * acc
            out[c] = tot
