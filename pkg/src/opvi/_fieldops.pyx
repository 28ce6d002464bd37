# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pairwise particle kernels; see _fieldops_py for the contract."""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

BACKEND = "compiled"


def pairwise_sq_dists(x):
    """Squared Euclidean distances between all rows of x, shape (n, n)."""
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1]
    out_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, c
    cdef double acc, diff
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for c in range(d):
                diff = xv[i, c] - xv[j, c]
                acc += diff * diff
            out[i, j] = acc
            out[j, i] = acc
    return out_arr


def rbf_field(x, scores, double h, double gamma):
    """Kernel-smoothed vector field over an ensemble.

    out[i] = (1/n) * sum_j K(x_j, x_i) * (scores[j] + gamma * (-2/h) * (x_j - x_i))
    """
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] sv = np.ascontiguousarray(scores, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], d = xv.shape[1]
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, c
    cdef double sq, k, diff, coef = -2.0 * gamma / h
    for i in range(n):
        for j in range(n):
            sq = 0.0
            for c in range(d):
                diff = xv[j, c] - xv[i, c]
                sq += diff * diff
            k = exp(-sq / h)
            for c in range(d):
                out[i, c] += k * (sv[j, c] + coef * (xv[j, c] - xv[i, c]))
        for c in range(d):
            out[i, c] /= n
    return out_arr


def energy_stats(a, b):
    """V-statistic distance means between two point sets."""
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t na = av.shape[0], nb = bv.shape[0], d = av.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double acc, diff
    cdef double cross = 0.0, wa = 0.0, wb = 0.0
    for i in range(na):
        for j in range(nb):
            acc = 0.0
            for c in range(d):
                diff = av[i, c] - bv[j, c]
                acc += diff * diff
            cross += sqrt(acc)
    for i in range(na):
        for j in range(i + 1, na):
            acc = 0.0
            for c in range(d):
                diff = av[i, c] - av[j, c]
                acc += diff * diff
            wa += 2.0 * sqrt(acc)
    for i in range(nb):
        for j in range(i + 1, nb):
            acc = 0.0
            for c in range(d):
                diff = bv[i, c] - bv[j, c]
                acc += diff * diff
            wb += 2.0 * sqrt(acc)
    return cross / (na * nb), wa / (<double>na * na), wb / (<double>nb * nb)
