# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the dense Green's-function assemblies."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sqrt, sin, cos, M_PI

cnp.import_array()


cdef inline double complex _green(double dx, double dy, double dz, double k) noexcept nogil:
    cdef double d = sqrt(dx * dx + dy * dy + dz * dz)
    cdef double s = 1.0 / (4.0 * M_PI * d)
    cdef double kd = k * d
    return cos(kd) * s + 1j * (sin(kd) * s)


def green_matrix(const double[:, ::1] src, const double[:, ::1] obs, double k, int num_threads=1):
    cdef Py_ssize_t n_obs = obs.shape[0], n_src = src.shape[0]
    cdef Py_ssize_t i, j
    out = np.empty((n_obs, n_src), dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    for i in prange(n_obs, nogil=True, num_threads=num_threads, schedule="static"):
        for j in range(n_src):
            o[i, j] = _green(obs[i, 0] - src[j, 0], obs[i, 1] - src[j, 1], obs[i, 2] - src[j, 2], k)
    return out


def foldy_lax_operator(const double[:, ::1] points, const double complex[::1] tau, double k, int num_threads=1):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t i, j
    out = np.empty((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] a = out
    for i in prange(n, nogil=True, num_threads=num_threads, schedule="static"):
        for j in range(n):
            if i == j:
                a[i, j] = 1.0
            else:
                a[i, j] = -_green(points[i, 0] - points[j, 0], points[i, 1] - points[j, 1],
                                  points[i, 2] - points[j, 2], k) * tau[j]
    return out
