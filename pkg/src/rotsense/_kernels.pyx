# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels: fused per-pair distance and ratio loops.

Semantics match the numpy implementations in ``rotsense.kernels``; each
element is evaluated with the same operation order, so the two backends
agree to a few ulps.
"""

from libc.math cimport atan2, cos, sin, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF DEGENERATE_EPS = 1e-12
cdef double NAN_VALUE = float("nan")


cdef inline void _exp_to_quat_one(const double* s, double* q) nogil:
    cdef double t = sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2])
    cdef double k = sin(0.5 * t) / t if t > 0.0 else 0.0
    q[0] = cos(0.5 * t)
    q[1] = k * s[0]
    q[2] = k * s[1]
    q[3] = k * s[2]


cdef inline double _dist_exp_one(const double* a, const double* b) nogil:
    # Chord form of 2*acos(|qa . qb|) on the corresponding quaternions.
    cdef double qa[4]
    cdef double qb[4]
    _exp_to_quat_one(a, qa)
    _exp_to_quat_one(b, qb)
    return _dist_quat_one(qa, qb)


cdef inline double _dist_quat_one(const double* a, const double* b) nogil:
    # Chord form of 2*acos(|a . b|) on the sign-canonicalized pair.
    cdef double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
    cdef double sign = -1.0 if dot < 0.0 else 1.0
    cdef double d0, d1, d2, d3, s0, s1, s2, s3, dn, sn
    d0 = sign * b[0] - a[0]
    d1 = sign * b[1] - a[1]
    d2 = sign * b[2] - a[2]
    d3 = sign * b[3] - a[3]
    s0 = sign * b[0] + a[0]
    s1 = sign * b[1] + a[1]
    s2 = sign * b[2] + a[2]
    s3 = sign * b[3] + a[3]
    dn = sqrt(d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3)
    sn = sqrt(s0 * s0 + s1 * s1 + s2 * s2 + s3 * s3)
    return 4.0 * atan2(dn, sn)


def dist_exp_batch(const double[:, ::1] s1, const double[:, ::1] s2):
    cdef Py_ssize_t n = s1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            o[i] = _dist_exp_one(&s1[i, 0], &s2[i, 0])
    return out


def dist_quat_batch(const double[:, ::1] q1, const double[:, ::1] q2):
    cdef Py_ssize_t n = q1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            o[i] = _dist_quat_one(&q1[i, 0], &q2[i, 0])
    return out


def ratio_exp_batch(const double[:, ::1] s1, const double[:, ::1] s2):
    cdef Py_ssize_t n = s1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i
    cdef double dx, dy, dz, euclid
    with nogil:
        for i in range(n):
            dx = s2[i, 0] - s1[i, 0]
            dy = s2[i, 1] - s1[i, 1]
            dz = s2[i, 2] - s1[i, 2]
            euclid = sqrt(dx * dx + dy * dy + dz * dz)
            if euclid < DEGENERATE_EPS:
                o[i] = NAN_VALUE
            else:
                o[i] = _dist_exp_one(&s1[i, 0], &s2[i, 0]) / euclid
    return out


def ratio_quat_batch(const double[:, ::1] q1, const double[:, ::1] q2):
    cdef Py_ssize_t n = q1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t i, j
    cdef double euclid, n1, n2, d
    cdef double u1[4]
    cdef double u2[4]
    with nogil:
        for i in range(n):
            euclid = 0.0
            n1 = 0.0
            n2 = 0.0
            for j in range(4):
                d = q2[i, j] - q1[i, j]
                euclid += d * d
                n1 += q1[i, j] * q1[i, j]
                n2 += q2[i, j] * q2[i, j]
            euclid = sqrt(euclid)
            if euclid < DEGENERATE_EPS:
                o[i] = NAN_VALUE
                continue
            n1 = sqrt(n1)
            n2 = sqrt(n2)
            for j in range(4):
                u1[j] = q1[i, j] / n1
                u2[j] = q2[i, j] / n2
            o[i] = _dist_quat_one(u1, u2) / euclid
    return out
