# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled 3D Henon inner loops; see ``_kernels_py`` for the reference."""

from libc.math cimport sqrt, log, fabs, isfinite, INFINITY

cdef enum:
    ESCAPED = 1
    NONFINITE = 2


cdef inline int _escaped(double x, double y, double z, double radius) nogil:
    if not (isfinite(x) and isfinite(y) and isfinite(z)):
        return NONFINITE
    if fabs(x) > radius or fabs(y) > radius or fabs(z) > radius:
        return ESCAPED
    return 0


def iterate(double m1, double m2, double b, double x, double y, double z,
            long n, double radius):
    cdef long k = 0
    cdef int flag = 0
    cdef double znew
    with nogil:
        while k < n:
            znew = m1 + b * x + m2 * y - z * z
            x = y
            y = z
            z = znew
            k += 1
            flag = _escaped(x, y, z, radius)
            if flag:
                break
    return x, y, z, k, flag


def first_return(double m1, double m2, double b, double x, double y, double z,
                 long qmax, double tol):
    cdef double x0 = x, y0 = y, z0 = z, znew, d, e
    cdef long q
    for q in range(1, qmax + 1):
        znew = m1 + b * x + m2 * y - z * z
        x = y
        y = z
        z = znew
        if not (isfinite(x) and isfinite(y) and isfinite(z)):
            return 0
        d = fabs(x - x0)
        e = fabs(y - y0)
        if e > d:
            d = e
        e = fabs(z - z0)
        if e > d:
            d = e
        if d < tol:
            return q
    return 0


def lyapunov(double m1, double m2, double b, double x, double y, double z,
             long n, double radius, long n_mark, basis):
    cdef double a11, a21, a31, a12, a22, a32, a13, a23, a33
    a11, a21, a31, a12, a22, a32, a13, a23, a33 = basis
    cdef double v11, v21, v31, v12, v22, v32, v13, v23, v33
    cdef double s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef double k1 = 0.0, k2 = 0.0, k3 = 0.0
    cdef double c, r, p, znew
    cdef int flag = 0
    cdef long k = 0
    with nogil:
        while k < n:
            c = -2.0 * z
            v11 = a21
            v21 = a31
            v31 = b * a11 + m2 * a21 + c * a31
            v12 = a22
            v22 = a32
            v32 = b * a12 + m2 * a22 + c * a32
            v13 = a23
            v23 = a33
            v33 = b * a13 + m2 * a23 + c * a33

            znew = m1 + b * x + m2 * y - z * z
            x = y
            y = z
            z = znew

            r = sqrt(v11 * v11 + v21 * v21 + v31 * v31)
            if r > 0.0:
                s1 += log(r)
                a11 = v11 / r
                a21 = v21 / r
                a31 = v31 / r
            else:
                s1 = -INFINITY
                a11 = 1.0
                a21 = 0.0
                a31 = 0.0

            p = a11 * v12 + a21 * v22 + a31 * v32
            v12 = v12 - p * a11
            v22 = v22 - p * a21
            v32 = v32 - p * a31
            r = sqrt(v12 * v12 + v22 * v22 + v32 * v32)
            if r > 0.0:
                s2 += log(r)
                a12 = v12 / r
                a22 = v22 / r
                a32 = v32 / r
            else:
                s2 = -INFINITY
                v12 = a21 * a33 - a31 * a23
                v22 = a31 * a13 - a11 * a33
                v32 = a11 * a23 - a21 * a13
                r = sqrt(v12 * v12 + v22 * v22 + v32 * v32)
                a12 = v12 / r
                a22 = v22 / r
                a32 = v32 / r

            p = a11 * v13 + a21 * v23 + a31 * v33
            v13 = v13 - p * a11
            v23 = v23 - p * a21
            v33 = v33 - p * a31
            p = a12 * v13 + a22 * v23 + a32 * v33
            v13 = v13 - p * a12
            v23 = v23 - p * a22
            v33 = v33 - p * a32
            r = sqrt(v13 * v13 + v23 * v23 + v33 * v33)
            if r > 0.0:
                s3 += log(r)
                a13 = v13 / r
                a23 = v23 / r
                a33 = v33 / r
            else:
                s3 = -INFINITY
                a13 = a21 * a32 - a31 * a22
                a23 = a31 * a12 - a11 * a32
                a33 = a11 * a22 - a21 * a12

            k += 1
            if k == n_mark:
                k1 = s1
                k2 = s2
                k3 = s3
            flag = _escaped(x, y, z, radius)
            if flag:
                break
    return s1, s2, s3, k1, k2, k3, k, flag, x, y, z
