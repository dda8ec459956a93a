"""Pure-Python versions of the 3D Henon inner loops.

These mirror ``_kernels.pyx`` operation for operation so that both backends
produce bit-identical floats (same evaluation order, no fused multiply-add).
"""

import math

ESCAPED = 1
NONFINITE = 2


def _escaped(x, y, z, radius):
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
        return NONFINITE
    if abs(x) > radius or abs(y) > radius or abs(z) > radius:
        return ESCAPED
    return 0


def iterate(m1, m2, b, x, y, z, n, radius):
    """Advance ``n`` steps; stop early on escape.

    Returns ``(x, y, z, steps_done, flag)`` where ``flag`` is 0, ESCAPED or
    NONFINITE.
    """
    flag = 0
    k = 0
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


def first_return(m1, m2, b, x, y, z, qmax, tol):
    """Smallest q <= qmax with max-norm |f^q(s) - s| < tol, else 0."""
    x0, y0, z0 = x, y, z
    for q in range(1, qmax + 1):
        znew = m1 + b * x + m2 * y - z * z
        x = y
        y = z
        z = znew
        if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
            return 0
        d = abs(x - x0)
        e = abs(y - y0)
        if e > d:
            d = e
        e = abs(z - z0)
        if e > d:
            d = e
        if d < tol:
            return q
    return 0


def lyapunov(m1, m2, b, x, y, z, n, radius, n_mark, basis):
    """Tangent-map products with Gram-Schmidt reorthonormalisation each step.

    Returns ``(s1, s2, s3, m1s, m2s, m3s, steps_done, flag, x, y, z)``: the
    accumulated log-stretch sums after ``steps_done`` steps, the same sums
    at step ``n_mark`` and the final state. A column that collapses to zero
    length contributes ``-inf`` and is replaced by the cross product of the
    other two. ``basis`` is the initial orthonormal frame, 9 floats in
    column-major order.
    """
    a11, a21, a31, a12, a22, a32, a13, a23, a33 = basis
    s1 = s2 = s3 = 0.0
    k1 = k2 = k3 = 0.0
    flag = 0
    k = 0
    while k < n:
        # J = [[0,1,0],[0,0,1],[b,m2,-2z]] at the current point
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

        r = math.sqrt(v11 * v11 + v21 * v21 + v31 * v31)
        if r > 0.0:
            s1 += math.log(r)
            a11 = v11 / r
            a21 = v21 / r
            a31 = v31 / r
        else:
            s1 = -math.inf
            a11, a21, a31 = 1.0, 0.0, 0.0

        p = a11 * v12 + a21 * v22 + a31 * v32
        v12 = v12 - p * a11
        v22 = v22 - p * a21
        v32 = v32 - p * a31
        r = math.sqrt(v12 * v12 + v22 * v22 + v32 * v32)
        if r > 0.0:
            s2 += math.log(r)
            a12 = v12 / r
            a22 = v22 / r
            a32 = v32 / r
        else:
            # q2 := q1 x q3(old), already unit length up to rounding
            s2 = -math.inf
            v12 = a21 * a33 - a31 * a23
            v22 = a31 * a13 - a11 * a33
            v32 = a11 * a23 - a21 * a13
            r = math.sqrt(v12 * v12 + v22 * v22 + v32 * v32)
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
        r = math.sqrt(v13 * v13 + v23 * v23 + v33 * v33)
        if r > 0.0:
            s3 += math.log(r)
            a13 = v13 / r
            a23 = v23 / r
            a33 = v33 / r
        else:
            s3 = -math.inf
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
