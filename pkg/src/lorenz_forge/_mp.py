"""Extended-precision helpers built on gmpy2's mpfr.

The first-return map multiplies quantities of size gamma^i by quantities of
size lambda^i, and the rescaled parameters are differences of nearly equal
numbers amplified by the square of the expansion. Double precision cannot
resolve them, so the return-map code is written generically (plain
arithmetic on whatever number type it is handed) and evaluated in mpfr with
a precision chosen from the index pair.
"""

from __future__ import annotations

import gmpy2
import numpy as np

MPFR = type(gmpy2.mpfr(0))


def working_precision(*log2_magnitudes, guard=128) -> int:
    """Bits needed to survive cancellations of the given binary magnitudes."""
    return int(guard + sum(abs(m) for m in log2_magnitudes)) + 1


def precision(bits: int):
    """Context manager setting the mpfr working precision for this thread."""
    return gmpy2.context(gmpy2.get_context(), precision=int(bits))


def is_mp(x) -> bool:
    return isinstance(x, MPFR)


def mp(x):
    """Convert to mpfr at the current precision (floats convert exactly)."""
    return gmpy2.mpfr(x)


def to_float(x) -> float:
    return float(x)


def mp_vec(values):
    return [mp(v) for v in values]


def as_object_matrix(rows) -> np.ndarray:
    return np.array([[mp(v) for v in row] for row in rows], dtype=object)


def det3(m) -> object:
    """Cofactor expansion; works for any scalar type, including mpfr."""
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def solve3(m, rhs):
    """Cramer's rule for a 3x3 system in the scalar type of the inputs."""
    d = det3(m)
    if d == 0:
        raise ZeroDivisionError("singular 3x3 system")
    out = []
    for k in range(3):
        mk = [list(row) for row in m]
        for r in range(3):
            mk[r][k] = rhs[r]
        out.append(det3(mk) / d)
    return out


def mp_str(x) -> str:
    """Lossless decimal string of an mpfr (or float) value."""
    if is_mp(x):
        return str(x)
    return repr(float(x))
