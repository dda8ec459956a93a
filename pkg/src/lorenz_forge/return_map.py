"""First-return maps ``T_ij = T21 . T02^j . T12 . T01^i`` on ``Pi1^+``.

Besides the physical coordinates ``(x1, x2, y)`` on ``Pi1^+`` a *cross
chart* ``(xi, w)`` is used: ``xi = x - x_plus`` and ``w`` is the distance of
the orbit's ``j``-th iterate near ``O2`` from ``v_minus``. The chart straightens
the thin admissible strip into an O(1) box and is the coordinate in which
the rescaling is done. Everything here is written for generic scalars;
pass mpfr points (inside :func:`lorenz_forge._mp.precision`) to get
extended-precision results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
import numpy as np

from . import _mp
from .errors import ChartExit, ComputationError, DomainError
from .hetero_model import (
    T12_jacobian,
    T21_jacobian,
    _matmul,
    apply_T12,
    apply_T21,
)

STAGES = ("T01^i", "T12", "T02^j", "T21")


@dataclass(frozen=True, order=True)
class ReturnIndex:
    """Iteration counts near ``O1`` (i) and ``O2`` (j)."""

    i: int
    j: int

    def __post_init__(self):
        if int(self.i) != self.i or int(self.j) != self.j or self.i < 1 or self.j < 1:
            raise DomainError(f"return index needs integers i, j >= 1, got ({self.i}, {self.j})")

    def __iter__(self):
        return iter((self.i, self.j))


@dataclass(frozen=True)
class AdmissibleWindow:
    """Where a single-round orbit with index ``(i, j)`` can start.

    ``y_interval`` bounds ``y`` on ``Pi1^+``; ``v_interval`` bounds ``v`` on
    ``Pi2^+``; ``x_box`` is the ``x`` range of ``Pi1^+``.
    """

    y_interval: tuple[float, float]
    v_interval: tuple[float, float]
    x_box: tuple[tuple[float, float], tuple[float, float]]
    i0: int
    j0: int

    @property
    def y_width(self) -> float:
        return self.y_interval[1] - self.y_interval[0]


def _scaled_interval(center, r, scale):
    lo, hi = (center - r) * scale, (center + r) * scale
    return (min(lo, hi), max(lo, hi))


def _intersect(a, b):
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, hi) if lo <= hi else None


def _i_ok(model, i):
    r = model.chart_radius
    g1 = model.spectrum1.expanding
    l1, l2 = model.spectrum1.contracting
    xp = model.t21.x_plus
    if _intersect(_scaled_interval(model.t12.y_minus, r, g1**-i), (-r, r)) is None:
        return False
    return l1**i * (abs(xp[0]) + r) <= r and l2**i * (abs(xp[1]) + r) <= r


def _j_ok(model, j):
    r = model.chart_radius
    g2 = model.spectrum2.expanding
    n1, n2 = model.spectrum2.contracting
    up = model.t12.u_plus
    if _intersect(_scaled_interval(model.t21.v_minus, r, g2**-j), (-r, r)) is None:
        return False
    return n1**j * (abs(up[0]) + r) <= r and n2**j * (abs(up[1]) + r) <= r


def minimal_indices(model, limit=10_000) -> tuple[int, int]:
    """Smallest ``(i0, j0)`` for which both windows are nonempty."""
    i0 = next((i for i in range(1, limit) if _i_ok(model, i)), None)
    j0 = next((j for j in range(1, limit) if _j_ok(model, j)), None)
    if i0 is None or j0 is None:
        raise DomainError("no admissible index below the search limit")
    return i0, j0


def admissible_window(model, idx: ReturnIndex) -> AdmissibleWindow:
    """Admissible window of the return map with index ``idx``.

    Raises
    ------
    DomainError
        If ``idx`` is below ``(i0, j0)`` ("index too small for chart radii").
    """
    i, j = idx
    r = model.chart_radius
    i0, j0 = minimal_indices(model)
    if i < i0 or j < j0:
        raise DomainError(f"index ({i}, {j}) too small for chart radii; need i >= {i0}, j >= {j0}")
    y_int = _intersect(_scaled_interval(model.t12.y_minus, r, model.spectrum1.expanding**-i), (-r, r))
    v_int = _intersect(_scaled_interval(model.t21.v_minus, r, model.spectrum2.expanding**-j), (-r, r))
    xp = model.t21.x_plus
    x_box = ((xp[0] - r, xp[0] + r), (xp[1] - r, xp[1] + r))
    return AdmissibleWindow(y_int, v_int, x_box, i0, j0)


def precision_bits(model, idx: ReturnIndex, guard=128) -> int:
    """mpfr precision adequate for the return map with index ``idx``."""
    i, j = idx
    g1, g2 = model.spectrum1.expanding, model.spectrum2.expanding
    l2 = model.spectrum1.contracting[1]
    n2 = model.spectrum2.contracting[1]
    return _mp.working_precision(
        2 * i * math.log2(g1), 2 * j * math.log2(g2), i * math.log2(l2), j * math.log2(n2), guard=guard
    )


# ----------------------------------------------------------------------------
# composition


def _check(center, p, r, stage):
    for c, v in zip(center, p):
        if not abs(v - c) <= r:
            raise ChartExit(stage, f"orbit left the chart ({float(v):.6g} vs center {float(c):.6g}, radius {r})")


def compose_stages(model, idx: ReturnIndex, point, check=True):
    """All intermediate points of one return: ``[p, T01^i p, T12 .., T02^j .., T21 ..]``."""
    i, j = idx
    r = model.chart_radius
    xp = model.t21.x_plus
    if check:
        _check((xp[0], xp[1], 0.0), point, r, "Pi1^+")
    p1 = model.spectrum1.iterate(i, tuple(point))
    if check:
        _check((0.0, 0.0, model.t12.y_minus), p1, r, "T01^i")
    p2 = apply_T12(model, p1, check=False)
    if check:
        up = model.t12.u_plus
        _check((up[0], up[1], 0.0), p2, r, "T12")
    p3 = model.spectrum2.iterate(j, p2)
    if check:
        _check((0.0, 0.0, model.t21.v_minus), p3, r, "T02^j")
    p4 = apply_T21(model, p3, check=False)
    if check:
        _check((xp[0], xp[1], 0.0), p4, r, "T21")
    return [tuple(point), p1, p2, p3, p4]


def compose(model, idx: ReturnIndex, point, check=True):
    """``T_ij(point)``; every intermediate point is checked against its chart.

    Raises
    ------
    ChartExit
        Naming the stage (``T01^i``, ``T12``, ``T02^j``, ``T21``) whose output
        left its chart, or ``Pi1^+`` for a bad starting point.
    """
    return compose_stages(model, idx, point, check)[-1]


def return_jacobian(model, idx: ReturnIndex, point) -> np.ndarray:
    """Chain-rule differential of :func:`compose` at ``point``.

    Returns a float array for float input and an object array of mpfr for
    mpfr input.
    """
    i, j = idx
    p0, p1, p2, p3, _ = compose_stages(model, idx, point, check=False)
    m = model.spectrum1.iterate_jacobian(i, p0)
    m = _matmul(T12_jacobian(model, p1), m)
    m = _matmul(model.spectrum2.iterate_jacobian(j, p2), m)
    m = _matmul(T21_jacobian(model, p3), m)
    dtype = object if _mp.is_mp(point[0]) else float
    return np.array(m, dtype=dtype)


def jacobian_product(model, idx: ReturnIndex):
    """``J12 J21 J1^i J2^j``, evaluated as a log-sum in double precision."""
    i, j = idx
    j12, j21 = model.t12.det, model.t21.det
    sign = math.copysign(1.0, j12 * j21)
    return sign * math.exp(
        math.log(abs(j12 * j21)) + i * math.log(model.spectrum1.jacobian) + j * math.log(model.spectrum2.jacobian)
    )


# ----------------------------------------------------------------------------
# cross chart


def _t12_after(model, i, x, y):
    p1 = model.spectrum1.iterate(i, (x[0], x[1], y))
    return p1, apply_T12(model, p1, check=False)


def physical_to_cross(model, idx: ReturnIndex, point):
    """``(x, y) -> (xi, w)`` with ``w = gamma2^j v(T12 T01^i (x, y)) - v_minus``."""
    i, j = idx
    xp = model.t21.x_plus
    _, p2 = _t12_after(model, i, point[:2], point[2])
    g = _pow_like(model.spectrum2.expanding, j, point[2])
    if model.spectrum2.has_cubic:
        v3 = model.spectrum2.iterate(j, p2)[2]
    else:
        v3 = g * p2[2]
    return (point[0] - xp[0], point[1] - xp[1], v3 - model.t21.v_minus)


def _pow_like(base, k, like):
    if _mp.is_mp(like):
        return gmpy2.mpfr(base) ** k
    return base**k


def cross_to_physical(model, idx: ReturnIndex, xiw, tol=None, max_iter=60):
    """Inverse of :func:`physical_to_cross` (Newton in ``y``)."""
    i, j = idx
    xi1, xi2, w = xiw
    xp = model.t21.x_plus
    x = (xp[0] + xi1, xp[1] + xi2)
    g1i = _pow_like(model.spectrum1.expanding, i, w)
    # linear first guess from v = c . L x + d (gamma1^i y - y_minus)
    l1, l2 = model.spectrum1.contracting
    lx = (_pow_like(l1, i, w) * x[0], _pow_like(l2, i, w) * x[1])
    v_target = (w + model.t21.v_minus) / _pow_like(model.spectrum2.expanding, j, w)
    t = model.t12
    y = ((v_target - t.c[0] * lx[0] - t.c[1] * lx[1]) / t.d + t.y_minus) / g1i
    if not (t.has_quad or model.spectrum1.has_cubic or model.spectrum2.has_cubic):
        return (x[0], x[1], y)
    if tol is None:
        tol = 2.0 ** (-(w.precision - 8)) if _mp.is_mp(w) else 4e-16
    for _ in range(max_iter):
        res = physical_to_cross(model, idx, (x[0], x[1], y))[2] - w
        jac = return_cross_jacobian_column(model, idx, (x[0], x[1], y))
        dy = res / jac
        y = y - dy
        if abs(dy) <= tol * abs(y):
            return (x[0], x[1], y)
    raise ComputationError("cross-chart inversion did not converge", [float(y)])


def return_cross_jacobian_column(model, idx, point):
    """``dw/dy`` of the cross chart at a physical point."""
    return _chart_jacobian(model, idx, point)[2][2]


def _chart_jacobian(model, idx, point):
    """Differential of ``(x, y) -> (xi, w)``."""
    i, j = idx
    p0 = tuple(point)
    p1 = model.spectrum1.iterate(i, p0)
    m = model.spectrum1.iterate_jacobian(i, p0)
    m = _matmul(T12_jacobian(model, p1), m)
    p2 = apply_T12(model, p1, check=False)
    m = _matmul(model.spectrum2.iterate_jacobian(j, p2), m)
    one = 1.0 + 0.0 * point[0]
    zero = 0.0 * point[0]
    return [[one, zero, zero], [zero, one, zero], list(m[2])]


def cross_map(model, idx: ReturnIndex, xiw, check=True):
    """The return map in the cross chart."""
    p = cross_to_physical(model, idx, xiw)
    return physical_to_cross(model, idx, compose(model, idx, p, check))


def cross_jacobian(model, idx: ReturnIndex, xiw):
    """Differential of :func:`cross_map` (nested lists, scalar type of input)."""
    p = cross_to_physical(model, idx, xiw)
    out = compose(model, idx, p, check=False)
    d_in = _chart_jacobian(model, idx, p)
    d_out = _chart_jacobian(model, idx, out)
    dt = return_jacobian(model, idx, p).tolist()
    # inverse of the input chart differential: identity rows plus a last row
    a, b, c = d_in[2]
    inv = [[1 + 0 * c, 0 * c, 0 * c], [0 * c, 1 + 0 * c, 0 * c], [-a / c, -b / c, 1 / c]]
    return _matmul(d_out, _matmul(dt, inv))


def window_point(model, idx: ReturnIndex, s):
    """Physical point at unit coordinates ``s`` in ``[-1, 1]^3`` of the window.

    ``s[0], s[1]`` span the ``x`` box and ``s[2]`` spans the ``v`` window.
    """
    admissible_window(model, idx)
    r = model.chart_radius
    xi = (s[0] * r, s[1] * r)
    w = s[2] * r
    if _mp.is_mp(s[2]):
        xi = tuple(gmpy2.mpfr(v) for v in xi)
        w = gmpy2.mpfr(w)
    return cross_to_physical(model, idx, (xi[0], xi[1], w))


# ----------------------------------------------------------------------------
# fixed points


def find_fixed_point(model, idx: ReturnIndex, guess=None, tol=1e-12, max_iter=100, damping=0.5):
    """Single-round fixed point of ``T_ij`` by damped Newton in the cross chart.

    The iteration starts at the window center unless ``guess`` (cross-chart
    coordinates) is given; a step that does not decrease the residual is
    halved (factor ``damping``) up to 30 times. Computed in extended
    precision; returns ``(physical_point, cross_point)`` as mpfr tuples.

    Raises
    ------
    ComputationError
        With the residual history when Newton fails.
    """
    admissible_window(model, idx)
    bits = precision_bits(model, idx)
    trace = []
    with _mp.precision(bits):
        z = [gmpy2.mpfr(v) for v in (guess if guess is not None else (0.0, 0.0, 0.0))]

        def resid(zz):
            out = cross_map(model, idx, zz, check=False)
            return [out[k] - zz[k] for k in range(3)]

        f = resid(z)
        err = max(abs(v) for v in f)
        for _ in range(max_iter):
            trace.append(float(err))
            if err < tol:
                p = cross_to_physical(model, idx, z)
                compose(model, idx, p)  # confirm the orbit stays in every chart
                return p, tuple(z)
            jac = cross_jacobian(model, idx, z)
            a = [[jac[r][c] - (1 if r == c else 0) for c in range(3)] for r in range(3)]
            try:
                step = _mp.solve3(a, [-v for v in f])
            except ZeroDivisionError:
                break
            t = gmpy2.mpfr(1)
            for _k in range(30):
                cand = [z[k] + t * step[k] for k in range(3)]
                f_new = resid(cand)
                e_new = max(abs(v) for v in f_new)
                if e_new < err:
                    break
                t *= damping
            z, f, err = cand, f_new, e_new
    raise ComputationError(f"fixed point of T_{idx.i},{idx.j} not found", trace)
