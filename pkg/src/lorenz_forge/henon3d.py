"""The 3D Henon map ``(x, y, z) -> (y, z, M1 + B x + M2 y - z^2)``.

Evaluation, fixed points and their multipliers, the parameter point with
multipliers (-1, -1, +1), Lyapunov spectra and attractor classification.
Long orbits run in :mod:`lorenz_forge.kernels` (compiled when available).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .dynamics import (
    INITIAL_FRAME,
    AttractorReport,
    Budget,
    LyapunovSpectrum,
    Tag,
    classify_spectrum,
    refine_cycle,
    spectrum_from_sums,
)
from .errors import ComputationError, DomainError, OrbitEscape


@dataclass(frozen=True)
class Henon3DParams:
    """Parameters ``(M1, M2, B)``; ``b`` is the constant Jacobian determinant."""

    m1: float
    m2: float
    b: float

    def __post_init__(self):
        for name in ("m1", "m2", "b"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)

    def as_tuple(self):
        return (self.m1, self.m2, self.b)


class State3(NamedTuple):
    x: float
    y: float
    z: float


def henon_step(s, p: Henon3DParams) -> State3:
    x, y, z = s
    return State3(y, z, p.m1 + p.b * x + p.m2 * y - z * z)


def henon_jacobian(s, p: Henon3DParams) -> np.ndarray:
    return np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [p.b, p.m2, -2.0 * s[2]]])


def henon_fixed_points(p: Henon3DParams) -> list[State3]:
    """Diagonal fixed points, roots of ``x^2 + (1 - B - M2) x - M1 = 0``.

    A double root is returned once. Roots are computed in the cancellation-
    free form and polished with one Newton step.
    """
    c = 1.0 - p.b - p.m2
    disc = c * c + 4.0 * p.m1
    if disc < 0.0:
        return []
    if disc == 0.0:
        roots = [-c / 2.0]
    else:
        sq = math.sqrt(disc)
        big = -(c + math.copysign(sq, c)) / 2.0
        roots = [big, -p.m1 / big] if big != 0.0 else [0.5 * (-c + sq), 0.5 * (-c - sq)]
    out = []
    for r in sorted(roots):
        d = 2.0 * r + c
        if d != 0.0:
            r -= (r * r + c * r - p.m1) / d
        out.append(State3(r, r, r))
    return out


def default_seed(p: Henon3DParams) -> State3:
    """Largest diagonal fixed point shifted by 1e-3, or the origin."""
    fps = henon_fixed_points(p)
    if not fps:
        return State3(0.0, 0.0, 0.0)
    x = fps[-1].x + 1e-3
    return State3(x, x, x)


def multipliers(p: Henon3DParams, fp, tol=1e-9) -> np.ndarray:
    """Eigenvalues of the differential at a fixed point.

    Roots of ``rho^3 + 2 z rho^2 - M2 rho - B``; sorted by decreasing
    modulus. Raises :class:`DomainError` if ``fp`` is not fixed.
    """
    img = henon_step(fp, p)
    scale = 1.0 + max(abs(v) for v in fp)
    if max(abs(a - b) for a, b in zip(img, fp)) > tol * scale:
        raise DomainError(f"{tuple(fp)} is not a fixed point of {p}")
    rho = _char_roots(2.0 * fp[2], -p.m2, -p.b)
    return rho[np.argsort(-np.abs(rho), kind="stable")]


def _char_roots(a2, a1, a0) -> np.ndarray:
    """Roots of ``rho^3 + a2 rho^2 + a1 rho + a0``.

    A companion-matrix eigensolver loses half the digits at a double root,
    which is exactly the situation at the codim-3 point. Instead the best
    conditioned real root is polished by Newton and deflated, and the
    remaining quadratic is solved in closed form.
    """
    def poly(r):
        return ((r + a2) * r + a1) * r + a0

    def dpoly(r):
        return (3.0 * r + 2.0 * a2) * r + a1

    if a0 == 0.0:
        r1 = 0.0
    else:
        coeffs = np.roots([1.0, a2, a1, a0])
        real = [float(r.real) for r in coeffs if abs(r.imag) <= 1e-6 * (1.0 + abs(r))]
        if not real:
            real = [float(coeffs[np.argmin(np.abs(coeffs.imag))].real)]
        r1 = max(real, key=lambda r: abs(dpoly(r)))
        for _ in range(4):
            d = dpoly(r1)
            if d == 0.0:
                break
            r1 -= poly(r1) / d
    # quotient rho^2 + p rho + q after dividing out (rho - r1)
    pq = a2 + r1
    q = a1 + r1 * pq
    disc = complex(pq * pq - 4.0 * q)
    sq = disc ** 0.5
    big = -(pq + (sq if pq >= 0 else -sq)) / 2.0
    r2, r3 = (big, q / big) if big != 0 else (sq / 2.0, -sq / 2.0)
    return np.array([complex(r1), complex(r2), complex(r3)])


def find_codim3_point(tol=1e-13, max_iter=50, start=(0.0, 0.0, 0.0, 0.0)):
    """Parameters with a fixed point whose multipliers are (-1, -1, +1).

    Newton on the unknowns ``(M1, M2, B, z)``: the characteristic
    polynomial ``rho^3 + 2z rho^2 - M2 rho - B`` must equal
    ``(rho + 1)^2 (rho - 1)`` and ``z`` must solve the diagonal fixed-point
    equation. Returns ``(params, fixed_point)``.
    """
    target = np.array([1.0, -1.0, -1.0])  # coefficients of rho^2, rho, 1

    def residual(u):
        m1, m2, b, z = u
        return np.array(
            [
                2.0 * z - target[0],
                -m2 - target[1],
                -b - target[2],
                z * z + (1.0 - b - m2) * z - m1,
            ]
        )

    def jac(u):
        m1, m2, b, z = u
        return np.array(
            [
                [0.0, 0.0, 0.0, 2.0],
                [0.0, -1.0, 0.0, 0.0],
                [0.0, 0.0, -1.0, 0.0],
                [-1.0, -z, -z, 2.0 * z + 1.0 - b - m2],
            ]
        )

    u = np.array(start, dtype=float)
    trace = []
    for _ in range(max_iter):
        r = residual(u)
        err = float(np.max(np.abs(r)))
        trace.append((tuple(float(v) for v in u), err))
        if err < tol:
            m1, m2, b, z = (float(v) for v in u)
            return Henon3DParams(m1, m2, b), State3(z, z, z)
        try:
            u = u - np.linalg.solve(jac(u), r)
        except np.linalg.LinAlgError:
            break
    raise ComputationError("codim-3 Newton did not converge", trace)


def lyapunov_spectrum(p: Henon3DParams, s0, n_transient=10_000, n_iterates=1_000_000,
                      escape_radius=100.0) -> LyapunovSpectrum:
    """Lyapunov exponents of the orbit of ``s0``.

    Tangent vectors are reorthonormalised after every iterate. With
    ``B == 0`` the differential is singular, the third exponent is reported
    as ``-inf`` and the volume check does not apply.

    Raises
    ------
    OrbitEscape
        If the orbit leaves the escape radius (the DivergedToInfinity case).
    """
    if n_iterates < 1000:
        raise DomainError("n_iterates must be at least 1000")
    x, y, z = (float(v) for v in s0)
    x, y, z, k, flag = kernels.iterate(p.m1, p.m2, p.b, x, y, z, int(n_transient), escape_radius)
    if flag:
        raise OrbitEscape(f"orbit escaped during transient at iterate {k}", k)
    return _measure(p, (x, y, z), n_transient, n_iterates, escape_radius)[0]


def _measure(p, s, n_transient, n, radius):
    n_mark = int(0.9 * n)
    out = kernels.lyapunov(p.m1, p.m2, p.b, *s, int(n), radius, n_mark, INITIAL_FRAME)
    sums, marks, k, flag = out[0:3], out[3:6], out[6], out[7]
    if flag:
        raise OrbitEscape(f"orbit escaped at measured iterate {k}", n_transient + k)
    notes = []
    sums = list(sums)
    marks = list(marks)
    if p.b == 0.0:
        # rank-deficient differential: one direction is annihilated each step
        notes.append("rank-deficient differential (B=0): third exponent is -inf")
        order = np.argsort(sums)
        sums[order[0]] = -math.inf
        marks[order[0]] = -math.inf
    else:
        total = math.fsum(sums) / n
        notes.append(f"volume defect {total - math.log(abs(p.b)):.3e}")
    spec = spectrum_from_sums(sums, marks, n, n_mark, n_transient, notes)
    return spec, out[8:11]


def _step_array(p):
    return lambda s: np.array(henon_step(s, p))


def _jac_fn(p):
    return lambda s: henon_jacobian(s, p)


def _sink(p, s, budget):
    q = kernels.first_return(p.m1, p.m2, p.b, *s, budget.q_max, budget.closure_tol)
    if not q:
        return None
    try:
        point, mono = refine_cycle(_step_array(p), _jac_fn(p), s, q)
    except ComputationError:
        return None
    mults = np.linalg.eigvals(mono)
    if not np.all(np.abs(mults) < 1.0):
        return None
    return AttractorReport(
        Tag.PERIODIC_SINK,
        period=q,
        evidence={
            "cycle_point": [float(v) for v in point],
            "multiplier_moduli": sorted((float(abs(m)) for m in mults), reverse=True),
        },
    )


def classify_dynamics(p: Henon3DParams, s0=None, budget: Budget | None = None) -> AttractorReport:
    """Classify the long-run behaviour of the orbit of ``s0``.

    Order of tests: escape, closure to a periodic sink (period at most
    ``budget.q_max``, tolerance ``budget.closure_tol``), Lyapunov rules of
    :func:`~lorenz_forge.dynamics.classify_spectrum`. An all-negative
    spectrum triggers a second closure test at the end of the run.
    """
    budget = budget or Budget()
    s = default_seed(p) if s0 is None else tuple(float(v) for v in s0)
    r = budget.escape_radius
    x, y, z, k, flag = kernels.iterate(p.m1, p.m2, p.b, *s, budget.n_transient, r)
    if flag:
        return AttractorReport(Tag.DIVERGED, evidence={"escape_iterate": k})
    s = (x, y, z)
    rep = _sink(p, s, budget)
    if rep is not None:
        return rep
    try:
        spec, s_end = _measure(p, s, budget.n_transient, budget.n_iterates, r)
    except OrbitEscape as exc:
        return AttractorReport(Tag.DIVERGED, evidence={"escape_iterate": exc.iterate})
    evidence = {}
    if p.b != 0.0:
        evidence["volume_defect"] = spec.total - math.log(abs(p.b))
    if spec.exponents[0] < -budget.eps_pos:
        late = _sink(p, s_end, budget)
        if late is not None:
            late.evidence.update(evidence)
            return replace(late, spectrum=spec)
    tag = classify_spectrum(spec.exponents, budget.eps_pos, budget.eps_zero)
    return AttractorReport(tag, None, spec, evidence)
