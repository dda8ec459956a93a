"""Rescaling of first-return maps to 3D Henon-type limit maps.

For large ``(i, j)`` the return map ``T_ij`` becomes, after an index
dependent affine change of coordinates, close to

* Case I:    ``(X1, X2, Y) -> (-J X2 + M2 Y, Y, M1 - X1 - Y^2)``
* Cases II/III: ``(X1, X2, Y) -> (Y, X1, M1 + M2 X1 + B X2 - Y^2)``

This module provides the limit maps, their relation to the 3D Henon map,
the leading-order parameter formulas (forward and inverse), and a
*calibrated* rescaling measured from the composed map itself. The
calibrated chart is what makes the residual against the limit map
converge; the leading-order formulas are kept as the reference values
whose difference from the measured ones is the correction term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np

from . import _mp
from .errors import ComputationError, DomainError
from .henon3d import Henon3DParams
from .hetero_model import Case, MuVector, S_functional, build_model, gamma2_for_S
from .return_map import (
    ReturnIndex,
    admissible_window,
    compose,
    cross_jacobian,
    cross_map,
    cross_to_physical,
    precision_bits,
)


@dataclass(frozen=True)
class RescaledParams:
    """Parameters ``(M1, M2, Bij)`` of a limit map.

    ``Bij`` is the coefficient called ``J`` in Case I and ``B`` in Cases II
    and III; in both readings it is the Jacobian of the limit map.
    """

    M1: float
    M2: float
    Bij: float

    def __post_init__(self):
        for name in ("M1", "M2", "Bij"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    def as_tuple(self):
        return (self.M1, self.M2, self.Bij)


def _case(case) -> Case:
    return case if isinstance(case, Case) else Case(case)


def limit_map(case, params: RescaledParams, point):
    """Evaluate the limit map of ``case`` at ``point = (X1, X2, Y)``."""
    x1, x2, y = point
    m1, m2, b = params.M1, params.M2, params.Bij
    if _case(case) is Case.I:
        return (-b * x2 + m2 * y, y, m1 - x1 - y * y)
    return (y, x1, m1 + m2 * x1 + b * x2 - y * y)


def limit_jacobian(case, params: RescaledParams, point) -> np.ndarray:
    y = point[2]
    if _case(case) is Case.I:
        return np.array([[0.0, -params.Bij, params.M2], [0.0, 0.0, 1.0], [-1.0, 0.0, -2.0 * y]])
    return np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [params.M2, params.Bij, -2.0 * y]])


@dataclass(frozen=True)
class AffineChange:
    """``h(X) = matrix @ X`` from limit-map coordinates to Henon coordinates."""

    matrix: np.ndarray

    def __call__(self, point):
        return tuple(float(v) for v in self.matrix @ np.asarray(point, dtype=float))

    def inverse(self, point):
        return tuple(float(v) for v in np.linalg.solve(self.matrix, np.asarray(point, dtype=float)))


def caseI_to_henon(params: RescaledParams):
    """Conjugate the Case I limit map to the 3D Henon map.

    With ``X1_new = (X1 - M2 X2) / (-J)`` the Case I map becomes the Henon
    map in ``(x, y, z) = (X1_new, X2, Y)`` with parameters ``(M1, -M2, J)``.
    Returns ``(Henon3DParams, AffineChange)``.
    """
    j = params.Bij
    if j == 0.0:
        raise DomainError("J = 0: the Case I change of coordinates is singular")
    h = np.array([[-1.0 / j, params.M2 / j, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return Henon3DParams(params.M1, -params.M2, j), AffineChange(h)


_SWAP = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])


def to_henon(case, params: RescaledParams):
    """Henon parameters and coordinate change for any case's limit map."""
    if _case(case) is Case.I:
        return caseI_to_henon(params)
    # Cases II/III: (x, y, z) = (X2, X1, Y), same parameters
    return Henon3DParams(params.M1, params.M2, params.Bij), AffineChange(_SWAP.copy())


def from_henon(case, p: Henon3DParams) -> RescaledParams:
    """Limit-map parameters conjugate to the Henon map with parameters ``p``."""
    if _case(case) is Case.I:
        return RescaledParams(p.m1, -p.m2, p.b)
    return RescaledParams(p.m1, p.m2, p.b)


# ----------------------------------------------------------------------------
# leading-order formulas


def _powers(model, idx, mp_mode):
    i, j = idx
    conv = gmpy2.mpfr if mp_mode else float
    l1, l2 = model.spectrum1.contracting
    n1, n2 = model.spectrum2.contracting
    return dict(
        l1=conv(l1) ** i, g1=conv(model.spectrum1.expanding) ** i,
        n1=conv(n1) ** j, g2=conv(model.spectrum2.expanding) ** j,
        l2=conv(l2) ** i, n2j=conv(n2) ** j, l2j=conv(l2) ** j,
    )


def _bij(model, idx):
    i, j = idx
    with _mp.precision(precision_bits(model, idx)):
        v = (
            gmpy2.mpfr(model.t12.det) * gmpy2.mpfr(model.t21.det)
            * gmpy2.mpfr(model.spectrum1.jacobian) ** i * gmpy2.mpfr(model.spectrum2.jacobian) ** j
        )
    return float(v)


def _m1_bracket(model, idx):
    """``mu1 + nu1^j c1 u1_plus - gamma1^-i y_minus`` and ``-d1^2 d2 gamma1^2i gamma2^2j``."""
    p = _powers(model, idx, True)
    t12, t21 = model.t12, model.t21
    bracket = gmpy2.mpfr(t21.y_plus) + p["n1"] * t21.c[0] * t12.u_plus[0] - t12.y_minus / p["g1"]
    factor = -(gmpy2.mpfr(t12.d) ** 2) * t21.d * p["g1"] ** 2 * p["g2"] ** 2
    return bracket, factor


def params_forward(model, idx: ReturnIndex, case=None) -> RescaledParams:
    """Leading-order ``(M1, M2, Bij)`` of the return map ``T_ij`` of ``model``.

    Correction terms are set to zero. ``M2`` carries the factor ``d1`` (and
    in Case I the sign) that follows from composing the scalings of the
    coordinates; see the rescaling notes in the README.
    """
    if case is not None and _case(case) is not model.case_tag:
        raise DomainError(f"model is {model.case_tag.value}, not {_case(case).value}")
    with _mp.precision(precision_bits(model, idx)):
        bracket, factor = _m1_bracket(model, idx)
        m1 = float(factor * bracket)
    mu2_eff = -_mu2_base(model)
    return RescaledParams(m1, m2_slope(model, idx) * mu2_eff, _bij(model, idx))


MU_BOUNDS = (0.1, 0.1, 0.2)


def params_invert(config, idx: ReturnIndex, case, target: RescaledParams, max_iter=60) -> MuVector:
    """Leading-order inverse of :func:`params_forward`.

    ``mu3`` is chosen so that ``Bij`` hits the target (it moves ``gamma2``),
    ``mu2`` from ``M2`` and ``mu1`` (returned as an mpfr) from ``M1``. The
    three are coupled through the global-map determinants, so the solve is
    iterated to a fixed point.

    Raises
    ------
    DomainError
        If ``target.Bij`` is unreachable within ``|mu3| <= 0.2`` ("index pair
        incompatible with target Jacobian") or ``|mu1| > 0.1``.
    """
    cfg = getattr(config, "config", config)
    model0 = build_model(cfg)
    if case is not None and _case(case) is not model0.case_tag:
        raise DomainError(f"config is {model0.case_tag.value}, not {_case(case).value}")
    i, j = idx
    if not target.Bij > 0:
        raise DomainError("target Bij must be positive")
    s0 = model0.base_S0
    ln_j1 = math.log(model0.spectrum1.jacobian)
    mu2, mu3 = 0.0, 0.0
    for _ in range(max_iter):
        m = build_model(cfg, MuVector(0.0, mu2, mu3))
        j12j21 = m.t12.det * m.t21.det
        if j12j21 <= 0:
            raise DomainError("index pair incompatible with target Jacobian (J12 J21 <= 0)")
        ln_j2 = (math.log(target.Bij) - math.log(j12j21) - i * ln_j1) / j
        if ln_j2 <= 0:
            raise DomainError("index pair incompatible with target Jacobian (needs J2 <= 1)")
        new_mu3 = -ln_j1 / ln_j2 - s0
        if abs(new_mu3) > 2 * MU_BOUNDS[2]:  # far outside: no point iterating on
            break
        m = build_model(cfg, MuVector(0.0, mu2, new_mu3))
        k = m2_slope(m, idx)
        new_mu2 = target.M2 / k + _mu2_base(m0=model0)
        done = abs(new_mu2 - mu2) <= 1e-15 * (1 + abs(mu2)) and abs(new_mu3 - mu3) <= 1e-15
        mu2, mu3 = new_mu2, new_mu3
        if done:
            break
    else:
        raise ComputationError("params_invert did not settle", [(mu2, mu3)])
    # the bound applies to the settled value: mu2 moves J12 J21 and with it mu3
    if abs(new_mu3) > MU_BOUNDS[2]:
        raise DomainError(
            f"index pair incompatible with target Jacobian: needs mu3 = {new_mu3:.4g}, |mu3| <= {MU_BOUNDS[2]}"
        )
    if abs(mu2) > MU_BOUNDS[1]:
        raise DomainError(f"mu2 = {mu2:.4g} outside the unfolding box |mu2| <= {MU_BOUNDS[1]}")
    m = build_model(cfg, MuVector(0.0, mu2, mu3))
    with _mp.precision(precision_bits(m, idx)):
        bracket0, factor = _m1_bracket(m, idx)  # bracket with mu1 = 0
        mu1 = gmpy2.mpfr(target.M1) / factor - bracket0
    if abs(mu1) > MU_BOUNDS[0]:
        raise DomainError(f"mu1 = {float(mu1):.4g} exceeds the unfolding bound {MU_BOUNDS[0]}; increase (i, j)")
    return MuVector(mu1, mu2, mu3)


def m2_slope(model, idx):
    """``dM2/dmu2`` at leading order for a model (mu2 enters linearly)."""
    p = _powers(model, idx, False)
    grow = p["l1"] * p["g1"] * p["n1"] * p["g2"]
    d1 = model.t12.d
    if model.case_tag is Case.I:
        return -d1 * model.t21.c[0] * model.t12.A11 * grow
    if model.case_tag is Case.II:
        return d1 * model.t21.b[0] * model.t12.A11 * grow
    return d1 * model.t21.b[0] * model.t21.c[0] * grow


def _mu2_base(m0):
    """Value of the mu2-carrying coefficient at mu = 0 (zero up to tolerance)."""
    if m0.case_tag is Case.I:
        return -m0.t21.b[0]
    if m0.case_tag is Case.II:
        return -m0.t21.c[0]
    return -m0.t12.A11


# ----------------------------------------------------------------------------
# scale factors


@dataclass(frozen=True)
class ScaleSet:
    """Leading-order coordinate scalings ``x1 = f1 X1, x2 = f2 X2, v = fv Y``.

    Correction factors are set to zero. ``offsets`` are the shift constants
    (in the cross chart) when they have been computed.
    """

    case: Case
    x1: float
    x2: float
    v: float
    offsets: tuple | None = None

    def __post_init__(self):
        for name in ("x1", "x2", "v"):
            f = getattr(self, name)
            if not (math.isfinite(f) and f != 0.0):
                raise DomainError(f"degenerate scale factor {name} = {f}")


def scale_factors(model, idx: ReturnIndex, case=None, with_offsets=False) -> ScaleSet:
    """Literal leading-order scale factors for the case of ``model``.

    In Cases II and III the ``x2`` factor follows the displayed formula,
    including its ``lambda2^j``. In Case III the small factor written there
    as an unknown correction is given its leading value
    ``A11 + (nu2/nu1)^j a22' A21(T12) / A21'`` (primes: T21 entries after
    eliminating ``b2/b1``), which stays nonzero at mu2 = 0.
    The calibrated chart of :func:`calibrate` is what the residual uses.
    """
    case = model.case_tag if case is None else _case(case)
    if case is not model.case_tag:
        raise DomainError(f"model is {model.case_tag.value}, not {case.value}")
    i, j = idx
    l1, l2 = model.spectrum1.contracting
    n1, n2 = model.spectrum2.contracting
    g1, g2 = model.spectrum1.expanding, model.spectrum2.expanding
    d1, d2 = model.t12.d, model.t21.d
    b21, b22 = model.t21.b
    c21 = model.t21.c[0]
    a11 = model.t12.A11
    with np.errstate(all="ignore"):
        try:
            fv = -(g1**-i) * g2**-j / (d1 * d2)
            if case is Case.I:
                f1 = l1**-i * g1 ** (-2 * i) * n1**-j * g2 ** (-2 * j) / (c21 * a11 * d1**2 * d2)
                f2 = -b22 * g1**-i * g2**-j / (d1 * d2)
            else:
                (a2_11, _), (a2_21, _) = model.t21.A
                a21_2 = a2_21 - b22 / b21 * a2_11
                f1 = -b21 * g1**-i * g2**-j / (d1 * d2)
                small = a11
                if case is Case.III:
                    # leading value of the small factor: the nu2^j route through A21 of T12
                    (a2_11, a2_12), (_, a2_22) = model.t21.A
                    a22_2 = a2_22 - b22 / b21 * a2_12
                    small = a11 + (n2 / n1) ** j * a22_2 * model.t12.A21 / a21_2
                f2 = -b21 * small * a21_2 * l1**i * g1**-i * l2**j * g2**-j / (d1 * d2)
        except ZeroDivisionError as exc:
            raise DomainError(f"zero denominator in {case.value} scale factors") from exc
    offsets = None
    if with_offsets:
        offsets = tuple(float(v) for v in calibrate(model, idx).offsets)
    return ScaleSet(case, f1, f2, fv, offsets)


# ----------------------------------------------------------------------------
# calibrated rescaling


@dataclass(frozen=True)
class CalibratedScales:
    """Measured affine chart ``z = offsets + mixing @ diag(factors) @ X``.

    ``z = (xi1, xi2, w)`` are cross-chart coordinates. Entries are mpfr at
    ``bits`` of precision.
    """

    case: Case
    idx: ReturnIndex
    bits: int
    offsets: tuple
    mixing: float
    factors: tuple
    effective: RescaledParams
    linear: tuple = field(repr=False)
    shift_residual: float = 0.0

    def mix_matrix(self):
        k = self.mixing
        one, zero = gmpy2.mpfr(1), gmpy2.mpfr(0)
        if self.case is Case.I:
            return [[one, -k, zero], [zero, one, zero], [zero, zero, one]]
        return [[one, zero, zero], [k, one, zero], [zero, zero, one]]

    def mix_inverse(self):
        k = self.mixing
        one, zero = gmpy2.mpfr(1), gmpy2.mpfr(0)
        if self.case is Case.I:
            return [[one, k, zero], [zero, one, zero], [zero, zero, one]]
        return [[one, zero, zero], [-k, one, zero], [zero, zero, one]]

    def to_cross(self, X):
        """Rescaled point -> cross chart (call inside the precision context)."""
        s = [gmpy2.mpfr(X[k]) * self.factors[k] for k in range(3)]
        t = self.mix_matrix()
        return tuple(self.offsets[r] + sum(t[r][c] * s[c] for c in range(3)) for r in range(3))

    def from_cross(self, z):
        d = [z[k] - self.offsets[k] for k in range(3)]
        t = self.mix_inverse()
        s = [sum(t[r][c] * d[c] for c in range(3)) for r in range(3)]
        return tuple(s[k] / self.factors[k] for k in range(3))


def _shifted_residual(model, idx, z):
    f = cross_map(model, idx, z, check=False)
    jac = cross_jacobian(model, idx, z)
    return [f[0] - z[0], f[1] - z[1], jac[2][2]], f, jac


def calibrate(model, idx: ReturnIndex, tol=1e-10, max_iter=40) -> CalibratedScales:
    """Measure the shift, mixing and scale factors of the return map.

    The shift zeroes the constant terms of the ``x`` components and the
    linear-in-``w`` term of the ``w`` component (Newton in extended
    precision, tolerance ``tol`` in rescaled units). The mixing removes the
    ``x2`` dependence of the ``Y`` equation (Case I) or the ``Y``
    dependence of the ``X2`` equation (Cases II/III). The factors are
    normalised so that the coefficients fixed at +-1 in the limit map are
    exactly +-1; the remaining free coefficients are read off as the
    effective ``(M1, M2, Bij)``.
    """
    admissible_window(model, idx)
    case = model.case_tag
    bits = precision_bits(model, idx)
    with _mp.precision(bits):
        h = gmpy2.mpfr(2) ** (-(bits // 3))

        def w_curvature(zz):
            zp, zm = list(zz), list(zz)
            row = []
            for k in range(3):
                zp, zm = list(zz), list(zz)
                zp[k] += h
                zm[k] -= h
                row.append((cross_jacobian(model, idx, zp)[2][2] - cross_jacobian(model, idx, zm)[2][2]) / (2 * h))
            return row

        z = [gmpy2.mpfr(0)] * 3
        trace = []
        for _ in range(max_iter):
            res, f, jac = _shifted_residual(model, idx, z)
            row3 = w_curvature(z)
            s, t, tinv, k, dm = _normalise(case, jac, row3[2] / 2)
            err = max(float(abs(res[0] / s[0])), float(abs(res[1] / s[1])), float(abs(res[2])))
            trace.append(err)
            if err < tol:
                break
            a = [
                [jac[0][0] - 1, jac[0][1], jac[0][2]],
                [jac[1][0], jac[1][1] - 1, jac[1][2]],
                row3,
            ]
            step = _mp.solve3(a, [-r for r in res])
            z = [z[q] + step[q] for q in range(3)]
        else:
            raise ComputationError("shift solver did not converge", trace)
        alpha = s[2]
        lin = [[dm[r][c] * s[c] / s[r] for c in range(3)] for r in range(3)]
        m1 = (f[2] - z[2]) / alpha
        if case is Case.I:
            eff = RescaledParams(float(m1), float(lin[0][2]), float(-lin[0][1]))
        else:
            eff = RescaledParams(float(m1), float(lin[2][0]), float(lin[2][1]))
        lin_f = tuple(tuple(float(v) for v in row) for row in lin)
    return CalibratedScales(case, idx, bits, tuple(z), k, tuple(s), eff, lin_f, trace[-1])


def _normalise(case, d, c_ww):
    """Mixing and factors making the fixed limit-map coefficients +-1."""
    if c_ww == 0:
        raise ComputationError("return map has no quadratic term in w", [0.0])
    alpha = -1 / c_ww
    if case is Case.I:
        k = d[2][1] / d[2][0]
        t = [[1, -k, 0], [0, 1, 0], [0, 0, 1]]
        tinv = [[1, k, 0], [0, 1, 0], [0, 0, 1]]
    else:
        k = d[1][2] / d[0][2]
        t = [[1, 0, 0], [k, 1, 0], [0, 0, 1]]
        tinv = [[1, 0, 0], [-k, 1, 0], [0, 0, 1]]
    dm = _mm(tinv, _mm(d, t))
    if case is Case.I:
        beta1 = -alpha / dm[2][0]
        beta2 = alpha * dm[1][2]
    else:
        beta1 = alpha * dm[0][2]
        beta2 = beta1 * dm[1][0]
    if beta1 == 0 or beta2 == 0:
        raise ComputationError("degenerate linear part: a scale factor vanishes", [0.0])
    return [beta1, beta2, alpha], t, tinv, k, dm


def _mm(a, b):
    return [[sum(a[r][k] * b[k][c] for k in range(3)) for c in range(3)] for r in range(3)]


class RescaledMap:
    """The return map ``T_ij`` seen in calibrated rescaled coordinates.

    Calling it maps a float point ``X`` to a float point; composition is
    done in extended precision. ``effective`` holds the measured limit-map
    parameters and ``corrections`` their difference from
    :func:`params_forward`.
    """

    def __init__(self, model, idx: ReturnIndex, scales: CalibratedScales | None = None):
        self.model = model
        self.idx = idx
        self.scales = scales or calibrate(model, idx)
        self.case = model.case_tag
        self.effective = self.scales.effective

    @property
    def corrections(self) -> tuple[float, float, float]:
        fwd = params_forward(self.model, self.idx)
        return tuple(e - f for e, f in zip(self.effective.as_tuple(), fwd.as_tuple()))

    def _ctx(self):
        return _mp.precision(self.scales.bits)

    def __call__(self, X, check=True):
        with self._ctx():
            z = self.scales.to_cross(X)
            zb = cross_map(self.model, self.idx, z, check=check)
            return tuple(float(v) for v in self.scales.from_cross(zb))

    def jacobian(self, X) -> np.ndarray:
        with self._ctx():
            z = self.scales.to_cross(X)
            d = cross_jacobian(self.model, self.idx, z)
            t, tinv = self.scales.mix_matrix(), self.scales.mix_inverse()
            dm = _mm(tinv, _mm(d, t))
            s = self.scales.factors
            return np.array([[float(dm[r][c] * s[c] / s[r]) for c in range(3)] for r in range(3)])

    def physical(self, X):
        """Physical point on ``Pi1^+`` corresponding to rescaled ``X``."""
        with self._ctx():
            return cross_to_physical(self.model, self.idx, self.scales.to_cross(X))

    def in_window(self, X) -> bool:
        r = self.model.chart_radius
        with self._ctx():
            z = self.scales.to_cross(X)
            return all(abs(v) <= r for v in z)

    def limit(self, X):
        return limit_map(self.case, self.effective, X)


def _grid(L, n):
    ax = np.linspace(-L, L, n)
    return [(a, b, c) for a in ax for b in ax for c in ax]


def residual_sup(model, idx: ReturnIndex, mu: MuVector | None = None, box_halfwidth=3.0, grid_n=7,
                 rescaled: RescaledMap | None = None) -> float:
    """C0 distance between the rescaled return map and its limit map.

    Supremum over a ``grid_n^3`` grid in ``[-L, L]^3`` of the max-norm of
    ``R(X) - limit_map(X)``, where ``R`` is the return map in calibrated
    coordinates and the limit map uses the measured ``(M1, M2, Bij)``.

    Raises
    ------
    DomainError
        If a corner of the box leaves the admissible window (the message
        names the corner).
    """
    if grid_n < 3:
        raise DomainError("grid_n must be at least 3")
    if mu is not None:
        model = build_model(model.config, mu)
    rmap = rescaled or RescaledMap(model, idx)
    L = float(box_halfwidth)
    for corner in [(a, b, c) for a in (-L, L) for b in (-L, L) for c in (-L, L)]:
        if not rmap.in_window(corner):
            raise DomainError(f"rescaled box corner {corner} leaves the admissible window")
    worst = 0.0
    for X in _grid(L, grid_n):
        got = rmap(X)
        want = rmap.limit(X)
        worst = max(worst, max(abs(a - b) for a, b in zip(got, want)))
    return worst


def predicted_decay(model, idx: ReturnIndex) -> float:
    """``max(lambda1^i nu1^j, gamma1^-i gamma2^-j)``, the expected residual order."""
    i, j = idx
    l1 = model.spectrum1.contracting[0]
    n1 = model.spectrum2.contracting[0]
    return max(l1**i * n1**j, model.spectrum1.expanding**-i * model.spectrum2.expanding**-j)


def params_invert_corrected(config, idx: ReturnIndex, target: RescaledParams, tol=1e-10, max_iter=40):
    """mu at which the *measured* limit parameters equal ``target``.

    Starts from :func:`params_invert` and corrects with the leading-order
    sensitivities (a chord iteration). ``mu1`` and ``mu2`` are carried in
    extended precision: at high index one ulp of a double moves ``M1`` or
    ``M2`` by more than ``tol``. ``mu3`` stays a double and its tolerance is
    the larger of ``tol`` and four ulps times the ``Bij`` sensitivity; once
    ``M2`` and ``Bij`` are met, ``mu3`` is frozen and the remaining two are
    solved to ``tol``. Returns ``(mu, RescaledMap)``.
    """
    cfg = getattr(config, "config", config)
    mu = params_invert(cfg, idx, None, target)
    trace = []
    frozen = False
    for _ in range(max_iter):
        model = build_model(cfg, mu)
        rmap = RescaledMap(model, idx)
        eff = rmap.effective
        # far from the target the huge M2 can swamp Bij; correct M2 first
        lnb = math.log(eff.Bij / target.Bij) if eff.Bij > 0 else None
        err = (eff.M1 - target.M1, eff.M2 - target.M2, 0.0 if lnb is None else lnb)
        trace.append(err)
        k3 = idx.j * math.log(model.spectrum1.jacobian) / S_functional(model) ** 2
        tol3 = max(tol, 4 * math.ulp(mu.mu3) * abs(k3))
        frozen = frozen or (lnb is not None and abs(err[2]) <= tol3)
        if frozen and abs(err[0]) <= tol and abs(err[1]) <= tol:
            return mu, rmap
        with _mp.precision(rmap.scales.bits):
            _, factor = _m1_bracket(model, idx)
            mu1 = gmpy2.mpfr(mu.mu1) - gmpy2.mpfr(err[0]) / factor
            mu2 = gmpy2.mpfr(mu.mu2) - gmpy2.mpfr(err[1]) / gmpy2.mpfr(m2_slope(model, idx))
        mu3 = mu.mu3 if frozen else mu.mu3 - err[2] / k3
        if abs(mu3) > MU_BOUNDS[2] or abs(mu1) > MU_BOUNDS[0] or abs(mu2) > MU_BOUNDS[1]:
            raise DomainError("corrected parameters leave the unfolding box")
        mu = MuVector(mu1, mu2, mu3)
    raise ComputationError("corrected inversion did not converge", trace)


__all__ = [
    "AffineChange",
    "CalibratedScales",
    "RescaledMap",
    "RescaledParams",
    "ScaleSet",
    "calibrate",
    "caseI_to_henon",
    "from_henon",
    "gamma2_for_S",
    "limit_jacobian",
    "limit_map",
    "params_forward",
    "params_invert",
    "params_invert_corrected",
    "predicted_decay",
    "residual_sup",
    "scale_factors",
    "to_henon",
    "compose",
]
