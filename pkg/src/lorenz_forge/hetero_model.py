"""Model diffeomorphism with a heteroclinic cycle between two saddles.

Saddle ``O1`` has multipliers ``lambda1, lambda2, gamma1`` and saddle ``O2``
has ``nu1, nu2, gamma2`` (two contracting, one expanding). Near each saddle
the map is linear in normal coordinates; the connections are the global
maps ``T12`` (transverse, from near ``O1`` to near ``O2``) and ``T21``
(quadratic tangency, back to ``O1``). All map evaluations use plain
arithmetic so they run unchanged on floats or on mpfr numbers.
"""

from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import gmpy2

from . import _mp
from ._mp import MPFR, det3
from .errors import ChartExit, ConditionViolation, ConfigError, DomainError

ZERO_TOL = 1e-12
SCHEMA_VERSION = 1


class Case(str, enum.Enum):
    """Type of non-simple heteroclinic cycle."""

    I = "CaseI"  # noqa: E741
    II = "CaseII"
    III = "CaseIII"


def _pair(v, name):
    # mpfr entries are kept: mu2 can be applied in extended precision
    v = tuple(x if isinstance(x, MPFR) else float(x) for x in v)
    if len(v) != 2:
        raise DomainError(f"{name} must have two entries")
    return v


def _mat2(m, name):
    rows = tuple(_pair(r, name) for r in m)
    if len(rows) != 2:
        raise DomainError(f"{name} must be 2x2")
    return rows


def _mat3(m, name):
    rows = tuple(tuple(float(x) for x in r) for r in m)
    if len(rows) != 3 or any(len(r) != 3 for r in rows):
        raise DomainError(f"{name} must be 3x3")
    return rows


ZERO3 = ((0.0,) * 3,) * 3


def _qform(q, z):
    """z^T Q z for a 3x3 coefficient matrix (any scalar type)."""
    return sum(q[a][b] * z[a] * z[b] for a in range(3) for b in range(3) if q[a][b] != 0.0)


def _qgrad(q, z):
    return [sum((q[a][b] + q[b][a]) * z[b] for b in range(3)) for a in range(3)]


def _pow(base, k, like):
    """``base ** k`` in the precision of ``like``."""
    if isinstance(like, MPFR):
        return gmpy2.mpfr(base) ** k
    return base**k


@dataclass(frozen=True)
class SaddleSpectrum:
    """Multipliers of a saddle: ``0 < contracting[1] < contracting[0] < 1 < expanding``.

    ``cubic`` holds optional coefficients ``(e1, e2, e3)`` of the
    perturbation ``x1 += e1 x1^2 y``, ``x2 += e2 x1^2 y``, ``y += e3 x1 y^2``
    of the one-step local map; it keeps both local invariant manifolds.
    """

    contracting: tuple[float, float]
    expanding: float
    cubic: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        c = _pair(self.contracting, "contracting")
        g = float(self.expanding)
        object.__setattr__(self, "contracting", c)
        object.__setattr__(self, "expanding", g)
        object.__setattr__(self, "cubic", tuple(float(v) for v in self.cubic))
        if not all(math.isfinite(v) for v in (*c, g, *self.cubic)):
            raise ConditionViolation("A", "multipliers must be finite")
        if not (0.0 < c[1] < c[0] < 1.0 < g):
            raise ConditionViolation(
                "A", f"need 0 < {c[1]} < {c[0]} < 1 < {g} (strict ordering of multipliers)"
            )

    @property
    def jacobian(self) -> float:
        return self.contracting[0] * self.contracting[1] * self.expanding

    @property
    def has_cubic(self) -> bool:
        return any(v != 0.0 for v in self.cubic)

    def step(self, p):
        x1, x2, y = p
        l1, l2 = self.contracting
        e1, e2, e3 = self.cubic
        return (l1 * x1 + e1 * x1 * x1 * y, l2 * x2 + e2 * x1 * x1 * y, self.expanding * y + e3 * x1 * y * y)

    def step_jacobian(self, p):
        x1, x2, y = p
        l1, l2 = self.contracting
        e1, e2, e3 = self.cubic
        return [
            [l1 + 2 * e1 * x1 * y, 0.0 * x1, e1 * x1 * x1],
            [2 * e2 * x1 * y, l2 + 0.0 * x1, e2 * x1 * x1],
            [e3 * y * y, 0.0 * x1, self.expanding + 2 * e3 * x1 * y],
        ]

    def iterate(self, k: int, p):
        """k-th iterate; closed form for the linear map, a loop otherwise."""
        if k < 0:
            raise DomainError("iterate count must be non-negative")
        if self.has_cubic:
            for _ in range(k):
                p = self.step(p)
            return tuple(p)
        x1, x2, y = p
        l1, l2 = self.contracting
        return (_pow(l1, k, x1) * x1, _pow(l2, k, x2) * x2, _pow(self.expanding, k, y) * y)

    def iterate_jacobian(self, k: int, p):
        if self.has_cubic:
            m = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            for _ in range(k):
                m = _matmul(self.step_jacobian(p), m)
                p = self.step(p)
            return m
        x1, x2, y = p
        l1, l2 = self.contracting
        z = 0.0 * x1
        return [
            [_pow(l1, k, x1), z, z],
            [z, _pow(l2, k, x2), z],
            [z, z, _pow(self.expanding, k, y)],
        ]


def _matmul(a, b):
    return [[sum(a[r][k] * b[k][c] for k in range(3)) for c in range(3)] for r in range(3)]


@dataclass(frozen=True)
class GlobalMapT12:
    """Transverse global map from near ``(0, 0, y_minus)`` to near ``(u_plus, 0)``.

    ``quad`` holds three 3x3 matrices ``Q`` (for ``u1, u2, v``); each adds
    ``z^T Q z`` with ``z = (x1, x2, y - y_minus)``.
    """

    A: tuple
    b: tuple[float, float]
    c: tuple[float, float]
    d: float
    u_plus: tuple[float, float]
    y_minus: float
    quad: tuple = (ZERO3, ZERO3, ZERO3)

    def __post_init__(self):
        object.__setattr__(self, "A", _mat2(self.A, "T12.A"))
        for name in ("b", "c", "u_plus"):
            object.__setattr__(self, name, _pair(getattr(self, name), f"T12.{name}"))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "y_minus", float(self.y_minus))
        object.__setattr__(self, "quad", tuple(_mat3(q, "T12.quad") for q in self.quad))

    @property
    def block(self):
        (a11, a12), (a21, a22) = self.A
        return ((a11, a12, self.b[0]), (a21, a22, self.b[1]), (self.c[0], self.c[1], self.d))

    @property
    def det(self) -> float:
        return float(det3(self.block))

    @property
    def A11(self) -> float:
        return self.A[0][0] - self.b[0] * self.c[0] / self.d

    @property
    def A21(self) -> float:
        return self.A[1][0] - self.b[1] * self.c[0] / self.d

    @property
    def has_quad(self) -> bool:
        return any(v != 0.0 for q in self.quad for r in q for v in r)


@dataclass(frozen=True)
class GlobalMapT21:
    """Global map along the tangency, near ``(0, 0, v_minus)`` to near ``(x_plus, y_plus)``.

    ``quad`` gives 3x3 matrices for ``x1, x2, y`` in ``z = (u1, u2, v - v_minus)``;
    the ``(v - v_minus)^2`` entry of the ``y`` matrix must be zero because that
    coefficient is ``d``. ``y_cubic`` multiplies ``(v - v_minus)^3`` in ``y``.
    ``y_plus`` is the splitting parameter ``mu1``.
    """

    A: tuple
    b: tuple[float, float]
    c: tuple[float, float]
    d: float
    x_plus: tuple[float, float]
    v_minus: float
    y_plus: object = 0.0
    quad: tuple = (ZERO3, ZERO3, ZERO3)
    y_cubic: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "A", _mat2(self.A, "T21.A"))
        for name in ("b", "c", "x_plus"):
            object.__setattr__(self, name, _pair(getattr(self, name), f"T21.{name}"))
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "v_minus", float(self.v_minus))
        object.__setattr__(self, "y_cubic", float(self.y_cubic))
        if not isinstance(self.y_plus, MPFR):
            object.__setattr__(self, "y_plus", float(self.y_plus))
        quad = tuple(_mat3(q, "T21.quad") for q in self.quad)
        if quad[2][2][2] != 0.0:
            raise DomainError("T21.quad y-matrix must have a zero (v-v^-)^2 entry; that term is d")
        object.__setattr__(self, "quad", quad)

    @property
    def block(self):
        (a11, a12), (a21, a22) = self.A
        return ((a11, a12, self.b[0]), (a21, a22, self.b[1]), (self.c[0], self.c[1], 0.0))

    @property
    def det(self) -> float:
        return float(det3(self.block))

    @property
    def has_quad(self) -> bool:
        return self.y_cubic != 0.0 or any(v != 0.0 for q in self.quad for r in q for v in r)


@dataclass(frozen=True)
class MuVector:
    """Unfolding parameters; ``mu1`` and ``mu2`` may be mpfr values for
    high-index domains, where a double cannot resolve them finely enough."""

    mu1: object = 0.0
    mu2: object = 0.0
    mu3: float = 0.0

    def __post_init__(self):
        for name in ("mu1", "mu2"):
            if not isinstance(getattr(self, name), MPFR):
                object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "mu3", float(self.mu3))
        if not all(math.isfinite(float(v)) for v in (self.mu1, self.mu2, self.mu3)):
            raise DomainError("mu must be finite")

    def as_tuple(self):
        return (self.mu1, self.mu2, self.mu3)

    def norm(self) -> float:
        return max(abs(float(v)) for v in self.as_tuple())


@dataclass(frozen=True)
class ModelConfig:
    """Coefficients of the unperturbed (mu = 0) diffeomorphism."""

    spectrum1: SaddleSpectrum
    spectrum2: SaddleSpectrum
    t12: GlobalMapT12
    t21: GlobalMapT21
    case: Case | None = None
    chart_radius: float = 0.5
    numerics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.case is not None:
            object.__setattr__(self, "case", Case(self.case))
        if not self.chart_radius > 0:
            raise DomainError("chart_radius must be positive")


@dataclass(frozen=True)
class HeteroModel:
    """The diffeomorphism at parameter ``mu`` (immutable)."""

    spectrum1: SaddleSpectrum
    spectrum2: SaddleSpectrum
    t12: GlobalMapT12
    t21: GlobalMapT21
    case_tag: Case
    mu: MuVector
    base_S0: float
    chart_radius: float
    config: ModelConfig = field(repr=False, compare=False)

    @property
    def numerics(self) -> dict:
        return self.config.numerics


# ----------------------------------------------------------------------------
# construction and validation


def jacobians(model) -> tuple[float, float]:
    """``(J1, J2)``: products of the multipliers of ``O1`` and ``O2``."""
    return model.spectrum1.jacobian, model.spectrum2.jacobian


def S_functional(model) -> float:
    """``-ln J1 / ln J2`` for the contracting-expanding cycle."""
    j1, j2 = jacobians(model)
    if not (0.0 < j1 < 1.0 and j2 > 1.0):
        raise DomainError(f"S needs J1 in (0,1) and J2 > 1, got {j1}, {j2}")
    return -math.log(j1) / math.log(j2)


def global_determinants(model) -> tuple[float, float]:
    """``(J12, J21)``, the determinants of the two global-map differentials."""
    return model.t12.det, model.t21.det


def _is_zero(v):
    return abs(v) <= ZERO_TOL


def classify_case(model) -> Case:
    """Which degenerate pattern the mu = 0 coefficients follow.

    Accepts a :class:`ModelConfig` or a :class:`HeteroModel` (whose mu = 0
    configuration is used).
    """
    cfg = getattr(model, "config", model)
    b, c = cfg.t21.b, cfg.t21.c
    a11 = cfg.t12.A11
    if _is_zero(b[0]) and not _is_zero(b[1]) and not _is_zero(c[0]) and not _is_zero(a11):
        return Case.I
    if not _is_zero(b[0]) and _is_zero(c[0]) and not _is_zero(c[1]) and not _is_zero(a11):
        return Case.II
    if not _is_zero(b[0]) and not _is_zero(c[0]) and _is_zero(a11):
        return Case.III
    raise ConditionViolation(
        "D",
        f"not in Cases I-III (b1={b[0]:.3g}, b2={b[1]:.3g}, c1={c[0]:.3g}, c2={c[1]:.3g}, A11={a11:.3g})",
    )


@dataclass(frozen=True)
class ConditionResult:
    name: str
    ok: bool
    detail: str


def condition_report(cfg: ModelConfig) -> list[ConditionResult]:
    """Evaluate every structural condition without raising.

    ``A`` (saddle ordering) holds for any constructed :class:`SaddleSpectrum`
    and is reported with the multipliers; ``B`` is the contracting-expanding
    Jacobian pair, ``C`` the nonzero ``d`` coefficients, ``det`` the
    invertibility of the global maps and ``D`` the degenerate pattern.
    """
    cfg = getattr(cfg, "config", cfg)
    sp1, sp2 = cfg.spectrum1, cfg.spectrum2
    out = [ConditionResult(
        "A", True,
        f"lambda = {sp1.contracting}, gamma1 = {sp1.expanding}; nu = {sp2.contracting}, gamma2 = {sp2.expanding}",
    )]
    j1, j2 = sp1.jacobian, sp2.jacobian
    if not j1 < 1.0:
        out.append(ConditionResult("B", False, f"J1 = {j1} must be < 1"))
    elif not j2 > 1.0:
        out.append(ConditionResult("B", False, f"J2 = {j2} must be > 1"))
    else:
        out.append(ConditionResult("B", True, f"J1 = {j1:.6g} < 1 < J2 = {j2:.6g}"))
    if cfg.t12.d == 0.0:
        out.append(ConditionResult("C", False, "T12.d must be nonzero (transverse intersection)"))
    elif cfg.t21.d == 0.0:
        out.append(ConditionResult("C", False, "T21.d must be nonzero (quadratic tangency)"))
    else:
        out.append(ConditionResult("C", True, f"d1 = {cfg.t12.d:.6g}, d2 = {cfg.t21.d:.6g}"))
    j12, j21 = cfg.t12.det, cfg.t21.det
    if _is_zero(j12):
        out.append(ConditionResult("det", False, "J12 = 0: T12 is not a diffeomorphism"))
    elif _is_zero(j21):
        out.append(ConditionResult("det", False, "J21 = 0: T21 is not a diffeomorphism"))
    else:
        out.append(ConditionResult("det", True, f"J12 = {j12:.6g}, J21 = {j21:.6g}"))
    try:
        case = classify_case(cfg)
    except ConditionViolation as exc:
        out.append(ConditionResult("D", False, exc.detail))
        return out
    if cfg.case is not None and cfg.case is not case:
        out.append(ConditionResult("case", False, f"declared {cfg.case.value}, coefficients give {case.value}"))
        return out
    if case is Case.II:
        (a11, _), (a21, _) = cfg.t21.A
        b1, b2 = cfg.t21.b
        if _is_zero(a21 - b2 / b1 * a11):
            out.append(ConditionResult("det", False, "Case II requires A21 = a21 - (b2/b1) a11 != 0 for T21"))
            return out
    out.append(ConditionResult("D", True, case.value))
    return out


def _check_conditions(cfg: ModelConfig) -> Case:
    report = condition_report(cfg)
    for r in report:
        if not r.ok:
            raise ConditionViolation(r.name, r.detail)
    return Case(report[-1].detail)


def gamma2_for_S(spectrum1, spectrum2, s_target: float) -> float:
    """gamma2 giving ``-ln J1 / ln(nu1 nu2 gamma2) = s_target`` (closed form)."""
    if not s_target > 0:
        raise DomainError(f"S target must be positive, got {s_target}")
    n1, n2 = spectrum2.contracting
    return math.exp(-math.log(spectrum1.jacobian) / s_target) / (n1 * n2)


def build_model(config: ModelConfig, mu: MuVector | None = None) -> HeteroModel:
    """Validate ``config`` at mu = 0 and apply the unfolding ``mu``.

    mu1 is the splitting ``y_plus`` of T21; mu2 is added to ``b1`` of T21
    (Case I), ``c1`` of T21 (Case II) or ``a11`` of T12 (Case III); mu3
    changes gamma2 so that ``S`` moves from its mu = 0 value by exactly mu3.
    """
    mu = mu or MuVector()
    case = _check_conditions(config)
    s0 = -math.log(config.spectrum1.jacobian) / math.log(config.spectrum2.jacobian)
    t12, t21, sp2 = config.t12, config.t21, config.spectrum2
    if mu.mu2 != 0.0:
        # an mpfr mu2 is added at its own precision (plus headroom), not the
        # ambient context's, so no digits are lost to rounding
        bits = mu.mu2.precision + 64 if isinstance(mu.mu2, MPFR) else 53
        with _mp.precision(bits):
            if case is Case.I:
                t21 = replace(t21, b=(t21.b[0] + mu.mu2, t21.b[1]))
            elif case is Case.II:
                t21 = replace(t21, c=(t21.c[0] + mu.mu2, t21.c[1]))
            else:
                (a11, a12), row2 = t12.A
                t12 = replace(t12, A=((a11 + mu.mu2, a12), row2))
    if mu.mu3 != 0.0:
        sp2 = replace(sp2, expanding=gamma2_for_S(config.spectrum1, sp2, s0 + mu.mu3))
    t21 = replace(t21, y_plus=mu.mu1 if isinstance(mu.mu1, MPFR) else t21.y_plus + mu.mu1)
    model = HeteroModel(config.spectrum1, sp2, t12, t21, case, mu, s0, config.chart_radius, config)
    if not sp2.jacobian > 1.0:
        raise ConditionViolation("B", f"mu3 = {mu.mu3} pushes J2 to {sp2.jacobian}")
    if _is_zero(t12.det) or _is_zero(t21.det):
        raise ConditionViolation("det", f"mu = {mu.as_tuple()} makes a global map degenerate")
    return model


def with_mu(model: HeteroModel, mu: MuVector) -> HeteroModel:
    """Same configuration at a different parameter value."""
    return build_model(model.config, mu)


# ----------------------------------------------------------------------------
# maps


def local_iterate_O1(model, k, point):
    return model.spectrum1.iterate(k, point)


def local_iterate_O2(model, k, point):
    return model.spectrum2.iterate(k, point)


def _check_chart(center, point, radius, name):
    for c, p in zip(center, point):
        if not abs(p - c) <= radius:  # also catches nan
            raise ChartExit(name, f"left chart (|{float(p):.6g} - {float(c):.6g}| > {radius})")


def apply_T12(model, point, check=True):
    """Image of a point of ``Pi1^-`` (near ``(0, 0, y_minus)``) in ``Pi2^+``."""
    t = model.t12
    x1, x2, y = point
    if check:
        _check_chart((0.0, 0.0, t.y_minus), point, model.chart_radius, "Pi1^-")
    z = (x1, x2, y - t.y_minus)
    (a11, a12), (a21, a22) = t.A
    u1 = t.u_plus[0] + a11 * x1 + a12 * x2 + t.b[0] * z[2]
    u2 = t.u_plus[1] + a21 * x1 + a22 * x2 + t.b[1] * z[2]
    v = t.c[0] * x1 + t.c[1] * x2 + t.d * z[2]
    if t.has_quad:
        u1 += _qform(t.quad[0], z)
        u2 += _qform(t.quad[1], z)
        v += _qform(t.quad[2], z)
    return (u1, u2, v)


def T12_jacobian(model, point):
    t = model.t12
    m = [list(r) for r in t.block]
    if t.has_quad:
        z = (point[0], point[1], point[2] - t.y_minus)
        for r in range(3):
            g = _qgrad(t.quad[r], z)
            m[r] = [m[r][k] + g[k] for k in range(3)]
    return m


def apply_T21(model, point, check=True):
    """Image of a point of ``Pi2^-`` (near ``(0, 0, v_minus)``) in ``Pi1^+``."""
    t = model.t21
    u1, u2, v = point
    if check:
        _check_chart((0.0, 0.0, t.v_minus), point, model.chart_radius, "Pi2^-")
    e = v - t.v_minus
    (a11, a12), (a21, a22) = t.A
    x1 = t.x_plus[0] + a11 * u1 + a12 * u2 + t.b[0] * e
    x2 = t.x_plus[1] + a21 * u1 + a22 * u2 + t.b[1] * e
    y = t.y_plus + t.c[0] * u1 + t.c[1] * u2 + t.d * e * e
    if t.has_quad:
        z = (u1, u2, e)
        x1 += _qform(t.quad[0], z)
        x2 += _qform(t.quad[1], z)
        y += _qform(t.quad[2], z) + t.y_cubic * e * e * e
    return (x1, x2, y)


def T21_jacobian(model, point):
    t = model.t21
    e = point[2] - t.v_minus
    m = [list(r) for r in t.block]
    m[2][2] = 2 * t.d * e
    if t.has_quad:
        z = (point[0], point[1], e)
        for r in range(3):
            g = _qgrad(t.quad[r], z)
            m[r] = [m[r][k] + g[k] for k in range(3)]
        m[2][2] += 3 * t.y_cubic * e * e
    return m


# ----------------------------------------------------------------------------
# configuration files


def _locate(text, path):
    """Best-effort line number of the last key of a dotted path in JSON text."""
    pos = 0
    line = None
    for key in path.split("."):
        if key.isdigit():
            continue
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if not m:
            return line
        pos = m.start()
        line = text.count("\n", 0, pos) + 1
    return line


class _Reader:
    def __init__(self, doc, text):
        self.doc, self.text = doc, text

    def fail(self, path, msg):
        raise ConfigError(path, msg, _locate(self.text, path) if self.text else None)

    def get(self, path, default=...):
        cur = self.doc
        for key in path.split("."):
            if not isinstance(cur, dict) or key not in cur:
                if default is not ...:
                    return default
                self.fail(path, "missing required field")
            cur = cur[key]
        return cur

    def number(self, path, default=...):
        v = self.get(path, default)
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(path, f"expected a finite number, got {v!r}")
        return float(v)

    def vector(self, path, n, default=...):
        v = self.get(path, default)
        if not isinstance(v, list) or len(v) != n:
            self.fail(path, f"expected a list of {n} numbers")
        for k, x in enumerate(v):
            if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                self.fail(f"{path}.{k}", f"expected a finite number, got {x!r}")
        return tuple(float(x) for x in v)

    def matrix(self, path, n, default=...):
        m = self.get(path, default)
        if not isinstance(m, list) or len(m) != n:
            self.fail(path, f"expected {n} rows")
        out = []
        for k, row in enumerate(m):
            if not isinstance(row, list) or len(row) != n:
                self.fail(f"{path}.{k}", f"expected a row of {n} numbers")
            for x in row:
                if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                    self.fail(f"{path}.{k}", f"expected finite numbers, got {x!r}")
            out.append(tuple(float(x) for x in row))
        return tuple(out)


def _quads(r, path, names):
    q = r.get(path, {})
    if not isinstance(q, dict):
        r.fail(path, "expected an object")
    unknown = set(q) - set(names)
    if unknown:
        r.fail(f"{path}.{sorted(unknown)[0]}", f"unknown key; allowed: {', '.join(names)}")
    return tuple(r.matrix(f"{path}.{n}", 3) if n in q else ZERO3 for n in names)


def config_from_dict(doc: dict, text: str | None = None) -> ModelConfig:
    """Validate a parsed config document and build a :class:`ModelConfig`."""
    r = _Reader(doc, text)
    if not isinstance(doc, dict):
        raise ConfigError("<root>", "expected a JSON object")
    version = r.get("schema_version")
    if version != SCHEMA_VERSION:
        r.fail("schema_version", f"unsupported version {version!r}; expected {SCHEMA_VERSION}")
    known = {"schema_version", "case", "saddle1", "saddle2", "T12", "T21", "chart_radius", "numerics", "description", "mu"}
    for k in doc:
        if k not in known:
            r.fail(k, "unknown top-level key")
    try:
        sp1 = SaddleSpectrum(
            r.vector("saddle1.lambda", 2), r.number("saddle1.gamma"), r.vector("saddle1.cubic", 3, [0, 0, 0])
        )
        sp2 = SaddleSpectrum(r.vector("saddle2.nu", 2), r.number("saddle2.gamma"), r.vector("saddle2.cubic", 3, [0, 0, 0]))
    except ConditionViolation as exc:
        raise ConfigError("saddle", str(exc), _locate(text or "", "saddle1")) from exc
    t12 = GlobalMapT12(
        r.matrix("T12.A", 2),
        r.vector("T12.b", 2),
        r.vector("T12.c", 2),
        r.number("T12.d"),
        r.vector("T12.u_plus", 2),
        r.number("T12.y_minus"),
        _quads(r, "T12.quad", ("u1", "u2", "v")),
    )
    quad21 = _quads(r, "T21.quad", ("x1", "x2", "y"))
    if quad21[2][2][2] != 0.0:
        r.fail("T21.quad.y", "entry [2][2] must be 0 (that coefficient is T21.d)")
    t21 = GlobalMapT21(
        r.matrix("T21.A", 2),
        r.vector("T21.b", 2),
        r.vector("T21.c", 2),
        r.number("T21.d"),
        r.vector("T21.x_plus", 2),
        r.number("T21.v_minus"),
        0.0,
        quad21,
        r.number("T21.y_cubic", 0.0),
    )
    case = r.get("case", None)
    if case is not None and case not in {c.value for c in Case}:
        r.fail("case", f"expected one of CaseI, CaseII, CaseIII, got {case!r}")
    numerics = r.get("numerics", {})
    if not isinstance(numerics, dict):
        r.fail("numerics", "expected an object")
    return ModelConfig(sp1, sp2, t12, t21, case, r.number("chart_radius", 0.5), dict(numerics))


def load_config(path) -> ModelConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<document>", f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc.msg}", exc.lineno) from exc
    return config_from_dict(doc, text)


def config_to_dict(cfg: ModelConfig) -> dict:
    def q(m):
        return [list(r) for r in m]

    out = {
        "schema_version": SCHEMA_VERSION,
        "saddle1": {"lambda": list(cfg.spectrum1.contracting), "gamma": cfg.spectrum1.expanding},
        "saddle2": {"nu": list(cfg.spectrum2.contracting), "gamma": cfg.spectrum2.expanding},
        "T12": {
            "A": q(cfg.t12.A), "b": list(cfg.t12.b), "c": list(cfg.t12.c), "d": cfg.t12.d,
            "u_plus": list(cfg.t12.u_plus), "y_minus": cfg.t12.y_minus,
        },
        "T21": {
            "A": q(cfg.t21.A), "b": list(cfg.t21.b), "c": list(cfg.t21.c), "d": cfg.t21.d,
            "x_plus": list(cfg.t21.x_plus), "v_minus": cfg.t21.v_minus,
        },
        "chart_radius": cfg.chart_radius,
    }
    if cfg.case is not None:
        out["case"] = cfg.case.value
    for key, sp in (("saddle1", cfg.spectrum1), ("saddle2", cfg.spectrum2)):
        if sp.has_cubic:
            out[key]["cubic"] = list(sp.cubic)
    if cfg.t12.has_quad:
        out["T12"]["quad"] = dict(zip(("u1", "u2", "v"), map(q, cfg.t12.quad)))
    if cfg.t21.has_quad:
        out["T21"]["quad"] = dict(zip(("x1", "x2", "y"), map(q, cfg.t21.quad)))
        out["T21"]["y_cubic"] = cfg.t21.y_cubic
    if cfg.numerics:
        out["numerics"] = dict(cfg.numerics)
    return out


def read_back(model: HeteroModel) -> ModelConfig:
    """Coefficient record of a model (identity on the config when mu = 0)."""
    return ModelConfig(
        model.spectrum1, model.spectrum2, model.t12, model.t21, model.case_tag,
        model.chart_radius, model.config.numerics,
    )


def demo_config(case) -> ModelConfig:
    """Shipped demonstration configuration for one of the three cases."""
    from importlib import resources

    case = Case(case) if not isinstance(case, Case) else case
    name = {Case.I: "demo_case1.json", Case.II: "demo_case2.json", Case.III: "demo_case3.json"}[case]
    text = resources.files("lorenz_forge").joinpath("data", name).read_text()
    return config_from_dict(json.loads(text), text)

