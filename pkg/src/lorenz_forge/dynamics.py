"""Map-agnostic pieces of attractor classification.

Both the 3D Henon map and the composed first-return map are classified with
the same rules; this module holds the data types, the Lyapunov-sign rules
and slow-but-generic orbit routines that work with any ``step``/``jacobian``
pair of Python callables.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ComputationError, OrbitEscape

# fixed generic starting frame for tangent dynamics; the identity would put
# the first vector in the kernel of the Henon differential when B = 0
_FRAME = np.linalg.qr(
    np.array([[1.0, 0.3, 0.2], [0.1, 1.0, 0.4], [0.25, 0.15, 1.0]])
)[0]
INITIAL_FRAME = tuple(float(v) for v in _FRAME.T.reshape(-1))


class Tag(str, enum.Enum):
    DIVERGED = "DivergedToInfinity"
    PERIODIC_SINK = "PeriodicSink"
    INVARIANT_CURVE = "InvariantCurveLike"
    LORENZ_LIKE = "LorenzLikeCandidate"
    CHAOTIC_OTHER = "ChaoticOther"
    UNDETERMINED = "Undetermined"


@dataclass(frozen=True)
class Budget:
    """Iteration budget and thresholds for :func:`classify_spectrum` et al."""

    n_transient: int = 10_000
    n_iterates: int = 1_000_000
    escape_radius: float = 100.0
    q_max: int = 64
    closure_tol: float = 1e-9
    eps_pos: float = 1e-3
    eps_zero: float = 1e-3

    def __post_init__(self):
        if self.n_transient < 0 or self.n_iterates < 1:
            raise ValueError("budget lengths must be non-negative / positive")
        if not self.escape_radius > 0:
            raise ValueError("escape radius must be positive")

    def scaled(self, **changes) -> "Budget":
        return replace(self, **changes)


@dataclass(frozen=True)
class LyapunovSpectrum:
    """Ordered Lyapunov exponents (natural log per iterate).

    ``last_window_drift`` is the largest change of any exponent estimate
    over the final 10% of the measured iterates.
    """

    exponents: tuple[float, float, float]
    transient_discarded: int
    iterates_used: int
    last_window_drift: float
    notes: tuple[str, ...] = ()

    def __post_init__(self):
        e = self.exponents
        if not (e[0] >= e[1] >= e[2]):
            raise ValueError(f"exponents not sorted: {e}")
        if self.iterates_used <= 0:
            raise ValueError("iterates_used must be positive")

    @property
    def total(self) -> float:
        return math.fsum(self.exponents)

    def as_dict(self) -> dict:
        return {
            "exponents": list(self.exponents),
            "transient_discarded": self.transient_discarded,
            "iterates_used": self.iterates_used,
            "last_window_drift": self.last_window_drift,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class AttractorReport:
    """Classification of long-run dynamics with the evidence behind it."""

    tag: Tag
    period: int | None = None
    spectrum: LyapunovSpectrum | None = None
    evidence: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag is Tag.PERIODIC_SINK and (self.period is None or self.period < 1):
            raise ValueError("PeriodicSink needs a period >= 1")

    @property
    def label(self) -> str:
        if self.tag is Tag.PERIODIC_SINK:
            return f"{self.tag.value}({self.period})"
        return self.tag.value

    def as_dict(self) -> dict:
        return {
            "tag": self.tag.value,
            "period": self.period,
            "spectrum": None if self.spectrum is None else self.spectrum.as_dict(),
            "evidence": self.evidence,
        }


def classify_spectrum(exponents, eps_pos=1e-3, eps_zero=1e-3) -> Tag:
    """Lyapunov-sign rules for a bounded, non-periodic orbit.

    Lorenz-like: positive top exponent, non-contracting 2D volumes and a
    contracting 3D volume. This is the spectrum-level reading of
    pseudo-hyperbolicity (strong contraction along one direction, area
    expansion transverse to it).
    """
    l1, l2, l3 = exponents
    if l1 > eps_pos:
        if l1 + l2 > -eps_zero and l1 + l2 + l3 < -eps_pos:
            return Tag.LORENZ_LIKE
        return Tag.CHAOTIC_OTHER
    if -eps_zero < l1 < eps_zero and l2 < -eps_pos:
        return Tag.INVARIANT_CURVE
    return Tag.UNDETERMINED


def spectrum_from_sums(sums, mark_sums, n, n_mark, n_transient, notes=()):
    """Turn accumulated log-stretch sums into a sorted spectrum."""
    exps = [s / n for s in sums]
    if n_mark > 0:
        early = [s / n_mark for s in mark_sums]
        drift = max(
            (abs(a - b) if math.isfinite(a) and math.isfinite(b) else 0.0)
            for a, b in zip(exps, early)
        )
    else:
        drift = math.inf
    exps.sort(reverse=True)
    return LyapunovSpectrum(tuple(exps), n_transient, n, drift, tuple(notes))


def _outside(s, radius):
    return not all(math.isfinite(v) and abs(v) <= radius for v in s)


def iterate_generic(step, s, n, radius):
    """Apply ``step`` n times; raise :class:`OrbitEscape` on leaving the box."""
    for k in range(n):
        s = step(s)
        if _outside(s, radius):
            raise OrbitEscape(f"orbit left radius {radius} at iterate {k + 1}", k + 1)
    return s


def lyapunov_generic(step, jacobian, s, n_transient, n_iterates, radius):
    """QR-based Lyapunov spectrum for an arbitrary smooth map.

    ``jacobian(s)`` must return the 3x3 differential at ``s`` as an array.
    Reorthonormalises every iterate.
    """
    s = iterate_generic(step, s, n_transient, radius)
    q = np.array(INITIAL_FRAME).reshape(3, 3).T
    sums = np.zeros(3)
    mark = np.zeros(3)
    n_mark = int(0.9 * n_iterates)
    for k in range(n_iterates):
        m = jacobian(s) @ q
        s = step(s)
        if _outside(s, radius):
            raise OrbitEscape(f"orbit left radius {radius} at iterate {k + 1}", k + 1)
        q, r = np.linalg.qr(m)
        with np.errstate(divide="ignore"):
            sums += np.log(np.abs(np.diag(r)))
        if k + 1 == n_mark:
            mark = sums.copy()
    spec = spectrum_from_sums(list(sums), list(mark), n_iterates, n_mark, n_transient)
    return spec, s


def find_period(step, s, q_max, tol):
    """Smallest q <= q_max with max-norm ``|step^q(s) - s| < tol``, else 0."""
    s0 = np.asarray(s, dtype=float)
    cur = s
    for q in range(1, q_max + 1):
        cur = step(cur)
        c = np.asarray(cur, dtype=float)
        if not np.all(np.isfinite(c)):
            return 0
        if np.max(np.abs(c - s0)) < tol:
            return q
    return 0


def refine_cycle(step, jacobian, s, q, tol=1e-12, max_iter=50):
    """Newton-refine a period-q point; return (point, monodromy matrix).

    Solves ``step^q(s) - s = 0`` with the chain-rule monodromy as Jacobian.
    """
    s = np.asarray(s, dtype=float)
    trace = []
    for _ in range(max_iter):
        cur = s
        mono = np.eye(3)
        for _k in range(q):
            mono = jacobian(cur) @ mono
            cur = np.asarray(step(cur), dtype=float)
        res = cur - s
        err = float(np.max(np.abs(res)))
        trace.append(err)
        if not math.isfinite(err):
            break
        if err < tol:
            return s, mono
        try:
            delta = np.linalg.solve(mono - np.eye(3), -res)
        except np.linalg.LinAlgError:
            break
        s = s + delta
    raise ComputationError(f"period-{q} Newton refinement failed", trace)


def classify_orbit(step, jacobian, s0, budget: Budget, volume_log=None):
    """Full classification pipeline for a map given as Python callables.

    Transient, closure test, Lyapunov spectrum, and a second closure test
    when every exponent is negative (slowly converging sinks).
    ``volume_log`` is the expected exponent sum, reported as evidence.
    """
    try:
        s = iterate_generic(step, s0, budget.n_transient, budget.escape_radius)
    except OrbitEscape as exc:
        return AttractorReport(Tag.DIVERGED, evidence={"escape_iterate": exc.iterate})
    report = _sink_report(step, jacobian, s, budget)
    if report is not None:
        return report
    try:
        spec, s_end = lyapunov_generic(
            step, jacobian, s, 0, budget.n_iterates, budget.escape_radius
        )
    except OrbitEscape as exc:
        return AttractorReport(
            Tag.DIVERGED, evidence={"escape_iterate": budget.n_transient + exc.iterate}
        )
    spec = replace(spec, transient_discarded=budget.n_transient)
    return _spectrum_report(step, jacobian, s_end, spec, budget, volume_log)


def _sink_report(step, jacobian, s, budget):
    q = find_period(step, s, budget.q_max, budget.closure_tol)
    if not q:
        return None
    try:
        point, mono = refine_cycle(step, jacobian, s, q)
    except ComputationError:
        return None
    mults = np.linalg.eigvals(mono)
    if np.all(np.abs(mults) < 1.0):
        return AttractorReport(
            Tag.PERIODIC_SINK,
            period=q,
            evidence={
                "cycle_point": [float(v) for v in point],
                "multiplier_moduli": sorted((float(abs(m)) for m in mults), reverse=True),
            },
        )
    return None


def _spectrum_report(step, jacobian, s_end, spec, budget, volume_log):
    evidence = {}
    if volume_log is not None and math.isfinite(volume_log):
        evidence["volume_defect"] = spec.total - volume_log
    if spec.exponents[0] < -budget.eps_pos:
        late = _sink_report(step, jacobian, s_end, budget)
        if late is not None:
            late.evidence.update(evidence)
            return AttractorReport(late.tag, late.period, spec, late.evidence)
    tag = classify_spectrum(spec.exponents, budget.eps_pos, budget.eps_zero)
    return AttractorReport(tag, None, spec, evidence)
