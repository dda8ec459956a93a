"""Parameter-space exploration and domain verification.

* :func:`henon_scan` classifies a 2D grid of 3D Henon parameters.
* :func:`index_ladder` picks index pairs ``(i, j)`` holding ``J_ij`` near a
  target, with the ``mu3`` that hits it exactly.
* :func:`map_domains` maps a Henon-side parameter box to parameter domains
  of the model, one per rung, and :func:`verify_domain` classifies the
  composed return map there.

Work is spread over a thread pool; results are always collected in input
order, so the output does not depend on the number of threads.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import AttractorReport, Budget, Tag, classify_orbit
from .errors import ChartExit, ComputationError, DomainError, LorenzForgeError
from .henon3d import Henon3DParams, classify_dynamics, default_seed
from .hetero_model import Case, MuVector, build_model
from .rescaling import (
    RescaledMap,
    RescaledParams,
    from_henon,
    limit_jacobian,
    limit_map,
    params_invert,
    params_invert_corrected,
    residual_sup,
    to_henon,
)
from .return_map import ReturnIndex, minimal_indices

HENON_AXES = ("m1", "m2", "b")

#: iteration budget for classifying return maps (each step is an
#: extended-precision composition, so it is far smaller than the Henon one)
VERIFY_BUDGET = Budget(n_transient=2_000, n_iterates=10_000)


def default_threads() -> int:
    """``LORENZ_FORGE_THREADS`` if set, else the available parallelism."""
    env = os.environ.get("LORENZ_FORGE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise DomainError(f"LORENZ_FORGE_THREADS must be an integer, got {env!r}") from exc
        if n < 1:
            raise DomainError("LORENZ_FORGE_THREADS must be at least 1")
        return n
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


def _ordered_map(fn, items, threads):
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise DomainError("threads must be at least 1")
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ----------------------------------------------------------------------------
# Henon grids


class SeedPolicy(str, enum.Enum):
    FIXED_POINT = "fixed-point"  # default_seed: a fixed point offset by 1e-3
    ORIGIN = "origin"


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.name not in HENON_AXES:
            raise DomainError(f"axis name must be one of {HENON_AXES}, got {self.name!r}")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise DomainError(f"axis {self.name}: need finite min < max")
        if int(self.count) < 2:
            raise DomainError(f"axis {self.name}: count must be at least 2")
        object.__setattr__(self, "count", int(self.count))

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


@dataclass(frozen=True)
class GridSpec:
    """Two scanned Henon parameters, the third fixed."""

    axis1: Axis
    axis2: Axis
    fixed: dict
    budget: Budget = field(default_factory=Budget)
    seed_policy: SeedPolicy = SeedPolicy.FIXED_POINT

    def __post_init__(self):
        if self.axis1.name == self.axis2.name:
            raise DomainError("the two axes must differ")
        missing = set(HENON_AXES) - {self.axis1.name, self.axis2.name} - set(self.fixed)
        if missing:
            raise DomainError(f"no value for parameter {sorted(missing)[0]}")
        object.__setattr__(self, "seed_policy", SeedPolicy(self.seed_policy))

    def cells(self) -> list[Henon3DParams]:
        out = []
        for a in self.axis1.values():
            for b in self.axis2.values():
                vals = {**self.fixed, self.axis1.name: float(a), self.axis2.name: float(b)}
                out.append(Henon3DParams(vals["m1"], vals["m2"], vals["b"]))
        return out


@dataclass(frozen=True)
class ScanCell:
    params: Henon3DParams
    report: AttractorReport


def _seed(p, policy):
    if policy is SeedPolicy.ORIGIN:
        return (0.0, 0.0, 0.0)
    return default_seed(p)


def henon_scan(grid: GridSpec, threads=None) -> list[ScanCell]:
    """Classify every cell of ``grid``; row-major over ``(axis1, axis2)``."""

    def one(p):
        try:
            rep = classify_dynamics(p, _seed(p, grid.seed_policy), grid.budget)
        except LorenzForgeError as exc:
            rep = AttractorReport(Tag.UNDETERMINED, evidence={"error": str(exc)})
        return ScanCell(p, rep)

    return _ordered_map(one, grid.cells(), threads)


# ----------------------------------------------------------------------------
# index ladders


@dataclass(frozen=True)
class Rung:
    idx: ReturnIndex
    defect: float  # i ln J1 + j ln J2 + ln(J12 J21) - ln target, at mu = 0
    mu3: float  # mu3 that makes J_ij equal the target


@dataclass(frozen=True)
class IndexLadder:
    rungs: tuple
    target_logJ: float
    tolerance: float

    def __post_init__(self):
        sums = [r.idx.i + r.idx.j for r in self.rungs]
        if any(b <= a for a, b in zip(sums, sums[1:])):
            raise DomainError("rungs must be strictly increasing in i + j")
        for r in self.rungs:
            if abs(r.defect) > self.tolerance:
                raise DomainError(f"rung {tuple(r.idx)} has defect {r.defect} above tolerance")

    @property
    def indices(self) -> list[ReturnIndex]:
        return [r.idx for r in self.rungs]


def _ln_j_parts(model):
    return (
        math.log(model.spectrum1.jacobian),
        math.log(model.spectrum2.jacobian),
        math.log(model.t12.det * model.t21.det),
    )


def index_ladder(model, target_Bij: float, max_rung: int, min_rung: int | None = None,
                 mu3_bound: float = 0.2) -> IndexLadder:
    """Index pairs holding ``J_ij = J12 J21 J1^i J2^j`` near ``target_Bij``.

    For each ``i`` from ``min_rung`` (default: the smallest admissible) to
    ``max_rung`` the ``j`` minimising ``|ln J_ij - ln target|`` is taken; the
    leftover defect is removed by ``mu3`` (reported per rung), and rungs
    needing ``|mu3| > mu3_bound`` are dropped.

    Raises
    ------
    DomainError
        If no rung qualifies.
    """
    if not target_Bij > 0:
        raise DomainError("target_Bij must be positive")
    if model.t12.det * model.t21.det <= 0:
        raise DomainError("J12 J21 must be positive to reach a positive Bij")
    ln_j1, ln_j2, ln_g = _ln_j_parts(model)
    target = math.log(target_Bij)
    i0, j0 = minimal_indices(model)
    start = i0 if min_rung is None else max(i0, int(min_rung))
    rungs = []
    for i in range(start, int(max_rung) + 1):
        j = max(j0, round((target - ln_g - i * ln_j1) / ln_j2))
        defect = i * ln_j1 + j * ln_j2 + ln_g - target
        ln_j2_new = (target - ln_g - i * ln_j1) / j
        if ln_j2_new <= 0:
            continue
        mu3 = -ln_j1 / ln_j2_new - model.base_S0
        if abs(mu3) > mu3_bound:
            continue
        if rungs and i + j <= rungs[-1].idx.i + rungs[-1].idx.j:
            continue
        rungs.append(Rung(ReturnIndex(i, j), defect, mu3))
    if not rungs:
        raise DomainError("no rung reaches the target Jacobian within the mu3 bound")
    return IndexLadder(tuple(rungs), target, 0.5 * ln_j2 + 1e-12)


# ----------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class HenonBox:
    """Axis-aligned box of 3D Henon parameters ``(M1, M2, B)``."""

    m1: tuple[float, float]
    m2: tuple[float, float]
    b: tuple[float, float]

    def __post_init__(self):
        for name in HENON_AXES:
            lo, hi = getattr(self, name)
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise DomainError(f"box {name}: need finite min <= max")
            object.__setattr__(self, name, (float(lo), float(hi)))

    @property
    def center(self) -> Henon3DParams:
        return Henon3DParams(*(0.5 * (lo + hi) for lo, hi in (self.m1, self.m2, self.b)))

    def corners(self) -> list[Henon3DParams]:
        return [Henon3DParams(a, b, c) for a in self.m1 for b in self.m2 for c in self.b]


@dataclass
class DomainReport:
    """Parameter domain of the model realising a Henon-side target box.

    ``mu_center`` is the leading-order inverse of the box center (it
    round-trips through :func:`~lorenz_forge.rescaling.params_forward`) and
    ``mu_box`` the half-widths obtained by pushing the box corners through
    the same inverse. ``mu_corrected`` is where the *measured* limit
    parameters of the return map equal the box center; the residual and the
    verification are evaluated there.
    """

    idx: ReturnIndex
    target: RescaledParams
    mu_center: MuVector | None = None
    mu_box: tuple | None = None
    mu_corrected: MuVector | None = None
    residual: float | None = None
    verification: AttractorReport | None = None
    error: str | None = None

    @property
    def confirmed(self) -> bool:
        return self.verification is not None and self.verification.tag is Tag.LORENZ_LIKE

    @property
    def diameter(self) -> float | None:
        return None if self.mu_box is None else 2.0 * max(self.mu_box)


def _leading_box(config, idx, case, box, center_mu):
    widths = [0.0, 0.0, 0.0]
    for corner in box.corners():
        mu = params_invert(config, idx, case, from_henon(case, corner))
        for k, (a, b) in enumerate(zip(mu.as_tuple(), center_mu.as_tuple())):
            widths[k] = max(widths[k], abs(float(a - b)))
    return tuple(widths)


def map_domains(config, case, ladder: IndexLadder, box: HenonBox, verify: bool = True,
                budget: Budget | None = None, threads=None, residual_box=3.0, residual_grid=7) -> list[DomainReport]:
    """One :class:`DomainReport` per rung of ``ladder`` (failures recorded)."""
    case = Case(case)
    target = from_henon(case, box.center)

    def one(idx):
        rep = DomainReport(idx, target)
        try:
            rep.mu_center = params_invert(config, idx, case, target)
            rep.mu_box = _leading_box(config, idx, case, box, rep.mu_center)
            rep.mu_corrected, rmap = params_invert_corrected(config, idx, target)
            rep.residual = residual_sup(rmap.model, idx, rescaled=rmap, box_halfwidth=residual_box,
                                        grid_n=residual_grid)
            if verify:
                rep.verification = _verify(rmap, box.center, budget)
        except (LorenzForgeError, ZeroDivisionError) as exc:
            rep.error = f"{type(exc).__name__}: {exc}"
        return rep

    return _ordered_map(one, ladder.indices, threads)


def rescaled_seed(case, henon_params: Henon3DParams):
    """Henon default seed expressed in limit-map coordinates."""
    _, h = to_henon(case, from_henon(case, henon_params))
    return h.inverse(default_seed(henon_params))


def _verify(rmap: RescaledMap, henon_params, budget, seed=None):
    budget = budget or VERIFY_BUDGET
    seed = rescaled_seed(rmap.case, henon_params) if seed is None else tuple(float(v) for v in seed)
    i, j = rmap.idx
    meta = {"iterates_per_return": i + j + 2, "exponents_per": "return", "seed": list(seed)}

    def step(x):
        return np.array(rmap(x))

    try:
        rep = classify_orbit(step, rmap.jacobian, seed, budget, math.log(abs(rmap.effective.Bij)))
    except ChartExit as exc:
        return AttractorReport(Tag.UNDETERMINED, evidence={**meta, "chart_exit": exc.stage, "detail": str(exc)})
    except ComputationError as exc:
        return AttractorReport(Tag.UNDETERMINED, evidence={**meta, "error": str(exc)})
    rep.evidence.update(meta)
    return rep


def verify_domain(config, case, report: DomainReport, budget: Budget | None = None,
                  seed=None) -> AttractorReport:
    """Classify the composed return map of ``report``'s rung.

    The map is taken at ``report.mu_corrected`` (computed here if absent),
    where its measured limit parameters equal ``report.target``. The orbit
    starts at ``seed`` (rescaled coordinates), by default the Henon default
    seed carried into the calibrated rescaled coordinates; Lyapunov
    exponents are per return. A chart exit gives ``Undetermined`` with the
    stage in the evidence.
    """
    model = build_model(config)
    if Case(case) is not model.case_tag:
        raise DomainError(f"configuration is {model.case_tag.value}, not {Case(case).value}")
    if report.mu_corrected is None:
        _, rmap = params_invert_corrected(config, report.idx, report.target)
    else:
        rmap = RescaledMap(build_model(config, report.mu_corrected), report.idx)
    hp, _ = to_henon(model.case_tag, report.target)
    return _verify(rmap, hp, budget, seed)


def classify_limit(case, params: RescaledParams, budget: Budget | None = None, seed=None) -> AttractorReport:
    """Classify the limit map itself (same rules and budget as verification)."""
    budget = budget or VERIFY_BUDGET
    hp, _ = to_henon(case, params)
    seed = rescaled_seed(case, hp) if seed is None else seed

    def step(x):
        return np.array(limit_map(case, params, x))

    def jac(x):
        return limit_jacobian(case, params, x)

    return classify_orbit(step, jac, seed, budget, math.log(abs(params.Bij)) if params.Bij else None)


__all__ = [
    "Axis",
    "DomainReport",
    "GridSpec",
    "HenonBox",
    "IndexLadder",
    "Rung",
    "ScanCell",
    "SeedPolicy",
    "VERIFY_BUDGET",
    "classify_limit",
    "default_threads",
    "henon_scan",
    "index_ladder",
    "map_domains",
    "rescaled_seed",
    "verify_domain",
]
