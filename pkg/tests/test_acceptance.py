"""Exit criteria, one test per criterion.

Tolerances and runtime limits are the ones fixed by the project
requirements; see the README section "Acceptance suite" for a summary.
"""

import math
import time

import gmpy2
import numpy as np
import pytest

from lorenz_forge import _mp, io
from lorenz_forge.dynamics import Tag
from lorenz_forge.henon3d import (
    Henon3DParams,
    default_seed,
    find_codim3_point,
    henon_jacobian,
    henon_step,
    lyapunov_spectrum,
    multipliers,
)
from lorenz_forge.errors import OrbitEscape
from lorenz_forge.hetero_model import Case, MuVector, build_model, demo_config
from lorenz_forge.rescaling import (
    MU_BOUNDS,
    RescaledParams,
    caseI_to_henon,
    from_henon,
    limit_map,
    params_forward,
    params_invert,
    params_invert_corrected,
    predicted_decay,
    residual_sup,
)
from lorenz_forge.return_map import (
    ReturnIndex,
    admissible_window,
    compose,
    precision_bits,
    return_jacobian,
    window_point,
)
from lorenz_forge.scanner import (
    Axis,
    DomainReport,
    GridSpec,
    HenonBox,
    IndexLadder,
    classify_limit,
    henon_scan,
    index_ladder,
    map_domains,
    verify_domain,
)

pytestmark = pytest.mark.acceptance

LORENZ_BOX = HenonBox((0.04, 0.06), (0.84, 0.86), (0.69, 0.71))


def truncated(ladder, max_sum):
    """The rungs of ``ladder`` with ``i + j <= max_sum``."""
    rungs = tuple(r for r in ladder.rungs if r.idx.i + r.idx.j <= max_sum)
    return IndexLadder(rungs, ladder.target_logJ, ladder.tolerance)


# ----------------------------------------------------------------------------
# 1. codim-3 point


def test_criterion_1_codim3_point():
    t0 = time.perf_counter()
    p, fp = find_codim3_point()
    elapsed = time.perf_counter() - t0
    # oracle: (rho+1)^2 (rho-1) = rho^3 + rho^2 - rho - 1 against
    # rho^3 + 2 z rho^2 - M2 rho - B gives z = 1/2, M2 = 1, B = 1; the diagonal
    # fixed point equation x^2 + (1 - B - M2) x - M1 = 0 at x = 1/2 gives M1
    z = 0.5
    m1_oracle = z * z + (1 - 1 - 1) * z
    assert p.b == 1.0 and p.m2 == 1.0
    assert abs(p.m1 - m1_oracle) <= 1e-10
    rho = sorted(multipliers(p, fp))
    assert max(abs(a - b) for a, b in zip(rho, (-1.0, -1.0, 1.0))) <= 1e-10
    assert elapsed < 1.0


# ----------------------------------------------------------------------------
# 2. constant Jacobian


def test_criterion_2_constant_jacobian():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    for _ in range(10):
        p = Henon3DParams(*rng.uniform(-2, 2, 2), rng.uniform(-1.5, 1.5))
        states = rng.uniform(-3, 3, (1000, 3))
        dets = np.linalg.det(np.array([henon_jacobian(s, p) for s in states]))
        assert np.max(np.abs(dets - p.b)) <= 1e-13

    found = []
    while len(found) < 10:
        b = rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 0.95)
        p = Henon3DParams(rng.uniform(-0.3, 0.4), rng.uniform(0.0, 1.0), b)
        try:
            spec = lyapunov_spectrum(p, default_seed(p), 1000, 1_000_000)
        except OrbitEscape:
            continue
        found.append((p, spec))
    for p, spec in found:
        assert spec.iterates_used == 1_000_000
        assert abs(spec.total - math.log(abs(p.b))) <= 1e-5
    assert time.perf_counter() - t0 < 60.0


# ----------------------------------------------------------------------------
# 3. limit-map structure


def test_criterion_3_limit_maps():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    for _ in range(1000):
        p = RescaledParams(*rng.uniform(-2, 2, 2), rng.uniform(0.1, 1.5))
        x = tuple(rng.uniform(-3, 3, 3))
        assert limit_map(Case.II, p, x) == limit_map(Case.III, p, x)

    p = RescaledParams(0.05, -0.85, 0.7)
    hp, h = caseI_to_henon(p)
    assert (hp.m1, hp.m2, hp.b) == (p.M1, -p.M2, p.Bij)
    worst = 0.0
    for _ in range(1000):
        x = tuple(rng.uniform(-2, 2, 3))
        lhs = h(limit_map(Case.I, p, x))
        rhs = henon_step(h(x), hp)
        worst = max(worst, max(abs(a - b) for a, b in zip(lhs, rhs)))
    assert worst <= 1e-12
    assert time.perf_counter() - t0 < 1.0


# ----------------------------------------------------------------------------
# 4. return-map Jacobian identity


@pytest.mark.parametrize("case", list(Case))
def test_criterion_4_return_jacobian(case):
    t0 = time.perf_counter()
    m = build_model(demo_config(case))
    assert all(q == ((0.0,) * 3,) * 3 for q in (*m.t12.quad, *m.t21.quad))

    for ij in [(1, 1), (4, 8), (7, 3), (12, 25), (16, 30), (20, 40)]:
        idx = ReturnIndex(*ij)
        with _mp.precision(precision_bits(m, idx)):
            product = (
                gmpy2.mpfr(m.t12.det) * gmpy2.mpfr(m.t21.det)
                * gmpy2.mpfr(m.spectrum1.jacobian) ** idx.i * gmpy2.mpfr(m.spectrum2.jacobian) ** idx.j
            )
            # on the tangency level v = v_minus, where the (v - v_minus) factor
            # of the fold in T21 drops out of the differential
            for s in [(0.0, 0.0, 0.0), (0.2, -0.3, 0.0), (-0.9, 0.7, 0.0)]:
                p = window_point(m, idx, [gmpy2.mpfr(v) for v in s])
                d = _mp.det3(return_jacobian(m, idx, p).tolist())
                assert abs(float(d / product) - 1.0) <= 1e-10

    # finite-difference cross-check of the full Jacobian
    mm = build_model(demo_config(case), MuVector(0.001, 0.0, 0.0))
    for ij in [(3, 5), (5, 11), (10, 21)]:
        idx = ReturnIndex(*ij)
        with _mp.precision(precision_bits(mm, idx)):
            p = window_point(mm, idx, [gmpy2.mpfr(v) for v in (0.1, 0.2, -0.3)])
            jac = np.array(return_jacobian(mm, idx, p), dtype=float)
            # steps that move the image by about 1e-12 keep every stage inside
            # its chart; outputs are differenced in mpfr before rounding
            hs = [gmpy2.mpfr(1e-12) / max(1.0, float(np.linalg.norm(jac[:, k]))) for k in range(3)]
            hs[2] = min(hs[2], gmpy2.mpfr(1e-12) * admissible_window(mm, idx).y_width)
            for k in range(3):
                a, b = list(p), list(p)
                a[k] += hs[k]
                b[k] -= hs[k]
                fa, fb = compose(mm, idx, a), compose(mm, idx, b)
                col = np.array([float((u - v) / (2 * hs[k])) for u, v in zip(fa, fb)])
                assert np.linalg.norm(col - jac[:, k]) <= 1e-5 * np.linalg.norm(jac[:, k])
    assert time.perf_counter() - t0 < 10.0


# ----------------------------------------------------------------------------
# 5. rescaling convergence


@pytest.mark.parametrize("case", list(Case))
def test_criterion_5_rescaling_convergence(case):
    t0 = time.perf_counter()
    cfg = demo_config(case)
    target = from_henon(case, LORENZ_BOX.center)
    assert target.Bij == pytest.approx(0.7)
    ladder = index_ladder(build_model(cfg), 0.7, 10)
    rows = []
    for rung in ladder.rungs:
        try:
            _, rmap = params_invert_corrected(cfg, rung.idx, target)
        except Exception:  # low rungs outside the unfolding box
            continue
        res = residual_sup(rmap.model, rung.idx, rescaled=rmap, box_halfwidth=2.0, grid_n=5)
        rows.append((rung.idx.i, res, predicted_decay(rmap.model, rung.idx)))
    assert len(rows) >= 5
    res = [r for _, r, _ in rows]
    assert all(b < a for a, b in zip(res, res[1:])), res
    x = np.array([i for i, _, _ in rows], dtype=float)
    got = np.polyfit(x, np.log(res), 1)[0]
    want = np.polyfit(x, np.log([p for _, _, p in rows]), 1)[0]
    assert 1 / 3 <= got / want <= 3
    assert time.perf_counter() - t0 < 120.0


# ----------------------------------------------------------------------------
# 6. parameter round trip


@pytest.mark.parametrize("case", list(Case))
def test_criterion_6_parameter_round_trip(case):
    t0 = time.perf_counter()
    cfg = demo_config(case)
    idx = index_ladder(build_model(cfg), 0.7, 6, min_rung=6).indices[0]
    rng = np.random.default_rng(6)
    for _ in range(100):
        mu = MuVector(*(rng.uniform(-1, 1, 3) * np.array(MU_BOUNDS)))
        target = params_forward(build_model(cfg, mu), idx)
        back = params_invert(cfg, idx, case, target)
        for a, b in zip(back.as_tuple(), mu.as_tuple()):
            assert float(a) == pytest.approx(b, rel=1e-8)
    assert time.perf_counter() - t0 < 10.0


# ----------------------------------------------------------------------------
# 7. desk-scale reproduction of the main construction


@pytest.mark.parametrize("case", list(Case))
def test_criterion_7_domains_carry_lorenz_attractors(case):
    t0 = time.perf_counter()
    # the target box is Lorenz-like on the Henon side
    for b in LORENZ_BOX.b:
        grid = GridSpec(Axis("m1", *LORENZ_BOX.m1, 3), Axis("m2", *LORENZ_BOX.m2, 3), {"b": b})
        assert all(c.report.tag is Tag.LORENZ_LIKE for c in henon_scan(grid))

    cfg = demo_config(case)
    ladder = truncated(index_ladder(build_model(cfg), LORENZ_BOX.center.b, 60), 80)
    reports = map_domains(cfg, case, ladder, LORENZ_BOX, verify=False)

    # centers decay toward the origin: strict decay after rung 2
    later = [r for r in reports[2:] if r.mu_center is not None]
    assert len(later) >= 10
    norms = [max(abs(float(v)) for v in r.mu_center.as_tuple()) for r in later]
    assert all(b < a for a, b in zip(norms, norms[1:])), norms
    diameters = [r.diameter for r in later]
    assert all(b < a for a, b in zip(diameters, diameters[1:]))

    # first rung (in ladder order) whose return map carries the attractor
    curve = []
    confirmed = None
    for rep in reports:
        if rep.residual is None or not rep.residual < 1e-3:
            continue
        rep.verification = verify_domain(cfg, case, rep)
        curve.append((tuple(rep.idx), rep.residual, rep.verification.tag.value))
        if rep.confirmed:
            confirmed = rep
            break
    assert confirmed is not None, f"no confirming rung with i + j <= 80; residual curve {curve}"
    assert confirmed.residual < 1e-3
    assert time.perf_counter() - t0 < 1800.0


# ----------------------------------------------------------------------------
# 8. cross-classification


def test_criterion_8_cross_classification():
    t0 = time.perf_counter()
    grid = GridSpec(Axis("m1", -0.3, 0.2, 21), Axis("m2", 0.7, 1.2, 21), {"b": 0.7})
    cells = henon_scan(grid)
    sinks = [c.params for c in cells if c.report.tag is Tag.PERIODIC_SINK]
    lorenz = [c.params for c in cells if c.report.tag is Tag.LORENZ_LIKE]
    assert len(sinks) >= 25 and len(lorenz) >= 25

    def spread(items, k):
        pick = np.linspace(0, len(items) - 1, k).round().astype(int)
        return [items[n] for n in pick]

    targets = spread(sinks, 25) + spread(lorenz, 25)
    case = Case.I
    cfg = demo_config(case)
    idx = ReturnIndex(8, 17)
    compared, agree, log = 0, 0, []
    for hp in targets:
        target = from_henon(case, hp)
        mu, rmap = params_invert_corrected(cfg, idx, target)
        res = residual_sup(rmap.model, idx, rescaled=rmap)
        if not res < 1e-3:
            continue
        ret = verify_domain(cfg, case, DomainReport(idx, target, mu_corrected=mu))
        lim = classify_limit(case, target)
        compared += 1
        agree += ret.tag is lim.tag
        if ret.tag is not lim.tag:
            log.append((hp, res, ret.tag.value, lim.tag.value))
    assert compared >= 40
    assert agree >= 0.8 * compared, f"{agree}/{compared} agree; disagreements {log}"
    assert time.perf_counter() - t0 < 1800.0


# ----------------------------------------------------------------------------
# 9. determinism


def test_criterion_9_determinism():
    grid = GridSpec(Axis("m1", -0.1, 0.15, 5), Axis("m2", 0.75, 0.9, 4), {"b": 0.7})
    scans = [io.dumps(henon_scan(grid, threads=t)) for t in (1, 1, 4)]
    assert scans[0] == scans[1] == scans[2]

    cfg = demo_config(Case.II)
    ladder = index_ladder(build_model(cfg), 0.7, 5, min_rung=4)
    runs = [io.dumps(map_domains(cfg, Case.II, ladder, LORENZ_BOX, threads=t)) for t in (1, 1, 3)]
    assert runs[0] == runs[1] == runs[2]
    assert '"verification": {' in runs[0]
