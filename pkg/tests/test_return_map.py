import math
from dataclasses import replace

import gmpy2
import numpy as np
import pytest

from lorenz_forge import _mp
from lorenz_forge.errors import ChartExit, DomainError
from lorenz_forge.hetero_model import Case, MuVector, apply_T12, apply_T21, build_model, demo_config
from lorenz_forge.rescaling import from_henon, params_invert_corrected
from lorenz_forge.henon3d import Henon3DParams
from lorenz_forge.return_map import (
    ReturnIndex,
    admissible_window,
    compose,
    compose_stages,
    cross_map,
    find_fixed_point,
    jacobian_product,
    minimal_indices,
    physical_to_cross,
    precision_bits,
    return_jacobian,
    window_point,
)


@pytest.fixture(scope="module")
def model1():
    return build_model(demo_config(Case.I))


def product_oracle(model, idx):
    """J12 J21 J1^i J2^j as a product of exact mpfr factors."""
    return (
        gmpy2.mpfr(model.t12.det) * gmpy2.mpfr(model.t21.det)
        * gmpy2.mpfr(model.spectrum1.jacobian) ** idx.i * gmpy2.mpfr(model.spectrum2.jacobian) ** idx.j
    )


def test_index_validation():
    with pytest.raises(DomainError):
        ReturnIndex(0, 3)


def test_window_example(model1):
    w = admissible_window(model1, ReturnIndex(10, 10))
    s = 2.5**-10
    assert w.y_interval[0] == pytest.approx(0.5 * s, rel=1e-15)
    assert w.y_interval[1] == pytest.approx(1.5 * s, rel=1e-15)
    assert w.y_width == pytest.approx(2 * 0.5 * s, rel=1e-14)


@pytest.mark.parametrize("i", [2, 5, 11, 20])
def test_window_width_ratio(model1, i):
    a = admissible_window(model1, ReturnIndex(i, 4)).y_width
    b = admissible_window(model1, ReturnIndex(i + 1, 4)).y_width
    assert b / a == pytest.approx(1 / 2.5, rel=1e-14)


def test_index_below_i0_rejected():
    cfg = demo_config(Case.I)
    cfg = replace(cfg, t12=replace(cfg.t12, y_minus=2.0))
    m = build_model(cfg)
    i0, j0 = minimal_indices(m)
    assert i0 == 2
    with pytest.raises(DomainError, match="too small for chart radii"):
        admissible_window(m, ReturnIndex(i0 - 1, j0))
    admissible_window(m, ReturnIndex(i0, j0))


@pytest.mark.parametrize("case", list(Case))
def test_window_points_complete_composition(case):
    m = build_model(demo_config(case), MuVector(0.001, 0.0, 0.0))
    idx = ReturnIndex(5, 9)
    rng = np.random.default_rng(7)
    with _mp.precision(precision_bits(m, idx)):
        for s in rng.uniform(-1, 1, size=(100, 3)):
            p = window_point(m, idx, [gmpy2.mpfr(float(v)) for v in s])
            stages = compose_stages(m, idx, p)  # raises on any chart exit
            assert len(stages) == 5


def test_base_orbit_hand_composition(model1):
    m = build_model(demo_config(Case.I), MuVector(0.002, 0.0, 0.0))
    idx = ReturnIndex(3, 4)
    i, j = idx
    y = m.t12.y_minus * m.spectrum1.expanding**-i
    t12, t21 = m.t12, m.t21
    # by hand: T01^i lands on (0, 0, y_minus), T12 on (u_plus, 0),
    # T02^j contracts u and leaves v = 0, T21 evaluates its Taylor form
    u = (m.spectrum2.contracting[0] ** j * t12.u_plus[0], m.spectrum2.contracting[1] ** j * t12.u_plus[1])
    dv = -t21.v_minus
    x1 = t21.x_plus[0] + t21.A[0][0] * u[0] + t21.A[0][1] * u[1] + t21.b[0] * dv
    x2 = t21.x_plus[1] + t21.A[1][0] * u[0] + t21.A[1][1] * u[1] + t21.b[1] * dv
    yb = 0.002 + t21.c[0] * u[0] + t21.c[1] * u[1] + t21.d * dv * dv
    got = compose(m, idx, (0.0, 0.0, y), check=False)
    assert got == pytest.approx((x1, x2, yb), abs=1e-14)


def test_associativity(model1):
    idx = ReturnIndex(4, 8)
    i, j = idx
    m = model1
    with _mp.precision(precision_bits(m, idx)):
        p = window_point(m, idx, [gmpy2.mpfr(v) for v in (0.3, -0.2, 0.4)])
        left = apply_T21(m, m.spectrum2.iterate(j, apply_T12(m, m.spectrum1.iterate(i, p))))
        inner = m.spectrum2.iterate(j, apply_T12(m, m.spectrum1.iterate(i, p)))
        right = apply_T21(m, inner)
        whole = compose(m, idx, p)
        for a, b, c in zip(left, right, whole):
            assert abs(a - b) <= 1e-14 and abs(a - c) <= 1e-14


@pytest.mark.parametrize("case", list(Case))
@pytest.mark.parametrize("ij", [(4, 8), (9, 17)])
def test_det_identity_on_tangency_level(case, ij):
    m = build_model(demo_config(case))
    idx = ReturnIndex(*ij)
    with _mp.precision(precision_bits(m, idx)):
        p = window_point(m, idx, [gmpy2.mpfr(v) for v in (0.35, -0.4, 0.0)])
        d = _mp.det3(return_jacobian(m, idx, p).tolist())
        ratio = d / product_oracle(m, idx)
        assert abs(float(ratio) - 1.0) <= 1e-12
    assert jacobian_product(m, idx) == pytest.approx(float(product_oracle(m, idx)), rel=1e-12)


def test_det_ratio_one_increment_of_i(model1):
    m = model1
    s = (0.2, -0.1, 0.3)
    with _mp.precision(precision_bits(m, ReturnIndex(8, 8))):
        dets = []
        for i in (6, 7):
            idx = ReturnIndex(i, 8)
            p = window_point(m, idx, [gmpy2.mpfr(v) for v in s])
            dets.append(_mp.det3(return_jacobian(m, idx, p).tolist()))
        assert float(dets[1] / dets[0]) == pytest.approx(m.spectrum1.jacobian, rel=1e-12)


@pytest.mark.parametrize("case", list(Case))
def test_jacobian_matches_finite_differences(case):
    m = build_model(demo_config(case), MuVector(0.001, 0.0, 0.0))
    idx = ReturnIndex(3, 5)
    with _mp.precision(precision_bits(m, idx)):
        p = window_point(m, idx, [gmpy2.mpfr(v) for v in (0.1, 0.2, -0.3)])
        jac = np.array(return_jacobian(m, idx, p), dtype=float)
        width = admissible_window(m, idx).y_width
        hs = (1e-6, 1e-6, 1e-6 * width)
        for k in range(3):
            a, b = list(p), list(p)
            a[k] += hs[k]
            b[k] -= hs[k]
            col = np.array([float(v) for v in compose(m, idx, a)]) - np.array([float(v) for v in compose(m, idx, b)])
            col /= 2 * hs[k]
            assert np.linalg.norm(col - jac[:, k]) <= 1e-6 * np.linalg.norm(jac[:, k])


def test_float_and_mpfr_jacobian_types(model1):
    idx = ReturnIndex(2, 3)
    p = window_point(model1, idx, (0.0, 0.0, 0.1))
    assert return_jacobian(model1, idx, p).dtype == float
    with _mp.precision(200):
        pm = window_point(model1, idx, [gmpy2.mpfr(v) for v in (0.0, 0.0, 0.1)])
        assert return_jacobian(model1, idx, pm).dtype == object


def test_chart_exit_names_stage(model1):
    m = model1
    idx = ReturnIndex(4, 8)
    with pytest.raises(ChartExit) as e:
        compose(m, idx, (m.t21.x_plus[0], m.t21.x_plus[1], 0.4))
    assert e.value.stage == "T01^i"
    y = m.t12.y_minus * m.spectrum1.expanding**-4
    with pytest.raises(ChartExit) as e:
        compose(m, idx, (m.t21.x_plus[0], m.t21.x_plus[1], y))
    assert e.value.stage == "T02^j"
    with pytest.raises(ChartExit) as e:
        compose(m, idx, (m.t21.x_plus[0] + 0.6, m.t21.x_plus[1], y))
    assert e.value.stage == "Pi1^+"


@pytest.mark.parametrize("case", [Case.I, Case.II])
def test_fixed_point_of_return_map(case):
    cfg = demo_config(case)
    idx = ReturnIndex(5, 11)
    target = from_henon(case, Henon3DParams(0.05, 0.85, 0.7))
    mu, _ = params_invert_corrected(cfg, idx, target)
    m = build_model(cfg, mu)
    phys, z = find_fixed_point(m, idx)
    with _mp.precision(precision_bits(m, idx)):
        zb = cross_map(m, idx, z)
        assert max(abs(a - b) for a, b in zip(zb, z)) < 1e-12
        z2 = physical_to_cross(m, idx, phys)
        assert max(abs(a - b) for a, b in zip(z2, z)) < 1e-20
