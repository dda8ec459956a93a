import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lorenz_forge import kernels
from lorenz_forge.henon3d import INITIAL_FRAME

needs_cython = pytest.mark.skipif("cython" not in kernels.BACKENDS, reason="compiled kernels not built")

PY = kernels.BACKENDS["python"]

param = st.floats(-1.5, 1.5, allow_nan=False)
coord = st.floats(-1.0, 1.0, allow_nan=False)


def same(a, b):
    """Bitwise equality of result tuples (nan == nan, -0.0 != 0.0)."""
    assert len(a) == len(b)
    for u, v in zip(a, b):
        if isinstance(u, float):
            assert math.copysign(1.0, u) == math.copysign(1.0, v)
            assert (math.isnan(u) and math.isnan(v)) or u == v
        else:
            assert u == v


def test_active_backend_is_registered():
    assert kernels.BACKEND in kernels.BACKENDS
    assert kernels.iterate is kernels.BACKENDS[kernels.BACKEND].iterate


def test_iterate_zero_map_stays_at_origin():
    assert PY.iterate(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 10, 1e6) == (0.0, 0.0, 0.0, 10, 0)


def test_iterate_reports_escape_and_nonfinite():
    *_, k, flag = PY.iterate(5.0, 0.0, 0.5, 3.0, 0.0, 0.0, 1000, 100.0)
    assert flag == kernels.ESCAPED and k < 1000
    *_, flag = PY.iterate(0.0, 0.0, 0.0, 0.0, 0.0, math.inf, 3, math.inf)
    assert flag == kernels.NONFINITE


def test_first_return_finds_fixed_point():
    # (0,0,0) is fixed for the zero map; (-1,-1,-1) too
    assert PY.first_return(0.0, 0.0, 0.0, -1.0, -1.0, -1.0, 5, 1e-12) == 1
    assert PY.first_return(0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 2, 1e-12) == 0


def test_lyapunov_sum_is_log_det():
    b = 0.3
    s1, s2, s3, *_rest = PY.lyapunov(1.4, 0.0, b, 0.1, 0.1, 0.1, 2000, 1e6, 1000, INITIAL_FRAME)
    assert s1 + s2 + s3 == pytest.approx(2000 * math.log(b), rel=1e-12)


@needs_cython
@settings(max_examples=60, deadline=None)
@given(param, param, param, coord, coord, coord)
def test_iterate_backends_bit_identical(m1, m2, b, x, y, z):
    cy = kernels.BACKENDS["cython"]
    same(PY.iterate(m1, m2, b, x, y, z, 500, 1e6), cy.iterate(m1, m2, b, x, y, z, 500, 1e6))


@needs_cython
@settings(max_examples=60, deadline=None)
@given(param, param, param, coord, coord, coord)
def test_first_return_backends_bit_identical(m1, m2, b, x, y, z):
    cy = kernels.BACKENDS["cython"]
    assert PY.first_return(m1, m2, b, x, y, z, 50, 1e-6) == cy.first_return(m1, m2, b, x, y, z, 50, 1e-6)


@needs_cython
@settings(max_examples=40, deadline=None)
@given(param, param, st.floats(-1.0, 1.0, allow_nan=False), coord, coord, coord)
def test_lyapunov_backends_bit_identical(m1, m2, b, x, y, z):
    cy = kernels.BACKENDS["cython"]
    args = (m1, m2, b, x, y, z, 300, 1e6, 150, INITIAL_FRAME)
    same(PY.lyapunov(*args), cy.lyapunov(*args))


@needs_cython
def test_lyapunov_backends_bit_identical_at_rank_deficiency():
    cy = kernels.BACKENDS["cython"]
    args = (1.4, 0.3, 0.0, 0.1, 0.1, 0.1, 5000, 1e6, 2500, INITIAL_FRAME)
    out = PY.lyapunov(*args)
    assert out[2] == -math.inf
    same(out, cy.lyapunov(*args))
