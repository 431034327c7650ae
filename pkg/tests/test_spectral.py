import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bornbarrier.errors import EmptyRegionList, InsufficientExtent, InsufficientResolution
from bornbarrier.scene import Region
from bornbarrier.spectral import (
    characteristic_value,
    gaussian_transform,
    multi_region_transform,
    numeric_transform,
)

PI32 = math.pi**1.5
UNIT = Region((0, 0, 0), (1, 1, 1))


def test_characteristic_examples():
    assert characteristic_value(UNIT, (0, 0, 0)) == 1.0
    assert characteristic_value(UNIT, (1, 0, 0)) == pytest.approx(math.exp(-1), rel=1e-15)
    far = characteristic_value(UNIT, (5, 0, 0))
    assert 0 < far < 1e-10


def test_characteristic_anisotropic():
    r = Region((1, -1, 2), (0.5, 2, 3))
    x = np.array([1.5, 1.0, 5.0])
    assert characteristic_value(r, x) == pytest.approx(math.exp(-1 - 1 - 1), rel=1e-14)


def test_gaussian_transform_examples():
    assert gaussian_transform(UNIT, (0, 0, 0)) == pytest.approx(5.568328, abs=1e-6)
    assert gaussian_transform(UNIT, (2, 0, 0)) == pytest.approx(PI32 * math.exp(-1), rel=1e-14)
    assert gaussian_transform(UNIT, (2, 0, 0)).real == pytest.approx(2.048473, abs=1e-6)
    shifted = Region((1, 0, 0), (1, 1, 1))
    p = (math.pi, 0, 0)
    assert gaussian_transform(shifted, p).real == pytest.approx(-gaussian_transform(UNIT, p).real, rel=1e-12)


def test_multi_region_examples():
    p = np.array([0.3, -0.2, 0.7])
    assert multi_region_transform([UNIT], p) == gaussian_transform(UNIT, p)
    X = np.array([0.5, 0.0, 0.0])
    pair = [Region(X, (1, 1, 1)), Region(-X, (1, 1, 1))]
    q = np.array([math.pi, 0.0, 0.0])  # q·X = π/2
    assert abs(multi_region_transform(pair, q)) < 1e-14
    assert multi_region_transform(pair, (0, 0, 0)) == pytest.approx(2 * PI32, rel=1e-15)
    with pytest.raises(EmptyRegionList):
        multi_region_transform([], p)


def test_numeric_examples():
    v = numeric_transform(UNIT, (0, 0, 0), 8.0, 64)
    assert abs(v / PI32 - 1) < 1e-6
    r = Region((0.2, -0.1, 0.4), (1, 2, 3))
    p = np.array([1.0, 1.0, 1.0])
    num = numeric_transform(r, p, 18.0, 96)
    ana = gaussian_transform(r, p)
    assert abs(num - ana) / abs(ana) < 1e-6
    assert numeric_transform(r, -p, 18.0, 64) == pytest.approx(np.conj(numeric_transform(r, p, 18.0, 64)), rel=1e-12)


def test_numeric_preconditions():
    with pytest.raises(InsufficientExtent):
        numeric_transform(UNIT, (0, 0, 0), 5.9, 64)
    with pytest.raises(InsufficientResolution):
        numeric_transform(UNIT, (0, 0, 0), 8.0, 31)


def test_numeric_midpoint_rule():
    v = numeric_transform(UNIT, (0.5, 0, 0), 8.0, 64, rule="midpoint")
    assert abs(v - gaussian_transform(UNIT, (0.5, 0, 0))) / PI32 < 1e-10


def test_numeric_converges_exponentially():
    # half extent 16 makes the grid coarse enough that aliasing is visible at n = 32
    p = np.array([0.7, 0.0, 0.3])
    exact = gaussian_transform(UNIT, p)
    errs = [abs(numeric_transform(UNIT, p, 16.0, n) - exact) / abs(exact) for n in (32, 40, 48)]
    assert errs[0] > errs[1] > errs[2]
    # spectral, not algebraic: each step gains far more than the (h ratio)^2 ≈ 1.5 of a second-order rule
    assert errs[0] / errs[1] > 10 and errs[1] / errs[2] > 10


vec = st.tuples(*[st.floats(-3, 3, allow_nan=False)] * 3)
axes = st.tuples(*[st.floats(0.2, 2, allow_nan=False)] * 3)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(vec, axes), min_size=1, max_size=3), vec)
def test_hermitian_symmetry(spec, p):
    regions = [Region(c, a) for c, a in spec]
    p = np.array(p)
    assert multi_region_transform(regions, -p) == pytest.approx(np.conj(multi_region_transform(regions, p)), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(axes, vec)
def test_modulus_bounded_by_zero_momentum(a, p):
    r = Region((0, 0, 0), a)
    assert abs(gaussian_transform(r, p)) <= gaussian_transform(r, (0, 0, 0)).real * (1 + 1e-15)
    assert gaussian_transform(r, (0, 0, 0)).real == pytest.approx(PI32 * a[0] * a[1] * a[2], rel=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(vec, axes), min_size=1, max_size=2),
       st.lists(st.tuples(vec, axes), min_size=1, max_size=2), vec)
def test_linear_in_region_list(sa, sb, p):
    A = [Region(c, a) for c, a in sa]
    B = [Region(c, a) for c, a in sb]
    lhs = multi_region_transform(A + B, p)
    rhs = multi_region_transform(A, p) + multi_region_transform(B, p)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_vectorized_matches_scalar():
    r = Region((0.1, 0.2, 0.3), (0.5, 1.0, 1.5))
    ps = np.random.default_rng(1).normal(size=(5, 3))
    out = gaussian_transform(r, ps)
    assert out.shape == (5,)
    for p, v in zip(ps, out):
        assert gaussian_transform(r, p) == pytest.approx(v, rel=1e-15)
