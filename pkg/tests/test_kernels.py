import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nonlocal_poisson.errors import ConfigurationError, DomainError
from nonlocal_poisson.kernels import KernelFamily, eval_level, eval_scaled

COS = KernelFamily(0.1)


def cosine_profile(r):
    return np.where(r <= 1, 0.5 * (1 + np.cos(np.pi * r)), 0.0)


def quad_upper(fn, r):
    return integrate.quad(fn, r, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)[0]


def test_closed_forms_match_adaptive_quadrature():
    rng = np.random.default_rng(11)
    for r in rng.uniform(0.0, 1.2, 100):
        rbar = quad_upper(lambda s: COS.eval_level(0, s), r)
        rbbar = quad_upper(lambda s: quad_upper(lambda w: COS.eval_level(0, w), s), r)
        assert abs(COS.eval_level(1, r) - rbar) <= 1e-10
        assert abs(COS.eval_level(2, r) - rbbar) <= 1e-10


def test_values_at_origin():
    assert COS.eval_level(0, 0.0) == pytest.approx(1.0)
    assert COS.eval_level(1, 0.0) == pytest.approx(0.5)
    assert COS.eval_level(2, 0.0) == pytest.approx(0.25 - 1 / np.pi**2)


@given(st.floats(1.0, 50.0), st.sampled_from([0, 1, 2]))
def test_vanishes_outside_support(r, level):
    assert COS.eval_level(level, r) == 0.0


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_antiderivatives_nonincreasing_and_nonnegative(a, b):
    lo, hi = min(a, b), max(a, b)
    for level in (1, 2):
        assert COS.eval_level(level, lo) >= COS.eval_level(level, hi) - 1e-15
        assert COS.eval_level(level, hi) >= -1e-15


@given(st.floats(0.01, 0.99))
def test_derivative_relations(r):
    h = 1e-5
    for level in (1, 2):
        d = (COS.eval_level(level, r + h) - COS.eval_level(level, r - h)) / (2 * h)
        assert d == pytest.approx(-COS.eval_level(level - 1, r), abs=1e-8)


def test_scaled_kernel_mass():
    # integral over the plane of R_delta(x, 0) = C * 4 pi delta^2 * int_0^1 R(r) dr = Rbar(0)
    for delta in (0.05, 0.2, 1.0):
        k = KernelFamily(delta)
        rho = np.linspace(0, 2 * delta, 20001)
        vals = k.scaled_sq(0, rho**2) * 2 * np.pi * rho
        assert integrate.simpson(vals, x=rho) == pytest.approx(0.5, rel=1e-9)


def test_normalization_depends_on_dimension():
    assert KernelFamily(0.3, 2).normalization == pytest.approx(1 / (4 * np.pi * 0.09))
    assert KernelFamily(0.3, 3).normalization == pytest.approx((4 * np.pi * 0.09) ** -1.5)


def test_eval_scaled_support_and_symmetry():
    k = KernelFamily(0.1)
    x = np.array([0.0, 0.0, 0.0])
    assert k.eval_scaled(0, x, [0.2 + 1e-9, 0, 0]) == 0.0
    assert k.eval_scaled(0, x, [0.19, 0, 0]) > 0.0
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(2, 5, 3)) * 0.1
    np.testing.assert_array_equal(eval_scaled(k, 1, a, b), eval_scaled(k, 1, b, a))


def test_scalar_in_scalar_out():
    assert isinstance(eval_level(COS, 0, 0.3), float)
    assert eval_level(COS, 0, np.array([0.3, 0.4])).shape == (2,)


def test_errors():
    with pytest.raises(DomainError):
        COS.eval_level(0, -0.1)
    with pytest.raises(ConfigurationError):
        COS.eval_level(3, 0.1)
    with pytest.raises(ConfigurationError):
        KernelFamily(0.0)
    with pytest.raises(ConfigurationError):
        KernelFamily(0.1, profile=lambda r: np.cos(4 * r))  # negative inside the support
    with pytest.raises(ConfigurationError):
        KernelFamily(0.1, profile=lambda r: np.maximum(0.4 - r, 0.0))  # zero before r = 1/2


@pytest.mark.parametrize("as_table", [False, True])
def test_custom_profile_reproduces_cosine(as_table):
    if as_table:
        r = np.linspace(0, 1, 2001)
        prof = (r, cosine_profile(r))
    else:
        prof = cosine_profile
    k = KernelFamily(0.1, profile=prof)
    r = np.linspace(0, 1.1, 57)
    tol = 1e-9 if not as_table else 1e-8
    for level in (0, 1, 2):
        np.testing.assert_allclose(k.eval_level(level, r), COS.eval_level(level, r), atol=tol)


def test_custom_profile_shared_by_with_delta():
    k = KernelFamily(0.1, profile=cosine_profile)
    k2 = k.with_delta(0.2)
    assert k2.delta == 0.2 and not k2.is_cosine
    assert k2.eval_level(1, 0.3) == k.eval_level(1, 0.3)
