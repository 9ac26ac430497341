import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from dunklkit.analytic import (
    DomainError,
    MultiplicityVector,
    SingularWeightWarning,
    as_lambda,
    ball_volume_1d,
    ball_volume_plus,
    bessel_i_ratio,
    bessel_i_ratio_scaled,
    bessel_j_ratio,
    compensated_sum,
    jacobi_axis,
    log_trapezoid,
    omega_laplace,
    omega_mass,
    omega_quadrature_laplace,
    omega_rule,
    omega_rule_1d,
    phi,
    phi_bound_ratio,
    psi,
    q_form,
    weight_density,
    xi,
)

ORDERS = [-0.8, -0.5, -0.3, 0.0, 0.2, 0.5, 1.2, 2.2]


@pytest.mark.parametrize("nu", ORDERS)
def test_scaled_i_ratio_matches_scipy(nu):
    w = np.logspace(-3, 2.5, 400)
    ref = special.ive(nu, w) / w**nu
    np.testing.assert_allclose(bessel_i_ratio_scaled(nu, w), ref, rtol=2e-13)


@pytest.mark.parametrize("nu", [-0.8, 0.2, 2.2])
def test_scaled_i_ratio_large_argument(nu):
    # the Hankel expansion beyond the table and beyond scipy's range
    w = np.array([60.0, 500.0, 1e5, 1e9, 1e12])
    ref = special.ive(nu, w[:3]) / w[:3] ** nu
    np.testing.assert_allclose(bessel_i_ratio_scaled(nu, w[:3]), ref, rtol=1e-13)
    lead = 1.0 / np.sqrt(2 * np.pi * w[3:]) / w[3:] ** nu
    np.testing.assert_allclose(bessel_i_ratio_scaled(nu, w[3:]), lead, rtol=1e-8)


def test_i_ratio_at_origin_and_half_order():
    for nu in ORDERS:
        np.testing.assert_allclose(bessel_i_ratio(nu, 0.0), 1.0 / (2**nu * special.gamma(nu + 1)), rtol=1e-14)
    w = np.linspace(0.01, 30, 50)
    # I_{1/2}(w) = sqrt(2 / (pi w)) sinh w
    np.testing.assert_allclose(bessel_i_ratio(0.5, w), np.sqrt(2 / np.pi) * np.sinh(w) / w, rtol=1e-13)


def test_j_ratio_half_order_is_sinc():
    w = np.linspace(-40, 40, 201)
    ref = np.sqrt(2 / np.pi) * np.sinc(w / np.pi)
    np.testing.assert_allclose(bessel_j_ratio(0.5, w), ref, atol=1e-15)
    np.testing.assert_allclose(bessel_j_ratio(-0.5, w), np.sqrt(2 / np.pi) * np.cos(w), atol=1e-15)


def test_bessel_order_domain():
    with pytest.raises(DomainError):
        bessel_i_ratio_scaled(-1.0, 1.0)
    with pytest.raises(DomainError):
        bessel_j_ratio(-1.5, 1.0)


def test_multiplicity_vector_validation():
    assert MultiplicityVector((0.2, 0.5)).n == 2
    np.testing.assert_array_equal(as_lambda(0.3), [0.3])
    for bad in [(-0.5,), (), (float("nan"),), (0.1, -0.7)]:
        with pytest.raises(DomainError):
            as_lambda(bad)


def test_psi_is_eigenfunction_family_at_zero_multiplicity():
    # lam = 0 collapses to the exponential up to the normalization of phi
    x = np.linspace(-3, 3, 31)
    z = 1.7
    c = bessel_j_ratio(-0.5, 0.0)
    np.testing.assert_allclose(psi(0.0, z, x), c * np.exp(1j * x * z), atol=1e-14)


def test_phi_tensor_product():
    z = np.array([0.7, 1.3])
    x = np.array([[0.4, 2.0], [1.5, 0.3]])
    ref = bessel_j_ratio(-0.2, x[:, 0] * z[0]) * bessel_j_ratio(1.0, x[:, 1] * z[1])
    np.testing.assert_allclose(phi((0.3, 1.5), z, x), ref)


def test_phi_decay_bound_is_bounded():
    x = np.logspace(-3, 4, 2000)
    for lam in (-0.3, 0.2, 1.7):
        r = phi_bound_ratio(lam, 1.0, x)
        assert np.all(np.isfinite(r))
        assert r.max() < 10


def test_weight_density_singular():
    np.testing.assert_allclose(weight_density((0.5, 1.0), [2.0, 3.0]), 2.0 * 9.0)
    with pytest.warns(SingularWeightWarning):
        assert weight_density(-0.3, 0.0) == np.inf
    assert weight_density(0.3, 0.0) == 0.0


@pytest.mark.parametrize("lam", [-0.3, 0.0, 0.7])
def test_ball_volume_against_quadrature(lam):
    for x, t in [(0.5, 2.0), (3.0, 0.4), (100.0, 1e-6), (1e-3, 1e-3)]:
        # centred variable u = x + t s keeps the short interval exact
        lo = max(-1.0, -x / t)
        ref, _ = integrate.quad(lambda s: t * (x + t * s) ** (2 * lam), lo, 1.0, epsabs=0, epsrel=1e-13)
        np.testing.assert_allclose(ball_volume_1d(lam, x, t), ref, rtol=1e-10)


@settings(max_examples=200, deadline=None)
@given(
    lam=st.floats(-0.49, 3.0),
    x=st.floats(0.0, 1e3),
    t=st.floats(1e-6, 1e3),
)
def test_ball_volume_doubling(lam, x, t):
    # the weighted measure is doubling with constant 2**(2 lam + 1) at most 2**(2 lam' + 1)
    v1 = ball_volume_1d(lam, x, t)
    v2 = ball_volume_1d(lam, x, 2 * t)
    assert v1 > 0
    assert v2 >= v1 * (1 - 1e-12)
    assert v2 <= v1 * 2 ** (2 * max(lam, 0) + 2) * (1 + 1e-12)


def test_ball_volume_plus_is_product():
    x = np.array([[0.3, 4.0]])
    v = ball_volume_plus((0.2, 1.1), x, 0.5)
    np.testing.assert_allclose(v, ball_volume_1d(0.2, 0.3, 0.5) * ball_volume_1d(1.1, 4.0, 0.5))
    with pytest.raises(DomainError):
        ball_volume_1d(0.2, -1.0, 1.0)
    with pytest.raises(DomainError):
        ball_volume_1d(0.2, 1.0, 0.0)


@pytest.mark.parametrize("nu", [0.2, 0.5, 1.0, 2.7])
def test_omega_rule_mass_and_laplace(nu):
    s, w = omega_rule_1d(nu, 64)
    np.testing.assert_allclose(w.sum(), omega_mass(nu), rtol=1e-13)
    assert not w.flags.writeable
    for a in (0.0, 0.5, 3.0, 20.0):
        quad = np.exp(-a * (1 + s)) @ w
        np.testing.assert_allclose(quad, omega_laplace(nu, a), rtol=1e-11)


@pytest.mark.parametrize("nu", [0.2, 1.0, 2.7])
def test_omega_quadrature_all_arguments(nu):
    w = np.logspace(-4, 8, 200)
    np.testing.assert_allclose(omega_quadrature_laplace(nu, w, 64), omega_laplace(nu, w), rtol=1e-11)


def test_omega_quadrature_converges_with_order():
    w = np.logspace(-2, 4, 60)
    errs = [np.max(np.abs(omega_quadrature_laplace(0.2, w, o) / omega_laplace(0.2, w) - 1)) for o in (4, 8, 16, 64)]
    assert errs[-1] < 1e-11
    assert errs[0] > errs[2]


def test_omega_tensor_rule():
    r = omega_rule((0.5, 1.5), 8)
    assert r.nodes.shape == (64, 2)
    np.testing.assert_allclose(r.weights.sum(), omega_mass(0.5) * omega_mass(1.5), rtol=1e-13)
    with pytest.raises(DomainError):
        omega_rule((0.5, 0.0), 8)
    assert omega_rule((0.5, 1.5), 8) is r


def test_q_form():
    x = np.array([1.0, 2.0])
    y = np.array([0.5, 1.0])
    np.testing.assert_allclose(q_form(x, y, [-1, -1]), np.sum((x - y) ** 2))
    np.testing.assert_allclose(q_form(x, y, [1, 1]), np.sum((x + y) ** 2))
    with pytest.raises(DomainError):
        q_form(x, y, [1.1, 0])


def test_xi_domain():
    v = xi(0.5, 1.0, 0.2, 0.25)
    np.testing.assert_allclose(v, 1.2 / ball_volume_1d(0.5, 1.0, 0.5))
    with pytest.raises(DomainError):
        xi(0.5, 1.0, -1.0, 0.25)


def test_quadrature_helpers():
    x, w = jacobi_axis(0.7, 3.0, 20)
    np.testing.assert_allclose(w @ x**2, 3.0 ** (2 * 0.7 + 3) / (2 * 0.7 + 3), rtol=1e-13)
    t, w = log_trapezoid(1e-8, 1e8, 0.1)
    np.testing.assert_allclose(w @ (t * np.exp(-t)), 1.0, rtol=1e-10)
    assert compensated_sum([1e16, 1.0, -1e16]) == 1.0
    assert compensated_sum(np.array([1e16 + 1j, 1.0, -1e16])) == complex(1.0, 1.0)
    assert math.isclose(compensated_sum([0.1] * 10), 1.0)
