import csv
import io

import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st
from scipy import integrate

from dunklkit.analytic import DomainError
from dunklkit.kernels import (
    BanachContext,
    ConeSpec,
    DerivativeSpec,
    HeatKernelParams,
    UnsupportedOrderError,
    banach_norm,
    cone_rule_1d,
    dunkl_heat_kernel,
    est_envelope,
    faa_di_bruno_terms,
    heat_axis,
    heat_kernel_integral_rep,
    heat_kernel_product,
    kernel_csv,
    kernel_derivative,
    poisson_kernel,
    poisson_kernel_derivative,
)
from dunklkit.analytic import ball_volume_1d
from dunklkit.symmetry import delta_eta_M_callable


def gauss(t, d):
    return np.exp(-(d**2) / (4 * t)) / np.sqrt(4 * np.pi * t)


def test_classical_heat_kernels():
    rng = np.random.default_rng(0)
    t = 10 ** rng.uniform(-2, 2, 200)
    x, y = rng.uniform(0, 5, (2, 200))
    np.testing.assert_allclose(heat_kernel_product(HeatKernelParams(0.0, 0, t), x, y), gauss(t, x - y) + gauss(t, x + y), rtol=1e-13)
    np.testing.assert_allclose(heat_kernel_product(HeatKernelParams(0.0, 1, t), x, y), gauss(t, x - y) - gauss(t, x + y), rtol=1e-9, atol=1e-300)
    xs, ys = rng.uniform(-5, 5, (2, 200))
    # the average over parities cancels when x y < 0, so the floor is absolute
    full = dunkl_heat_kernel(0.0, t, xs, ys)
    scale = gauss(t, np.abs(xs) - np.abs(ys))
    np.testing.assert_allclose(full / scale, gauss(t, xs - ys) / scale, atol=1e-12)


def test_classical_poisson_kernel():
    t = np.array([0.1, 1.0, 3.0])
    x, y = 0.7, 2.0
    ref = t / np.pi * (1 / (t**2 + (x - y) ** 2) + 1 / (t**2 + (x + y) ** 2))
    np.testing.assert_allclose(poisson_kernel(HeatKernelParams(0.0, 0, t), x, y), ref, rtol=1e-10)


@pytest.mark.parametrize("lam", [-0.3, 0.2, 1.7])
@pytest.mark.parametrize("eta", [0, 1])
def test_heat_kernel_symmetric_and_positive(lam, eta):
    rng = np.random.default_rng(1)
    x, y = 10 ** rng.uniform(-2, 2, (2, 100))
    t = 10 ** rng.uniform(-2, 2, 100)
    p = HeatKernelParams(lam, eta, t)
    a = heat_kernel_product(p, x, y)
    np.testing.assert_allclose(a, heat_kernel_product(p, y, x), rtol=1e-14)
    assert np.all(a >= 0)


@pytest.mark.parametrize("lam", [-0.3, 0.2, 1.7])
def test_unit_mass(lam):
    x, t = 0.8, 0.5
    mass, _ = integrate.quad(lambda y: heat_axis(lam, 0, t, x, y) * y ** (2 * lam), 0, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    np.testing.assert_allclose(mass, 1.0, rtol=1e-10)


@pytest.mark.parametrize("lam", [(-0.3,), (1.7,), (0.2, 0.5)])
def test_integral_representation(lam):
    rng = np.random.default_rng(2)
    n = len(lam)
    x = 10 ** rng.uniform(-2, 2, (300, n))
    y = 10 ** rng.uniform(-2, 2, (300, n))
    t = 10 ** rng.uniform(-2, 2, 300)
    for eta in [(0,) * n, (1,) * n]:
        p = HeatKernelParams(lam, eta, t)
        a = heat_kernel_product(p, x, y)
        b = heat_kernel_integral_rep(p, x, y)
        ok = a > 1e-290
        np.testing.assert_allclose(b[ok], a[ok], rtol=1e-10)
        wrong = heat_kernel_integral_rep(p, x, y, constant_factor=1.1)
        np.testing.assert_allclose(wrong[ok], 1.1 * a[ok], rtol=1e-10)


def test_semigroup_law():
    lam, x, z, s, t = 0.4, 0.9, 1.6, 0.3, 0.7
    f = lambda y: heat_axis(lam, 0, s, x, y) * heat_axis(lam, 0, t, y, z) * y ** (2 * lam)
    val, _ = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12, limit=200)
    np.testing.assert_allclose(val, heat_axis(lam, 0, s + t, x, z), rtol=1e-10)


@pytest.mark.parametrize("eta", [0, 1])
def test_time_derivative_and_heat_equation(eta):
    lam = 0.6
    rng = np.random.default_rng(3)
    x, y = rng.uniform(0.2, 3, (2, 40))
    t = rng.uniform(0.2, 2, 40)
    p = HeatKernelParams(lam, eta, t)
    dt = kernel_derivative(p, DerivativeSpec(K=1), x, y)
    h = 1e-4 * t
    fd = (heat_kernel_product(p.at(t + h), x, y) - heat_kernel_product(p.at(t - h), x, y)) / (2 * h)
    np.testing.assert_allclose(dt, fd, rtol=1e-6, atol=1e-8 * np.max(np.abs(dt)))
    # the order-2 parity-adapted derivative in x is the generator
    lap = delta_eta_M_callable(lambda q: heat_kernel_product(p, q, y[:, None]), lam, eta, 2, x[:, None])
    np.testing.assert_allclose(lap, dt, rtol=1e-6, atol=1e-9 * np.max(np.abs(dt)))


def test_parity_derivative_matches_nested_differences():
    lam, eta = (0.3, 1.2), (1, 0)
    rng = np.random.default_rng(4)
    x = rng.uniform(0.3, 2, (10, 2))
    y = rng.uniform(0.3, 2, (10, 2))
    t = rng.uniform(0.3, 1.5, 10)
    p = HeatKernelParams(lam, eta, t)
    for M in [(1, 0), (0, 1), (1, 1), (2, 1)]:
        a = kernel_derivative(p, DerivativeSpec(M=M), x, y)
        b = delta_eta_M_callable(lambda q: heat_kernel_product(p, q, y), lam, eta, M, x)
        np.testing.assert_allclose(a, b, rtol=1e-5, atol=1e-8 * np.max(np.abs(a)))


def test_derivative_order_limit():
    p = HeatKernelParams(0.2, 0, 1.0)
    with pytest.raises(UnsupportedOrderError):
        kernel_derivative(p, DerivativeSpec(K=4, l=(3,)), 1.0, 1.0)
    with pytest.raises(DomainError):
        DerivativeSpec(K=-1)
    with pytest.raises(DomainError):
        HeatKernelParams(0.2, 0, 0.0)
    assert DerivativeSpec().is_zero
    assert DerivativeSpec(M=(1,)).sized(3).M == (1, 1, 1)


def test_poisson_subordination_against_spectral_integral():
    # in one dimension the even Poisson kernel at the origin pair is explicit via the
    # transform: int_0^inf exp(-t z) z**(2 lam) dz * phi(0)**2
    from scipy import special

    lam, t = 0.35, 0.8
    c = 1 / (2 ** (lam - 0.5) * special.gamma(lam + 0.5))
    ref = c**2 * special.gamma(2 * lam + 1) / t ** (2 * lam + 1)
    val = poisson_kernel(HeatKernelParams(lam, 0, t), 1e-9, 1e-9)
    np.testing.assert_allclose(val, ref, rtol=1e-8)


def test_poisson_time_derivative():
    lam, x, y = 0.5, 0.7, 1.9
    t = np.array([0.3, 1.0, 4.0])
    p = HeatKernelParams(lam, 1, t)
    d = poisson_kernel_derivative(p, DerivativeSpec(K=1), x, y)
    h = 1e-4 * t
    fd = (poisson_kernel(p.at(t + h), x, y) - poisson_kernel(p.at(t - h), x, y)) / (2 * h)
    np.testing.assert_allclose(d, fd, rtol=1e-6)
    assert faa_di_bruno_terms(2) == [(2, 0, 0.25), (0, 1, 0.5)]


def test_envelope_dominates_derivatives():
    rng = np.random.default_rng(5)
    for lam in (-0.3, 1.7):
        x, y = 10 ** rng.uniform(-2, 2, (2, 500))
        t = 10 ** rng.uniform(-2, 2, 500)
        p = HeatKernelParams(lam, 0, t)
        spec = DerivativeSpec(K=1, M=(1,))
        env = est_envelope(p, spec, x, y)
        ok = env > 1e-250
        r = np.abs(kernel_derivative(p, spec, x, y))[ok] / env[ok]
        assert ok.mean() > 0.5
        assert np.all(np.isfinite(r))
        assert r.max() < 100


def test_banach_contexts():
    ctx = BanachContext.make("l2_t", 1e-8, 1e3, 0.05, power=1.0)
    # int exp(-2t) t dt = 1/4
    np.testing.assert_allclose(banach_norm(np.exp(-ctx.t_grid), ctx), 0.5, rtol=1e-6)
    sup = BanachContext.make("sup_t")
    assert banach_norm(np.array([1.0, -3.0, 2.0]), BanachContext("sup_t", np.arange(1.0, 4.0), np.ones(3))) == 3.0
    assert sup.t_grid[0] == pytest.approx(1e-6)
    with pytest.raises(DomainError):
        BanachContext.make("l2_t", 1.0, 10.0)
    with pytest.raises(DomainError):
        BanachContext("l2_cone", np.ones(1), np.ones(1))
    with pytest.raises(DomainError):
        BanachContext("l1_t", np.ones(1), np.ones(1))
    with pytest.raises(DomainError):
        ConeSpec("round")
    with pytest.raises(DomainError):
        ConeSpec(beta=0.0)


@settings(max_examples=50, deadline=None)
@given(lam=st.floats(-0.45, 2.0), x=st.floats(1e-3, 1e3), r=st.floats(1e-3, 1e3), beta=st.sampled_from([0.5, 1.0, 2.0]))
@example(lam=-0.44921875, x=1.0, r=1.0, beta=1.0)
def test_cone_rule_integrates_constants(lam, x, r, beta):
    z, w = cone_rule_1d(lam, np.array([x]), np.array([r]), beta)
    assert np.all(x + z > 0)
    ratio = ball_volume_1d(lam, x, beta * r) / ball_volume_1d(lam, x, r)
    # differences of (x + z)**p lose about (x / r) eps
    np.testing.assert_allclose(w.sum(), ratio, rtol=1e-8)


def test_kernel_csv_dump():
    p = HeatKernelParams((0.2, 0.5), (1, 0), 0.3)
    x = np.array([[0.1, 0.2], [1.0, 2.0]])
    y = np.array([0.5, 0.5])
    v = heat_kernel_product(p, x, y)
    rows = list(csv.reader(io.StringIO(kernel_csv(p, DerivativeSpec(), x, y, v))))
    assert rows[0] == ["n", "lambda1", "lambda2", "eta1", "eta2", "K", "M1", "M2", "x1", "x2", "y1", "y2", "t", "value"]
    assert len(rows) == 3
    assert float(rows[1][-1]) == v[0]
    assert rows[2][:8] == ["2", "0.20000000000000001", "0.5", "1", "0", "0", "0", "0"]
