import json
import math

import numpy as np
import pytest
from scipy import integrate, special

from dunklkit.kernels import ConeSpec, HeatKernelParams, heat_axis
from dunklkit.operators import (
    DiagonalError,
    InvalidSpecError,
    OperatorSpec,
    full_dunkl_apply,
    g_function,
    heat_semigroup,
    laplace_kernel,
    lusin_area,
    maximal_heat,
    multiplier_apply,
    poisson_semigroup,
    result_document,
    riesz_kernel,
    riesz_transform,
    stieltjes_kernel,
)
from dunklkit.symmetry import GridFunction, quadrature_grid, uniform_grid
from dunklkit.transform import Multiplier, hankel_apply, spectral_grid


def _gauss(grid, c=1.0, eta=0):
    return GridFunction.sample(lambda p: p[..., 0] ** eta * np.exp(-c * p[..., 0] ** 2), grid)


def test_spec_validation():
    with pytest.raises(InvalidSpecError):
        OperatorSpec("wavelet")
    with pytest.raises(InvalidSpecError):
        OperatorSpec("g_function")
    with pytest.raises(InvalidSpecError):
        OperatorSpec("riesz", M=(0,))
    with pytest.raises(InvalidSpecError):
        OperatorSpec("laplace_mult")
    with pytest.raises(InvalidSpecError):
        OperatorSpec("maximal", semigroup="wave")
    s = OperatorSpec("g_function", K=1, M=(1,)).sized(2)
    assert s.M == (1, 1) and s.eta == (0, 0)
    assert OperatorSpec("g_function", K=1).t_power == 1
    assert OperatorSpec("g_function", semigroup="poisson", K=1, M=(1,)).t_power == 3
    assert "payload" not in OperatorSpec("maximal").metadata()


@pytest.mark.parametrize("eta", [0, 1])
def test_heat_semigroup_routes_agree(eta):
    g = quadrature_grid(0.4, 10.0, 120)
    f = _gauss(g, 0.7, eta)
    probe = np.array([[0.3], [1.0], [2.5]])
    a = heat_semigroup(f, eta, 0.5, points=probe)
    b = heat_semigroup(f, eta, 0.5, route="kernel", points=probe)
    np.testing.assert_allclose(a, b, rtol=1e-9)


def test_heat_semigroup_of_gaussian_closed_form():
    # with lam = 0 the even semigroup acts on exp(-x**2) like the classical one
    g = quadrature_grid(0.0, 10.0, 120)
    f = _gauss(g)
    t = 0.3
    out = heat_semigroup(f, 0, t)
    ref = np.exp(-g.axes[0] ** 2 / (1 + 4 * t)) / np.sqrt(1 + 4 * t)
    np.testing.assert_allclose(out, ref, atol=1e-12)


def test_poisson_routes_agree():
    g = quadrature_grid(0.6, 12.0, 140)
    f = _gauss(g)
    probe = np.array([[0.5], [2.0]])
    for t in (0.3, 1.5):
        a = poisson_semigroup(f, 0, t, points=probe)
        b = poisson_semigroup(f, 0, t, route="kernel", points=probe)
        np.testing.assert_allclose(a, b, rtol=1e-6)


def _band_limited(lam, eta, xg, zg, power=4):
    # spectrum z**power exp(-z**2) vanishes at the origin, so every time scale is covered
    z = zg.axes[0]
    return GridFunction(xg, hankel_apply(z**power * np.exp(-(z**2)), zg, eta, xg.axes))


@pytest.mark.parametrize("K,M", [(1, 0), (2, 0), (0, 1), (0, 2), (1, 1)])
@pytest.mark.parametrize("eta", [0, 1])
def test_g_function_constants(K, M, eta):
    xg, zg = quadrature_grid(0.3, 25.0, 200), spectral_grid(0.3, 12.0, 200)
    f = _band_limited(0.3, eta, xg, zg)
    out = g_function(f, OperatorSpec("g_function", K=K, M=(M,), eta=(eta,)), z_grid=zg)
    ratio = out.norm() ** 2 / f.norm() ** 2
    np.testing.assert_allclose(ratio, math.gamma(2 * K + M) / 2 ** (2 * K + M), rtol=1e-4)


def test_g_function_kernel_route_matches_spectral():
    g = quadrature_grid(0.3, 10.0, 120)
    f = _gauss(g, 0.5)
    spec = OperatorSpec("g_function", K=1, M=(0,))
    probe = np.array([[0.7], [2.0]])
    a = g_function(f, spec, x=probe)
    b = g_function(f, OperatorSpec("g_function", K=1, route="kernel"), x=probe)
    np.testing.assert_allclose(a, b, rtol=1e-4)


def test_riesz_is_hilbert_transform_at_zero_multiplicity():
    # the kernel is -1 / (pi (x - y)), and the Hilbert transform of exp(-x**2) is 2 dawsn(x) / sqrt(pi)
    g = quadrature_grid(0.0, 10.0, 160)
    f = _gauss(g)
    zg = spectral_grid(0.0, 14.0, 160)
    r = riesz_transform(f, OperatorSpec("riesz", M=(1,), eta=(0,)), z_grid=zg, z_min=0.0)
    np.testing.assert_allclose(r.values, -2 / np.sqrt(np.pi) * special.dawsn(g.axes[0]), atol=1e-9)


def test_riesz_contraction_and_inverse():
    xg, zg = quadrature_grid(0.5, 25.0, 200), spectral_grid(0.5, 12.0, 200)
    f = _band_limited(0.5, 0, xg, zg)
    r1 = riesz_transform(f, OperatorSpec("riesz", M=(1,), eta=(0,)), z_grid=zg, z_min=0.0)
    assert r1.norm() <= f.norm() * (1 + 1e-9)
    r2 = riesz_transform(r1, OperatorSpec("riesz", M=(1,), eta=(1,)), z_grid=zg, z_min=0.0)
    # two grid round trips at x z up to 300 on 200 nodes
    np.testing.assert_allclose(r2.values, -f.values, atol=1e-6 * f.sup())


def test_riesz_kernel_is_hilbert_kernel_at_zero_multiplicity():
    x = np.array([0.5, 1.0, 3.0])
    y = np.array([1.5, 0.2, 2.5])
    ref = -(1 / (x - y) + 1 / (x + y)) / np.pi
    np.testing.assert_allclose(riesz_kernel(0.0, 0, (1,), x, y), ref, rtol=1e-8)
    with pytest.raises(DiagonalError):
        riesz_kernel(0.0, 0, (1,), 1.0, 1.0)


def test_laplace_and_stieltjes_kernels():
    lam, x, y = 0.4, 0.8, 2.1
    # profile exp(-t): the kernel is -int exp(-t) W_t dt off the diagonal
    ref, _ = integrate.quad(lambda t: -np.exp(-t) * heat_axis(lam, 0, t, x, y), 0, np.inf, epsabs=0, epsrel=1e-11, limit=200)
    val = laplace_kernel(lam, 0, lambda t: np.exp(-t), x, y)
    np.testing.assert_allclose(val, ref, rtol=1e-7)
    atoms = [(0.5, 2.0), (1.5, -1.0j)]
    ref = 2.0 * heat_axis(lam, 0, 0.5, x, y) - 1j * heat_axis(lam, 0, 1.5, x, y)
    np.testing.assert_allclose(stieltjes_kernel(lam, 0, atoms, x, y), ref, rtol=1e-14)


def test_multiplier_apply_matches_semigroup():
    g = quadrature_grid(0.4, 10.0, 120)
    f = _gauss(g, 0.6, 1)
    m = Multiplier.laplace_stieltjes([(0.5, 1.0)])
    out = multiplier_apply(f, OperatorSpec("stieltjes_mult", eta=(1,), payload=m))
    np.testing.assert_allclose(out.values, heat_semigroup(f, 1, 0.5), atol=1e-13)
    pm = multiplier_apply(f, OperatorSpec("stieltjes_mult", semigroup="poisson", eta=(1,), payload=m))
    np.testing.assert_allclose(pm.values, poisson_semigroup(f, 1, 0.5), atol=1e-13)


def test_maximal_function_bounds():
    g = quadrature_grid(0.2, 10.0, 120)
    f = _gauss(g, 0.5)
    sup, meta = maximal_heat(f, 0, route="spectral", t_grid=np.logspace(-5, 3, 200))
    inner = g.axes[0] < 6
    assert np.all(sup[inner] >= np.abs(f.values[inner]) * (1 - 1e-4))
    probe = np.array([[0.5], [1.5]])
    a, _ = maximal_heat(f, 0, x=probe, route="spectral", t_grid=np.logspace(-3, 2, 60))
    b, meta = maximal_heat(f, 0, x=probe, route="kernel", t_grid=np.logspace(-3, 2, 60))
    assert meta["route"] == "kernel"
    # the kernel route drops unresolved small times, so it can only be lower
    assert np.all(b <= a * (1 + 1e-9))
    np.testing.assert_allclose(a[1], b[1], rtol=1e-6)


def test_lusin_area_grows_with_aperture():
    g = quadrature_grid(0.3, 10.0, 80)
    f = _gauss(g, 0.5)
    spec = OperatorSpec("lusin_area", K=1)
    probe = np.array([[0.3], [1.0], [2.0]])
    vals = [lusin_area(f, spec, ConeSpec(beta=b), x=probe) for b in (0.5, 1.0, 2.0)]
    assert np.all(vals[0] <= vals[1] * (1 + 1e-9))
    assert np.all(vals[1] <= vals[2] * (1 + 1e-9))
    with pytest.raises(InvalidSpecError):
        lusin_area(f, OperatorSpec("maximal"))


def test_full_space_heat_is_classical_at_zero_multiplicity():
    g = quadrature_grid(0.0, 10.0, 100).mirrored()
    F = GridFunction.sample(lambda p: np.exp(-((p[..., 0] - 1) ** 2)), g)
    t = 0.4
    out = full_dunkl_apply(F, "heat", t=t)
    ref = np.exp(-((g.axes[0] - 1) ** 2) / (1 + 4 * t)) / np.sqrt(1 + 4 * t)
    assert not np.iscomplexobj(out.values)
    np.testing.assert_allclose(out.values, ref, atol=1e-11)
    with pytest.raises(InvalidSpecError):
        full_dunkl_apply(F, "maximal")


def test_full_space_riesz_is_hilbert_transform():
    g = quadrature_grid(0.0, 10.0, 160).mirrored()
    F = GridFunction.sample(lambda p: np.exp(-((p[..., 0]) ** 2)) * (1 + 0.5 * p[..., 0]), g)
    out = full_dunkl_apply(F, "riesz", spec=OperatorSpec("riesz", M=(1,)))
    x = g.axes[0]
    # H[x exp(-x**2)] = x H[exp(-x**2)] - 1 / sqrt(pi)
    h0 = 2 / np.sqrt(np.pi) * special.dawsn(x)
    ref = -(h0 + 0.5 * (x * h0 - 1 / np.sqrt(np.pi)))
    np.testing.assert_allclose(np.real(out.values), ref, atol=1e-6)


def test_result_document_header():
    g = quadrature_grid(0.2, 2.0, 4)
    f = _gauss(g)
    doc = result_document(f, OperatorSpec("maximal"), note=np.float64(1.5))
    head = json.loads(doc.splitlines()[0])
    assert head["metadata"]["operator"]["family"] == "maximal"
    assert head["metadata"]["note"] == 1.5
    back = GridFunction.from_columns("\n".join(doc.splitlines()[1:]))
    np.testing.assert_array_equal(back.values, f.values)


def test_stencil_grid_weights():
    # midpoint weights are adequate for smooth integrands: int exp(-2 x**2) x dx = 1/4
    g = uniform_grid(0.5, 8.0, 400)
    f = _gauss(g)
    np.testing.assert_allclose(f.norm() ** 2, 0.25, rtol=1e-4)
