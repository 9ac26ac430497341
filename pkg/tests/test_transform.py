import numpy as np
import pytest

from dunklkit.analytic import DomainError
from dunklkit.symmetry import GridFunction, eta_extension, quadrature_grid, sign_vectors
from dunklkit.transform import (
    Multiplier,
    apply_multiplier,
    dunkl_forward,
    dunkl_inverse,
    hankel_apply,
    hankel_at_points,
    inverse_plus,
    spectral_grid,
    transform_plus,
    transform_plus_by_extension,
)

LAMS = [(-0.3,), (0.0,), (1.7,), (0.2, 0.5)]


def _grids(lam):
    # radius**2 / nodes must stay well below pi for the oscillation x z
    r, m = (10.0, 120) if len(lam) == 1 else (8.0, 64)
    return quadrature_grid(lam, r, m), spectral_grid(lam, r, m)


def _hermite(eta):
    # x**eta exp(-|x|**2 / 2) is a fixed point of the parity-eta transform
    return lambda p: np.prod(p ** np.asarray(eta), axis=-1) * np.exp(-0.5 * np.sum(p**2, axis=-1))


@pytest.mark.parametrize("lam", LAMS)
def test_gaussian_fixed_points(lam):
    xg, zg = _grids(lam)
    for eta in sign_vectors(len(lam)):
        f = GridFunction.sample(_hermite(eta), xg)
        h = hankel_apply(f.values, xg, eta, zg.axes)
        np.testing.assert_allclose(h, _hermite(eta)(zg.points), atol=5e-11)


@pytest.mark.parametrize("lam", LAMS)
def test_restricted_transform_is_unitary_and_self_inverse(lam):
    xg, zg = _grids(lam)
    rng = np.random.default_rng(0)
    c = rng.uniform(0.5, 0.8, len(lam))
    for eta in sign_vectors(len(lam)):
        # x**eta times a function of x**2 keeps the eta-extension smooth
        f = GridFunction.sample(
            lambda p: _hermite(eta)(p) * (1 + np.sum(p**2, axis=-1)) * np.exp(-np.sum((c - 0.5) * p**2, axis=-1)), xg
        )
        fh = transform_plus(f, eta, zg)
        np.testing.assert_allclose(fh.norm(), f.norm(), rtol=1e-10)
        back = inverse_plus(fh, eta, xg)
        np.testing.assert_allclose(back.values, f.values, atol=1e-8)


def test_restricted_transform_matches_full_transform():
    lam = (0.2, 0.5)
    xg, zg = quadrature_grid(lam, 8.0, 24), spectral_grid(lam, 8.0, 24)
    f = GridFunction.sample(lambda p: np.exp(-np.sum((p - 0.5) ** 2, axis=-1)), xg)
    for eta in sign_vectors(2):
        a = transform_plus(f, eta, zg)
        b = transform_plus_by_extension(f, eta, zg)
        np.testing.assert_allclose(a.values, b.values, atol=1e-13)


@pytest.mark.parametrize("lam", [(-0.3,), (0.4, 1.1)])
def test_full_transform_plancherel_and_inversion(lam):
    r, m = (10.0, 120) if len(lam) == 1 else (8.0, 64)
    xg = quadrature_grid(lam, r, m).mirrored()
    zg = spectral_grid(lam, r, m).mirrored()
    f = GridFunction.sample(lambda p: np.exp(-0.5 * np.sum((p - 0.4) ** 2, axis=-1)) * (1 + p[..., 0]), xg)
    fh = dunkl_forward(f, zg)
    np.testing.assert_allclose(fh.norm(), f.norm(), rtol=1e-10)
    back = dunkl_inverse(fh, xg)
    np.testing.assert_allclose(back.values, f.values, atol=1e-10)
    with pytest.raises(DomainError):
        dunkl_forward(f, spectral_grid(lam, r, m))
    with pytest.raises(DomainError):
        dunkl_forward(f, zg, lam=tuple(v + 0.1 for v in lam))


def test_hankel_at_points_matches_tensor_output():
    lam = (0.2, 0.5)
    xg, zg = quadrature_grid(lam, 8.0, 20), spectral_grid(lam, 8.0, 20)
    f = GridFunction.sample(_hermite((1, 0)), xg)
    full = hankel_apply(f.values, xg, (1, 0), zg.axes)
    pts = zg.points.reshape(-1, 2)[::37]
    np.testing.assert_allclose(hankel_at_points(f.values, xg, (1, 0), pts), full.reshape(-1)[::37], atol=1e-14)


def test_heat_multiplier_composes():
    lam = (0.7,)
    xg, zg = _grids(lam)
    f = GridFunction.sample(lambda p: np.exp(-((p[..., 0] - 2) ** 2)), xg)
    for eta in (0, 1):
        ab = apply_multiplier(apply_multiplier(f, Multiplier.semigroup("heat", 0.3), eta, zg),
                              Multiplier.semigroup("heat", 0.5), eta, zg)
        c = apply_multiplier(f, Multiplier.semigroup("heat", 0.8), eta, zg)
        np.testing.assert_allclose(ab.values, c.values, atol=1e-12)


def test_multiplier_constructors():
    m = Multiplier.laplace_stieltjes([(1.0, 2.0), (0.5, -1.0j)])
    r = np.array([0.0, 1.0, 3.0])
    np.testing.assert_allclose(m(r), 2 * np.exp(-r**2) - 1j * np.exp(-0.5 * r**2))
    assert m.payload["total_variation"] == 3.0
    # a constant profile c gives c for every z != 0, up to the tau span cut at 1e-8
    lt = Multiplier.laplace_transform(lambda t: 0.5 + 0 * t, sup_bound=0.5)
    np.testing.assert_allclose(lt(np.array([0.1, 1.0, 50.0])), 0.5, rtol=2e-8)
    ip = Multiplier.imaginary_power(1.0)
    r = np.array([0.3, 1.0, 7.0])
    np.testing.assert_allclose(ip(r), r ** 2j, rtol=5e-8)
    with pytest.raises(DomainError):
        Multiplier.laplace_transform(lambda t: t, sup_bound=np.inf)
    with pytest.raises(DomainError):
        Multiplier.laplace_stieltjes([(1.0, 1.0)] * 65)
    with pytest.raises(DomainError):
        Multiplier.laplace_stieltjes([(-1.0, 1.0)])
    with pytest.raises(DomainError):
        Multiplier.semigroup("wave", 1.0)
    with pytest.raises(DomainError):
        Multiplier.semigroup("heat", 0.0)


def test_extension_of_transform_has_parity():
    lam = (0.3,)
    xg, zg = _grids(lam)
    f = GridFunction.sample(lambda p: np.exp(-(p[..., 0] - 1) ** 2), xg)
    fh = transform_plus(f, 1, zg)
    # odd parity carries the factor -i
    assert np.all(fh.values.real == 0)
    ext = eta_extension(f, 1)
    assert ext.grid.sign_closed
