"""Discrete Dunkl transform, its parity-restricted Hankel-type form, and multipliers.

All transforms are tensor products of one-dimensional quadrature matrices.  On
the orthant the parity-``eta`` transform is real and self-inverse:

    H f(z) = int (x z)**eta phi^(lam + eta)_z(x) f(x) |x|**(2 lam) dx,

and the full transform of the ``eta``-symmetric extension restricts to
``(-i)**|eta| H f``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .analytic import DomainError, as_lambda, bessel_j_ratio, log_gauss, psi_factor
from .symmetry import (
    Grid,
    GridFunction,
    as_sign_vector,
    eta_extension,
    quadrature_grid,
    restrict_plus,
)


class SpectralFunction(GridFunction):
    """Samples of a transform; the grid nodes are frequencies."""


def spectral_grid(lam, z_max, nodes) -> Grid:
    """Positive frequency grid sharing the Gauss-Jacobi construction of space grids.

    The frequency side carries the same weight ``|z|**(2 lam)``, so reusing
    the Jacobi rule keeps negative multiplicities integrable.
    """
    return quadrature_grid(lam, z_max, nodes)


# ----------------------------------------------------------------------------
# one-dimensional matrices

_MATRIX_CACHE: dict = {}


def _key(*parts):
    h = hashlib.sha1()
    for p in parts:
        h.update(np.ascontiguousarray(p).tobytes() if isinstance(p, np.ndarray) else repr(p).encode())
    return h.hexdigest()


def hankel_matrix(lam_j, eta_j, out_nodes, in_nodes, in_weights):
    """Matrix ``A[k, i] = w_i (u_k v_i)**eta phi^(lam + eta)(u_k v_i)``."""
    key = _key("h", float(lam_j), int(eta_j), out_nodes, in_nodes, in_weights)
    a = _MATRIX_CACHE.get(key)
    if a is None:
        w = np.multiply.outer(out_nodes, in_nodes)
        a = w**eta_j * bessel_j_ratio(lam_j + eta_j - 0.5, w) * in_weights
        a.setflags(write=False)
        if len(_MATRIX_CACHE) > 512:
            _MATRIX_CACHE.clear()
        _MATRIX_CACHE[key] = a
    return a


def _dunkl_matrix(lam_j, out_nodes, in_nodes, in_weights, conj):
    key = _key("d", float(lam_j), bool(conj), out_nodes, in_nodes, in_weights)
    a = _MATRIX_CACHE.get(key)
    if a is None:
        k = psi_factor(lam_j, np.multiply.outer(out_nodes, in_nodes))
        a = 0.5 * (np.conj(k) if conj else k) * in_weights
        a.setflags(write=False)
        _MATRIX_CACHE[key] = a
    return a


def _apply_axes(values, mats):
    v = np.asarray(values)
    for j, a in enumerate(mats):
        v = np.moveaxis(np.tensordot(a, v, axes=([1], [j])), 0, j)
    return v


def _check_lam(f: GridFunction, lam=None):
    if lam is not None and not np.array_equal(as_lambda(lam), f.lam):
        raise DomainError("multiplicity of the input does not match the requested transform")


# ----------------------------------------------------------------------------
# full transform on sign-closed grids


def dunkl_forward(f: GridFunction, z_grid: Grid, lam=None) -> SpectralFunction:
    """``2**-n int conj(psi_z(x)) f(x) |x|**(2 lam) dx`` by tensor quadrature."""
    _check_lam(f, lam)
    g = f.grid
    if not g.sign_closed or not z_grid.sign_closed:
        raise DomainError("the full transform works on sign-closed grids")
    if not np.array_equal(g.lam, z_grid.lam):
        raise DomainError("space and frequency grids carry different multiplicities")
    mats = [_dunkl_matrix(lj, z, x, w, True) for lj, z, x, w in zip(g.lam, z_grid.axes, g.axes, g.axis_weights)]
    return SpectralFunction(z_grid, _apply_axes(f.values, mats), dict(f.meta))


def dunkl_inverse(g: GridFunction, x_grid: Grid, lam=None) -> GridFunction:
    """Inverse transform: the forward transform evaluated at ``-x``."""
    _check_lam(g, lam)
    zg = g.grid
    if not zg.sign_closed or not x_grid.sign_closed:
        raise DomainError("the full transform works on sign-closed grids")
    mats = [_dunkl_matrix(lj, x, z, w, False) for lj, x, z, w in zip(zg.lam, x_grid.axes, zg.axes, zg.axis_weights)]
    return GridFunction(x_grid, _apply_axes(g.values, mats), dict(g.meta))


# ----------------------------------------------------------------------------
# parity-restricted transforms on the orthant


def hankel_apply(values, in_grid: Grid, eta, out_nodes) -> np.ndarray:
    """Real parity-``eta`` transform of samples on ``in_grid`` evaluated at ``out_nodes``.

    ``out_nodes`` is a tuple of per-axis node arrays (a tensor product).
    """
    eta = as_sign_vector(eta, in_grid.n)
    mats = [
        hankel_matrix(lj, e, u, x, w)
        for lj, e, u, x, w in zip(in_grid.lam, eta, out_nodes, in_grid.axes, in_grid.axis_weights)
    ]
    return _apply_axes(values, mats)


def hankel_at_points(values, in_grid: Grid, eta, points) -> np.ndarray:
    """Parity-``eta`` transform evaluated at scattered points of shape ``(m, n)``."""
    eta = as_sign_vector(eta, in_grid.n)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    v = np.asarray(values)
    # contract the last axis first, carrying the point index along
    rows = None
    for j in reversed(range(in_grid.n)):
        lj, e = in_grid.lam[j], eta[j]
        x, w = in_grid.axes[j], in_grid.axis_weights[j]
        u = np.multiply.outer(pts[:, j], x)
        k = u**e * bessel_j_ratio(lj + e - 0.5, u) * w  # (m, N_j)
        if rows is None:
            rows = np.tensordot(v, k, axes=([j], [1]))  # (..., m)
        else:
            # rows has shape (N_0..N_j, m); contract axis j pointwise in m
            rows = np.einsum("...im,mi->...m", rows, k)
    return rows


def transform_plus(f: GridFunction, eta, z_grid: Grid) -> SpectralFunction:
    """Restriction of the transform of the ``eta``-extension, computed on the orthant."""
    g = f.grid
    if not g.positive or not z_grid.positive:
        raise DomainError("restricted transforms act on positive grids")
    eta = as_sign_vector(eta, g.n)
    v = hankel_apply(f.values, g, eta, z_grid.axes)
    return SpectralFunction(z_grid, (-1j) ** sum(eta) * v, dict(f.meta))


def inverse_plus(g: GridFunction, eta, x_grid: Grid) -> GridFunction:
    """Restriction of the inverse transform of the ``eta``-extension."""
    zg = g.grid
    if not zg.positive or not x_grid.positive:
        raise DomainError("restricted transforms act on positive grids")
    eta = as_sign_vector(eta, zg.n)
    v = hankel_apply(g.values, zg, eta, x_grid.axes)
    return GridFunction(x_grid, (1j) ** sum(eta) * v, dict(g.meta))


def transform_plus_by_extension(f: GridFunction, eta, z_grid: Grid) -> SpectralFunction:
    """Same quantity as :func:`transform_plus`, through the full transform."""
    ext = eta_extension(f, eta)
    full = dunkl_forward(ext, z_grid.mirrored())
    out = restrict_plus(full)
    return SpectralFunction(out.grid, out.values, out.meta)


# ----------------------------------------------------------------------------
# multipliers


@dataclass(frozen=True, eq=False)
class Multiplier:
    """Spectral multiplier ``m(|z|)``.

    Build with :meth:`laplace_transform`, :meth:`laplace_stieltjes`,
    :meth:`explicit` or :meth:`semigroup`.
    """

    kind: str
    symbol: Callable[[np.ndarray], np.ndarray]
    payload: dict = field(default_factory=dict)

    def __call__(self, znorm):
        return self.symbol(np.asarray(znorm, dtype=float))

    @classmethod
    def explicit(cls, m, sup_bound=None):
        return cls("explicit", m, {"sup_bound": sup_bound})

    @classmethod
    def semigroup(cls, kind: str, t: float):
        """Heat ``exp(-t |z|**2)`` or Poisson ``exp(-t |z|)`` multiplier."""
        if t <= 0:
            raise DomainError("semigroup time must be positive")
        if kind == "heat":
            return cls("heat", lambda r: np.exp(-t * r**2), {"t": t})
        if kind == "poisson":
            return cls("poisson", lambda r: np.exp(-t * r), {"t": t})
        raise DomainError(f"unknown semigroup {kind!r}")

    @classmethod
    def laplace_transform(cls, profile, sup_bound: float, nodes: int = 128, span=(1e-8, 1e4)):
        """``m(z) = |z|**2 int_0^inf exp(-t |z|**2) profile(t) dt``.

        ``profile`` must be bounded; ``sup_bound`` is its declared bound.  In
        ``tau = t |z|**2`` the integral is ``int exp(-tau) profile(tau / |z|**2)``,
        computed by a log-Gauss rule on ``tau`` in ``span``.
        """
        if sup_bound is None or not np.isfinite(sup_bound):
            raise DomainError("Laplace-transform multipliers need a finite sup bound")
        tau, wt = log_gauss(span[0], span[1], nodes)
        wt = wt * np.exp(-tau)

        def m(r):
            r = np.asarray(r, dtype=float)
            r2 = np.where(r > 0, r * r, 1.0)
            out = np.tensordot(profile(np.multiply.outer(1.0 / r2, tau)), wt, axes=([-1], [0]))
            return np.where(r > 0, out, 0.0)

        return cls("laplace_transform", m, {"sup_bound": float(sup_bound), "profile": profile})

    @classmethod
    def imaginary_power(cls, sigma: float):
        """``|z|**(2 i sigma)`` written as a Laplace-transform multiplier."""
        c = 1.0 / special.gamma(1.0 - 1j * sigma)
        return cls.laplace_transform(lambda t: c * t ** (-1j * sigma), sup_bound=abs(c))

    @classmethod
    def laplace_stieltjes(cls, atoms):
        """``m(z) = sum_k c_k exp(-t_k |z|**2)`` for at most 64 atoms ``(t_k, c_k)``."""
        atoms = [(float(t), complex(c)) for t, c in atoms]
        if len(atoms) > 64:
            raise DomainError("at most 64 atoms are supported")
        if any(t <= 0 or not math.isfinite(t) for t, _ in atoms):
            raise DomainError("atom locations must be positive and finite")
        if not all(math.isfinite(abs(c)) for _, c in atoms):
            raise DomainError("atom masses must be finite")
        ts = np.array([t for t, _ in atoms])
        cs = np.array([c for _, c in atoms])

        def m(r):
            r = np.asarray(r, dtype=float)
            return np.tensordot(np.exp(-np.multiply.outer(r * r, ts)), cs, axes=([-1], [0]))

        return cls("laplace_stieltjes", m, {"atoms": atoms, "total_variation": float(np.sum(np.abs(cs)))})


def spectral_norms(grid: Grid) -> np.ndarray:
    """``|z|`` at every node of a tensor grid."""
    return np.sqrt(np.sum(grid.points**2, axis=-1))


def apply_multiplier(f: GridFunction, m, eta, z_grid: Grid | None = None) -> GridFunction:
    """Spectral sandwich: inverse of ``m * transform`` restricted to the orthant.

    ``m`` is a :class:`Multiplier` or any callable of ``|z|``; the default
    frequency grid reuses the space grid nodes scaled to ``[0, 20]``.
    """
    if z_grid is None:
        z_grid = default_spectral_grid(f.grid)
    eta = as_sign_vector(eta, f.grid.n)
    fh = transform_plus(f, eta, z_grid)
    mv = m(spectral_norms(z_grid))
    return inverse_plus(fh.with_values(mv * fh.values), eta, f.grid)


def default_spectral_grid(grid: Grid, z_max: float = 20.0) -> Grid:
    return spectral_grid(grid.lam, z_max, [a.size for a in grid.axes])
