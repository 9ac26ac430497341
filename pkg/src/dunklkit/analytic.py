"""Special functions, weights, measures and quadrature rules.

Everything here is a scalar building block for the reflection group Z_2^n
setting: Bessel ratios, the product weight ``prod |x_j|^(2 lam_j)``, volumes
of cubes in the positive orthant, the Jacobi-type measures on [-1, 1] used by
the heat-kernel integral representation, and a handful of quadrature rules.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

# Series/library crossovers for the Bessel ratios.  The J series alternates,
# so its crossover is smaller to keep cancellation below ~1e-13.
J_SERIES_CUTOFF = 8.0
I_SERIES_CUTOFF = 12.0
I_ASYMPTOTIC_CUTOFF = 1e8
SERIES_TERMS = 60
# Tabulated scaled I ratio: panel width, Chebyshev degree, range; the
# large-argument expansion with HANKEL_TERMS terms is exact to rounding past it.
I_TABLE_PANEL = 0.05
I_TABLE_DEGREE = 6
I_TABLE_LIMIT = 50.0
HANKEL_TERMS = 16


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class SingularWeightWarning(RuntimeWarning):
    """A weight density was evaluated exactly on a singular hyperplane."""


@dataclass(frozen=True)
class MultiplicityVector:
    """Multiplicity vector with entries in (-1/2, inf)."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in np.atleast_1d(self.values))
        if len(vals) == 0:
            raise DomainError("multiplicity vector must have length >= 1")
        if not all(v > -0.5 and math.isfinite(v) for v in vals):
            raise DomainError(f"multiplicity entries must lie in (-1/2, inf): {vals}")
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def as_lambda(lam) -> np.ndarray:
    """Validate a multiplicity vector and return it as a float array."""
    if isinstance(lam, MultiplicityVector):
        return np.asarray(lam.values, dtype=float)
    return np.asarray(MultiplicityVector(tuple(np.atleast_1d(lam))).values, dtype=float)


def _check_order(nu):
    nu = float(nu)
    if not nu > -1.0:
        raise DomainError(f"Bessel order must exceed -1, got {nu}")
    return nu


def _series(nu, w, sign):
    # sum_m sign^m (w/2)^(2m) / (2^nu m! Gamma(m+nu+1))
    q = sign * (w / 2.0) ** 2
    term = np.full_like(w, 1.0 / (2.0**nu * special.gamma(nu + 1.0)))
    total = term.copy()
    for m in range(1, SERIES_TERMS):
        term = term * q / (m * (m + nu))
        total = total + term
        # positive series: stop once every tail is below rounding
        if sign > 0 and m % 4 == 0 and np.all(term <= 1e-17 * total):
            break
    return total


def bessel_i_ratio(nu, w):
    """``I_nu(w) / w**nu`` as an entire function of ``w >= 0``.

    Parameters
    ----------
    nu : float
        Order, ``nu > -1``.
    w : array_like
        Nonnegative arguments.

    Returns
    -------
    ndarray
        Positive values.  Overflows to ``inf`` beyond ``w ~ 700``; use
        :func:`bessel_i_ratio_scaled` there.
    """
    return np.exp(np.asarray(w, dtype=float)) * bessel_i_ratio_scaled(nu, w)


def _i_scaled_reference(nu, w):
    # series, then scipy, then the large-argument expansion
    small = w <= I_SERIES_CUTOFF
    out = np.empty_like(w)
    ws = w[small]
    out[small] = np.exp(-ws) * _series(nu, ws, 1.0)
    huge = w > I_ASYMPTOTIC_CUTOFF
    mid = ~small & ~huge
    wl = w[mid]
    out[mid] = special.ive(nu, wl) / wl**nu
    out[huge] = _i_scaled_asymptotic(nu, w[huge]) / w[huge] ** nu
    return out


@lru_cache(maxsize=512)
def _i_table(nu: float):
    """Chebyshev coefficients, one column per panel, of the scaled ratio on [0, I_TABLE_LIMIT]."""
    panels = int(round(I_TABLE_LIMIT / I_TABLE_PANEL))
    left = np.arange(panels) * I_TABLE_PANEL

    def f(s):
        w = left + (np.asarray(s)[:, None] + 1.0) * (0.5 * I_TABLE_PANEL)
        return _i_scaled_reference(nu, w)

    c = np.polynomial.chebyshev.chebinterpolate(f, I_TABLE_DEGREE)
    c.setflags(write=False)
    return c


def bessel_i_ratio_scaled(nu, w):
    """``exp(-w) I_nu(w) / w**nu`` for ``w >= 0``.

    Piecewise Chebyshev interpolation of the series/library values (cached
    per order) below ``I_TABLE_LIMIT``, the large-argument expansion above.
    """
    nu = _check_order(nu)
    scalar = np.ndim(w) == 0
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if np.any(w < 0):
        raise DomainError("bessel_i_ratio needs w >= 0")
    c = _i_table(nu)
    panels = c.shape[1]
    pos = np.minimum(w, I_TABLE_LIMIT) * (1.0 / I_TABLE_PANEL)
    k = np.minimum(pos.astype(np.intp), panels - 1)
    s2 = 2.0 * (2.0 * (pos - k) - 1.0)
    # Clenshaw recurrence with per-element coefficients
    b1 = np.zeros_like(w)
    b2 = np.zeros_like(w)
    for j in range(c.shape[0] - 1, 0, -1):
        b1, b2 = c[j].take(k) + s2 * b1 - b2, b1
    out = c[0].take(k) + 0.5 * s2 * b1 - b2
    far = w > I_TABLE_LIMIT
    if np.any(far):
        wf = w[far]
        out[far] = _i_scaled_asymptotic(nu, wf, HANKEL_TERMS) / wf**nu
    return out[0] if scalar else out


def _i_scaled_asymptotic(nu, w, terms=4):
    # scipy's ive returns nan for very large arguments
    mu = 4.0 * nu * nu
    term = np.ones_like(w)
    total = term.copy()
    for k in range(1, terms):
        term = -term * (mu - (2 * k - 1) ** 2) / (k * 8.0 * w)
        total = total + term
    return total / np.sqrt(2.0 * np.pi * w)


def bessel_j_ratio(nu, w):
    """``J_nu(w) / w**nu``, the even entire function of real ``w``."""
    nu = _check_order(nu)
    w = np.abs(np.asarray(w, dtype=float))
    small = w <= J_SERIES_CUTOFF
    out = np.empty_like(w)
    out[small] = _series(nu, w[small], -1.0)
    wl = w[~small]
    out[~small] = special.jv(nu, wl) / wl**nu
    return out[()] if out.ndim == 0 else out


def _split_points(lam, *pts):
    lam = as_lambda(lam)
    out = []
    for p in pts:
        a = np.asarray(p, dtype=float)
        # in one dimension a bare batch of scalars is accepted
        if lam.size == 1 and (a.ndim == 0 or a.shape[-1] != 1):
            a = a[..., None]
        if a.shape[-1] != lam.size:
            raise DomainError(f"point dimension {a.shape} does not match n={lam.size}")
        out.append(a)
    return lam, out


def phi(lam, z, x):
    """Even eigenfunction ``prod_j J_{lam_j-1/2}(x_j z_j) / (x_j z_j)**(lam_j-1/2)``.

    ``z`` and ``x`` broadcast against each other with the coordinate on the
    last axis.
    """
    lam, (z, x) = _split_points(lam, z, x)
    xz = x * z
    out = 1.0
    for j, lj in enumerate(lam):
        out = out * bessel_j_ratio(lj - 0.5, xz[..., j])
    return out


def psi_factor(lam_j, w):
    """One-dimensional factor ``phi^lam(w) + i w phi^(lam+1)(w)`` at ``w = x z``."""
    return bessel_j_ratio(lam_j - 0.5, w) + 1j * w * bessel_j_ratio(lam_j + 0.5, w)


def psi(lam, z, x):
    """Dunkl kernel: tensor product of :func:`psi_factor` over the axes."""
    lam, (z, x) = _split_points(lam, z, x)
    xz = x * z
    out = 1.0 + 0j
    for j, lj in enumerate(lam):
        out = out * psi_factor(lj, xz[..., j])
    return out


def phi_bound_ratio(lam_j, z, x):
    """``|phi_z(x)| / min(1, |xz|**(-lam))`` in one dimension.

    Bounded in ``(x, z)``; the supremum over a sample is the fitted constant of
    the decay estimate for the even eigenfunction.
    """
    w = np.abs(np.asarray(x, dtype=float) * np.asarray(z, dtype=float))
    env = np.where(w <= 1.0, 1.0, w ** (-float(lam_j)))
    return np.abs(bessel_j_ratio(float(lam_j) - 0.5, w)) / env


def weight_density(lam, x):
    """``prod_j |x_j|**(2 lam_j)``.

    Returns ``inf`` where some ``x_j = 0`` with ``lam_j < 0`` and emits a
    :class:`SingularWeightWarning` when that happens.
    """
    lam, (x,) = _split_points(lam, x)
    ax = np.abs(x)
    singular = np.any((ax == 0) & (lam < 0), axis=-1)
    with np.errstate(divide="ignore"):
        out = np.prod(ax ** (2 * lam), axis=-1)
    if np.any(singular):
        warnings.warn("weight density evaluated at a singular point", SingularWeightWarning, stacklevel=2)
        out = np.where(singular, np.inf, out)
    return out[()] if np.ndim(out) == 0 else out


def ball_volume_1d(lam_j, x, t):
    """Measure of ``(x - t, x + t) ∩ (0, inf)`` under ``u**(2 lam_j) du``."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("radius must be positive")
    if np.any(x < 0):
        raise DomainError("centre must lie in [0, inf)")
    p = 2.0 * float(lam_j) + 1.0
    inside = x > t
    r = np.where(inside, t / np.where(inside, x, 1.0), 0.0)
    # far from the origin: x^p [(1+r)^p - (1-r)^p], written to avoid cancellation
    a = p * np.log1p(r)
    b = p * np.log1p(-np.minimum(r, 0.5))
    far = np.where(inside, x, 1.0) ** p * np.exp(b) * np.expm1(a - b)
    near = (x + t) ** p - np.where(inside, (x - t), 0.0) ** p
    out = np.where(inside & (r < 0.5), far, near) / p
    return out[()] if out.ndim == 0 else out


def ball_volume_plus(lam, x, t):
    """Volume of the cube of half-side ``t`` about ``x``, intersected with the orthant.

    Parameters
    ----------
    lam : array_like
        Multiplicity vector.
    x : array_like, shape (..., n)
        Centres with nonnegative coordinates.
    t : float or array_like
        Positive radius, broadcast against ``x[..., 0]``.
    """
    lam, (x,) = _split_points(lam, x)
    out = 1.0
    for j, lj in enumerate(lam):
        out = out * ball_volume_1d(lj, x[..., j], t)
    return out


@dataclass(frozen=True, eq=False)
class OmegaRule:
    """Tensor Gauss-Jacobi rule for the product of the normalized measures
    ``(1 - s**2)**(nu - 1) ds / (sqrt(pi) 2**(nu - 1/2) Gamma(nu))``."""

    nu: tuple[float, ...]
    order: int
    nodes: np.ndarray
    weights: np.ndarray


def omega_mass(nu):
    """Total mass ``1 / (2**(nu - 1/2) Gamma(nu + 1/2))`` of the 1-D measure."""
    nu = np.asarray(nu, dtype=float)
    return 1.0 / (2.0 ** (nu - 0.5) * special.gamma(nu + 0.5))


def omega_normalizer(nu):
    return 1.0 / (math.sqrt(math.pi) * 2.0 ** (nu - 0.5) * special.gamma(nu))


@lru_cache(maxsize=256)
def omega_rule_1d(nu: float, order: int, mass_scale: float = 1.0):
    """Nodes and weights of the one-dimensional rule; cached and read-only."""
    nu = float(nu)
    if not nu > 0:
        raise DomainError(f"measure index must be positive, got {nu}")
    if order < 1:
        raise DomainError("rule order must be positive")
    s, w = special.roots_jacobi(int(order), nu - 1.0, nu - 1.0)
    w = w * omega_normalizer(nu) * mass_scale
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w


@lru_cache(maxsize=64)
def _omega_rule_cached(nu: tuple, order: int):
    rules = [omega_rule_1d(v, order) for v in nu]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrids = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return OmegaRule(nu, order, nodes, weights)


def omega_rule(nu, order: int) -> OmegaRule:
    """Tensor rule for the product measure with indices ``nu`` (entries > 0)."""
    nu = tuple(float(v) for v in np.atleast_1d(nu))
    for v in nu:
        if not v > 0:
            raise DomainError(f"measure index must be positive, got {v}")
    return _omega_rule_cached(nu, int(order))


OMEGA_LAGUERRE_CUTOFF = 30.0


@lru_cache(maxsize=256)
def _laguerre_rule(alpha: float, order: int):
    u, w = special.roots_genlaguerre(int(order), alpha)
    u.setflags(write=False)
    w.setflags(write=False)
    return u, w


def omega_quadrature_laplace(nu, w, order: int = 64):
    """``int exp(-w (1 + s)) dOmega_nu(s)`` for ``w >= 0`` by quadrature of a given order.

    Gauss-Jacobi in ``s`` while ``w`` is moderate; beyond
    ``OMEGA_LAGUERRE_CUTOFF`` the mass sits within ``1/w`` of ``s = -1`` and
    the substitution ``s = -1 + u/w`` with a generalized Gauss-Laguerre rule
    takes over.
    """
    nu = float(nu)
    w = np.asarray(w, dtype=float)
    s, ws = omega_rule_1d(nu, order)
    small = np.minimum(w, OMEGA_LAGUERRE_CUTOFF)[..., None]
    near = np.exp(-small * (1.0 + s)) @ ws
    u, wu = _laguerre_rule(nu - 1.0, order)
    big = np.maximum(w, OMEGA_LAGUERRE_CUTOFF)[..., None]
    r = u / big
    inside = r < 2.0
    smooth = np.where(inside, np.where(inside, 2.0 - r, 1.0) ** (nu - 1.0), 0.0)
    far = (smooth @ wu) * omega_normalizer(nu) * big[..., 0] ** (-nu)
    out = np.where(w <= OMEGA_LAGUERRE_CUTOFF, near, far)
    return out[()] if out.ndim == 0 else out


def omega_laplace(nu, w):
    """``int exp(-w s) dOmega_nu(s)`` in closed form, equal to ``I_{nu-1/2}(w)/w**(nu-1/2)``.

    Returned scaled by ``exp(-|w|)``, which is the natural companion of
    ``exp(-|x - y|**2 / 4t)`` prefactors.
    """
    return bessel_i_ratio_scaled(float(nu) - 0.5, np.abs(w))


def q_form(x, y, s):
    """``|x|**2 + |y|**2 + 2 sum_j x_j y_j s_j`` for ``s`` in the cube [-1, 1]^n."""
    x, y, s = (np.asarray(a, dtype=float) for a in (x, y, s))
    if np.any(np.abs(s) > 1.0):
        raise DomainError("s must lie in [-1, 1]^n")
    return np.sum(x * x + y * y + 2.0 * x * y * s, axis=-1)


def xi(lam, x, z, t):
    """Shifted cone density ``prod_j (x_j + z_j)**(2 lam_j) / V_sqrt(t)(x_j)``."""
    lam, (x, z) = _split_points(lam, x, z)
    u = x + z
    if np.any(u <= 0):
        raise DomainError("x + z must lie in the open positive orthant")
    rt = np.sqrt(np.asarray(t, dtype=float))
    out = 1.0
    for j, lj in enumerate(lam):
        out = out * u[..., j] ** (2 * lj) / ball_volume_1d(lj, x[..., j], rt)
    return out


# ----------------------------------------------------------------------------
# quadrature helpers


def jacobi_axis(lam_j, radius, nodes, mass_scale=1.0):
    """Gauss-Jacobi rule for ``int_0^radius g(x) x**(2 lam_j) dx``.

    No node sits at the origin, so negative ``lam_j`` is harmless.
    """
    u, w = special.roots_jacobi(int(nodes), 0.0, 2.0 * float(lam_j))
    half = 0.5 * float(radius)
    x = half * (1.0 + u)
    return x, w * half ** (2.0 * lam_j + 1.0) * mass_scale


def log_trapezoid(lo, hi, step):
    """Trapezoid rule in ``log t`` for ``int_lo^hi g(t) dt``.

    Returns nodes and weights including the Jacobian ``t``.  The rule is
    spectrally accurate for integrands decaying at both ends of the log axis.
    """
    a, b = math.log(lo), math.log(hi)
    m = max(2, int(math.ceil((b - a) / step)) + 1)
    ell = np.linspace(a, b, m)
    h = ell[1] - ell[0]
    t = np.exp(ell)
    w = h * t
    w[0] *= 0.5
    w[-1] *= 0.5
    return t, w


def log_gauss(lo, hi, nodes):
    """Gauss-Legendre rule in ``log t`` over ``[lo, hi]``; weights include ``t``."""
    u, w = np.polynomial.legendre.leggauss(int(nodes))
    a, b = math.log(lo), math.log(hi)
    ell = 0.5 * (b - a) * u + 0.5 * (a + b)
    t = np.exp(ell)
    return t, 0.5 * (b - a) * w * t


def power_gauss(a, b, nodes, power=1.0):
    """Gauss-Legendre nodes clustered at ``a`` via ``u = a + (b - a) v**power``."""
    v, w = np.polynomial.legendre.leggauss(int(nodes))
    v = 0.5 * (v + 1.0)
    w = 0.5 * w
    u = a + (b - a) * v**power
    return u, w * (b - a) * power * v ** (power - 1.0)


def compensated_sum(values) -> complex | float:
    """Error-free summation of a flat array (``math.fsum`` per real part)."""
    v = np.ravel(np.asarray(values))
    if np.iscomplexobj(v):
        return complex(math.fsum(v.real), math.fsum(v.imag))
    return math.fsum(v)
