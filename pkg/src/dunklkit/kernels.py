"""Heat and Poisson kernels of the parity-restricted semigroups, with derivatives.

The parity-``eta`` heat kernel on the orthant is a product over axes of

    (x y)**eta (2t)**-(lam + eta + 1/2) exp(-(x - y)**2 / 4t) rs(lam + eta - 1/2, x y / 2t)

where ``rs(nu, w) = exp(-w) I_nu(w) / w**nu``.  Points are arrays with the
coordinate on the last axis; ``t`` broadcasts against ``x[..., 0]``.
"""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .analytic import (
    DomainError,
    as_lambda,
    ball_volume_1d,
    bessel_i_ratio_scaled,
    log_trapezoid,
    omega_quadrature_laplace,
    omega_laplace,
)
from .symmetry import as_order, as_sign_vector, central_stencil, sign_vectors

MAX_ORDER = 6


class UnsupportedOrderError(DomainError):
    """Requested derivative order exceeds what the stencils support."""


@dataclass(frozen=True, eq=False)
class HeatKernelParams:
    """Multiplicity, parity and time (scalar or array) of a kernel evaluation."""

    lam: np.ndarray
    eta: tuple[int, ...]
    t: np.ndarray

    def __post_init__(self):
        lam = as_lambda(self.lam)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "eta", as_sign_vector(self.eta, lam.size))
        t = np.asarray(self.t, dtype=float)
        if np.any(~(t > 0)):
            raise DomainError("time must be positive")
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return self.lam.size

    def at(self, t) -> "HeatKernelParams":
        return HeatKernelParams(self.lam, self.eta, t)


@dataclass(frozen=True)
class DerivativeSpec:
    """Orders ``K`` in time, ``M`` of the parity-adapted operator, plain ``l``, ``r``."""

    K: int = 0
    M: tuple[int, ...] = (0,)
    l: tuple[int, ...] = (0,)
    r: tuple[int, ...] = (0,)

    def __post_init__(self):
        if int(self.K) < 0:
            raise DomainError("time order must be nonnegative")
        object.__setattr__(self, "K", int(self.K))
        for name in ("M", "l", "r"):
            object.__setattr__(self, name, as_order(getattr(self, name)))

    def sized(self, n: int) -> "DerivativeSpec":
        def fit(v):
            return tuple(v) if len(v) == n else (tuple(v) * n if len(v) == 1 else as_order(v, n))

        return DerivativeSpec(self.K, fit(self.M), fit(self.l), fit(self.r))

    @property
    def is_zero(self) -> bool:
        return self.K == 0 and not any(self.M) and not any(self.l) and not any(self.r)


def _points(lam, *pts):
    out = []
    for p in pts:
        a = np.asarray(p, dtype=float)
        if lam.size == 1 and (a.ndim == 0 or a.shape[-1] != 1):
            a = a[..., None]
        if a.shape[-1] != lam.size:
            raise DomainError(f"point dimension {a.shape} does not match n={lam.size}")
        out.append(a)
    return out


def _broadcast(params, x, y):
    # points and times against each other; the coordinate axis stays last
    x, y = _points(params.lam, x, y)
    shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1], np.shape(params.t))
    full = shape + (params.n,)
    return np.broadcast_to(x, full), np.broadcast_to(y, full), np.broadcast_to(params.t, shape)


# ----------------------------------------------------------------------------
# values


def heat_axis(lam_j, eta_j, t, x, y):
    """One-dimensional factor of the parity-``eta`` heat kernel.

    Accepts signed ``x``, ``y``: the result is then the ``eta``-symmetric
    extension in each variable.
    """
    mu = lam_j + eta_j
    ax, ay = np.abs(x), np.abs(y)
    w = ax * ay / (2.0 * t)
    core = (2.0 * t) ** (-mu - 0.5) * np.exp(-((ax - ay) ** 2) / (4.0 * t)) * bessel_i_ratio_scaled(mu - 0.5, w)
    return core * (x * y) ** eta_j if eta_j else core


def heat_kernel_product(params: HeatKernelParams, x, y):
    """Parity-``eta`` heat kernel on the orthant (product form)."""
    x, y = _points(params.lam, x, y)
    out = 1.0
    for j, (lj, e) in enumerate(zip(params.lam, params.eta)):
        out = out * heat_axis(lj, e, params.t, x[..., j], y[..., j])
    return out


def dunkl_heat_kernel(lam, t, x, y):
    """Heat kernel of the full Dunkl Laplacian on R^n.

    Assembled as ``2**-n sum_eta (x y)**eta W^(lam + eta)``, which is literally
    the average of the parity-restricted kernels evaluated at signed points.
    """
    lam = as_lambda(lam)
    x, y = _points(lam, x, y)
    total = 0.0
    for eta in sign_vectors(lam.size):
        total = total + heat_kernel_product(HeatKernelParams(lam, eta, t), x, y)
    return total / 2**lam.size


def integral_rep_constant(lam, eps) -> float:
    """``prod (2 lam + 1)**(1 - eps) * 2**(-n/2 - |lam| - 2|eps|)``."""
    lam = np.asarray(lam, dtype=float)
    eps = np.asarray(eps)
    return float(np.prod((2 * lam + 1) ** (1 - eps)) * 2.0 ** (-lam.size / 2 - lam.sum() - 2 * eps.sum()))


def heat_kernel_integral_rep(params: HeatKernelParams, x, y, order: int = 64, constant_factor: float = 1.0):
    """Parity-``eta`` heat kernel from its integral representation over [-1, 1]^n.

    Sums, over ``eps`` in {0, 1}^n, the constant times a power of ``t`` and of
    ``x y`` times ``int exp(-q(x, y, s) / 4t) dOmega_{lam + eta + 1 + eps}(s)``
    with ``q(x, y, s) = |x|^2 + |y|^2 + 2 sum x_j y_j s_j``.  The Gaussian is
    factored as ``exp(-|x - y|^2 / 4t) exp(-sum x_j y_j (1 + s_j) / 2t)`` so
    that nothing underflows.  ``constant_factor`` rescales the constants and
    exists for sensitivity checks.
    """
    lam, eta = params.lam, np.asarray(params.eta)
    x, y = _points(lam, x, y)
    t = np.asarray(params.t)
    n = lam.size
    mu = lam + eta
    xy = x * y
    base = np.exp(-np.sum((x - y) ** 2, axis=-1) / (4.0 * t))
    # the measure and the exponent are products over axes
    w = xy / (2.0 * t[..., None])
    axis_int = [
        [omega_quadrature_laplace(mu[j] + 1 + e, w[..., j], order) for e in (0, 1)] for j in range(n)
    ]
    total = 0.0
    for eps in sign_vectors(n):
        eps = np.asarray(eps)
        integral = np.prod([axis_int[j][e] for j, e in enumerate(eps)], axis=0)
        c = integral_rep_constant(mu, eps) * constant_factor
        power = t ** (-(n / 2 + mu.sum() + 2 * eps.sum()))
        total = total + c * power * np.prod(xy ** (2 * eps + eta), axis=-1) * integral
    return base * total


# ----------------------------------------------------------------------------
# derivatives


def _heat_axis_dx(lam_j, eta_j, t, x, y):
    """Exact ``d/dx`` of :func:`heat_axis` on the orthant."""
    mu = lam_j + eta_j
    w = x * y / (2.0 * t)
    pre = (x * y) ** eta_j * (2.0 * t) ** (-mu - 0.5) * np.exp(-((x - y) ** 2) / (4.0 * t))
    r0 = bessel_i_ratio_scaled(mu - 0.5, w)
    r1 = bessel_i_ratio_scaled(mu + 0.5, w)
    return pre * ((eta_j / x - x / (2.0 * t)) * r0 + (y * w / (2.0 * t)) * r1)


def _heat_axis_dt(lam_j, eta_j, t, x, y):
    """Exact ``d/dt`` of :func:`heat_axis` on the orthant."""
    mu = lam_j + eta_j
    w = x * y / (2.0 * t)
    pre = (x * y) ** eta_j * (2.0 * t) ** (-mu - 0.5) * np.exp(-((x - y) ** 2) / (4.0 * t))
    r0 = bessel_i_ratio_scaled(mu - 0.5, w)
    r1 = bessel_i_ratio_scaled(mu + 0.5, w)
    return pre * ((((x - y) ** 2) / (4.0 * t * t) - (mu + 0.5) / t) * r0 + (w / t) * (r0 - w * r1))


def _axis_base(lam_j, eta_j, odd, t, x, y):
    """``(d/dx + 2 lam eta / x)`` (odd order) or identity applied to one axis factor."""
    if not odd:
        return heat_axis(lam_j, eta_j, t, x, y)
    d = _heat_axis_dx(lam_j, eta_j, t, x, y)
    if eta_j:
        d = d + (2.0 * lam_j / x) * heat_axis(lam_j, eta_j, t, x, y)
    return d


def _rel_step(order: int, accuracy: int) -> float:
    return min(0.08, 0.5 * 1e-16 ** (1.0 / (order + accuracy)))


def _axis_derivative(lam_j, eta_j, odd, t_order, l_order, r_order, t, x, y, accuracy=6):
    """``d_t^a d_x^l d_y^r`` of :func:`_axis_base` by tensor centred differences.

    Steps follow the local scales of the kernel: in ``t`` the smaller of ``t``
    and ``4 t**2 / |x - y|**2``; in ``x`` the smaller of ``x``, ``sqrt(t)`` and
    ``2 t / |x - y|``.
    """
    if t_order == l_order == r_order == 0:
        return _axis_base(lam_j, eta_j, odd, t, x, y)
    if t_order == 1 and l_order == r_order == odd == 0:
        return _heat_axis_dt(lam_j, eta_j, t, x, y)
    t, x, y = np.broadcast_arrays(np.asarray(t, float), np.asarray(x, float), np.asarray(y, float))
    d2 = (x - y) ** 2
    with np.errstate(divide="ignore"):
        t_scale = t * np.minimum(1.0, 4.0 * t / np.where(d2 > 0, d2, np.inf))
        sp_scale = np.minimum(np.sqrt(t), 2.0 * t / np.where(d2 > 0, np.sqrt(d2), np.inf))
    hx = _rel_step(l_order, accuracy) * np.minimum(x, sp_scale)
    hy = _rel_step(r_order, accuracy) * np.minimum(y, sp_scale)
    ht = _rel_step(t_order, accuracy) * t_scale
    sts = [central_stencil(k, accuracy) for k in (t_order, l_order, r_order)]
    tt, xx, yy, cc = [], [], [], []
    for (ot, ct), (ox, cx), (oy, cy) in itertools.product(*[list(zip(*s)) for s in sts]):
        c = ct * cx * cy
        if c == 0.0:
            continue
        tt.append(t + ot * ht)
        xx.append(x + ox * hx)
        yy.append(y + oy * hy)
        cc.append(c)
    vals = _axis_base(lam_j, eta_j, odd, np.stack(tt), np.stack(xx), np.stack(yy))
    acc = np.tensordot(np.asarray(cc), vals, axes=(0, 0))
    return acc / (ht**t_order * hx**l_order * hy**r_order)


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for k in range(total + 1):
        for rest in _compositions(total - k, parts - 1):
            yield (k,) + rest


def kernel_derivative(params: HeatKernelParams, spec: DerivativeSpec, x, y, accuracy: int = 6):
    """``d_t^K d_x^l d_y^r`` of the parity-adapted derivative of the heat kernel.

    Along each axis the order-``M_j`` parity-adapted operator becomes
    ``M_j // 2`` time derivatives of ``(d/dx + 2 lam eta (M_j mod 2) / x)``
    applied to the kernel; the remaining derivatives are finite differences
    and the time derivative of the product is expanded by Leibniz's rule.
    """
    lam, eta = params.lam, params.eta
    n = lam.size
    spec = spec.sized(n)
    x, y = _points(lam, x, y)
    t = params.t
    for j in range(n):
        if spec.K + spec.M[j] // 2 + spec.l[j] + spec.r[j] > MAX_ORDER:
            raise UnsupportedOrderError("derivative order too high for the stencils")
    odd = [m % 2 for m in spec.M]
    half = [m // 2 for m in spec.M]
    cache = {}

    def axis(j, k):
        key = (j, k)
        if key not in cache:
            cache[key] = _axis_derivative(
                lam[j], eta[j], odd[j], half[j] + k, spec.l[j], spec.r[j], t, x[..., j], y[..., j], accuracy
            )
        return cache[key]

    total = 0.0
    for ks in _compositions(spec.K, n):
        coef = math.factorial(spec.K) / math.prod(math.factorial(k) for k in ks)
        term = coef
        for j, k in enumerate(ks):
            term = term * axis(j, k)
        total = total + term
    return total


# ----------------------------------------------------------------------------
# Poisson kernels by subordination


def _subordination_rule(params: HeatKernelParams, x, y, step=0.2, depth=40.0):
    """Trapezoid rule in ``log u`` for ``int_0^inf g(u) exp(-u) du / sqrt(pi u)``.

    Per sample the range is chosen from the decay ``exp(-(1 + |x-y|**2/t**2) u)``
    at large ``u`` and the power ``u**(a + 1/2)`` at small ``u``, where ``a`` is
    the homogeneity of the heat kernel.  Returns ``u`` and weights of shape
    ``(m, ...)``.
    """
    lam, eta = params.lam, np.asarray(params.eta)
    t = params.t
    a = lam.size / 2 + lam.sum() + eta.sum()
    d2 = np.sum((x - y) ** 2, axis=-1)
    big = np.max(np.maximum(x, y), axis=-1) ** 2
    kappa = 1.0 + d2 / t**2
    hi = np.log(depth / kappa)
    knee = np.minimum(hi, np.log(t**2 / (4.0 * np.maximum(big, 1e-300))))
    lo = knee - depth / (a + 0.5)
    m = int(np.ceil(np.max(hi - lo) / step)) + 1
    frac = np.linspace(0.0, 1.0, m).reshape((m,) + (1,) * np.ndim(hi))
    ell = lo + frac * (hi - lo)
    h = (hi - lo) / (m - 1)
    u = np.exp(ell)
    w = h * np.sqrt(u / math.pi) * np.exp(-u)
    w[0] *= 0.5
    w[-1] *= 0.5
    return u, w


def poisson_kernel(params: HeatKernelParams, x, y, step: float = 0.2):
    """Parity-``eta`` Poisson kernel by subordination to the heat kernel.

    ``params.t`` is the Poisson time; the heat kernel is evaluated at
    ``t**2 / 4u`` on a log-trapezoid rule in ``u``.
    """
    x, y, t = _broadcast(params, x, y)
    p = params.at(t)
    u, w = _subordination_rule(p, x, y, step)
    g = heat_kernel_product(p.at(t**2 / (4.0 * u)), x, y)
    return np.sum(w * g, axis=0)


def faa_di_bruno_terms(K: int):
    """Pairs ``(k1, k2, c)`` with ``k1 + 2 k2 = K`` for ``d_t^K g(t**2 / 4u)``.

    The term is ``c * g^(k1 + k2)(t**2 / 4u) * t**k1 * u**-(k1 + k2)``.
    """
    out = []
    for k2 in range(K // 2 + 1):
        k1 = K - 2 * k2
        c = math.factorial(K) / (math.factorial(k1) * math.factorial(k2)) * 2.0**-k1 * 4.0**-k2
        out.append((k1, k2, c))
    return out


def poisson_kernel_derivative(params: HeatKernelParams, spec: DerivativeSpec, x, y, step: float = 0.2):
    """``d_t^K`` and spatial derivatives of the Poisson kernel via subordination."""
    n = params.n
    spec = spec.sized(n)
    x, y, t = _broadcast(params, x, y)
    p = params.at(t)
    u, w = _subordination_rule(p, x, y, step)
    r = t**2 / (4.0 * u)
    total = 0.0
    for k1, k2, c in faa_di_bruno_terms(spec.K):
        inner = DerivativeSpec(k1 + k2, spec.M, spec.l, spec.r)
        g = kernel_derivative(p.at(r), inner, x, y)
        total = total + c * np.sum(w * g * t**k1 * u ** (-(k1 + k2)), axis=0)
    return total


# ----------------------------------------------------------------------------
# derivative envelope


def est_envelope(params: HeatKernelParams, spec: DerivativeSpec, x, y, gauss_factor: float = 1.0 / 8.0):
    """Sum of the monomial-times-Gaussian bounds for kernel derivatives.

    Every term is ``x**a y**b t**c int exp(-gauss_factor q / t) dOmega``; the
    ``Omega`` integrals are Bessel ratios, so the sum factorizes over axes.
    """
    lam, eta = params.lam, params.eta
    spec = spec.sized(lam.size)
    x, y = _points(lam, x, y)
    t = params.t
    out = t ** (-float(spec.K))
    for j, (lj, e) in enumerate(zip(lam, eta)):
        xj, yj = x[..., j], y[..., j]
        w = 2.0 * gauss_factor * xj * yj / t
        gauss = np.exp(-gauss_factor * (xj - yj) ** 2 / t)
        acc = 0.0
        for eps in (0, 1):
            integral = gauss * omega_laplace(lj + e + 1 + eps, w)
            for zeta, rho in itertools.product((0, 1), repeat=2):
                for al, be in itertools.product((0, 1, 2) if eps else (0,), repeat=2):
                    px = 2 * eps - al * eps + e - zeta * e
                    py = 2 * eps - be * eps + e - rho * e
                    pt = -(0.5 + lj + e + 2 * eps) - (spec.M[j] + spec.l[j] + spec.r[j]) / 2
                    pt += (al * eps + zeta * e + be * eps + rho * e) / 2
                    acc = acc + xj**px * yj**py * t**pt * integral
        out = out * acc
    return out


# ----------------------------------------------------------------------------
# Banach-space contexts


@dataclass(frozen=True)
class ConeSpec:
    """Cone shape (``'parabolic'`` |z| < sqrt(t), ``'straight'`` |z| < t) and aperture."""

    shape: str = "parabolic"
    beta: float = 1.0

    def __post_init__(self):
        if self.shape not in ("parabolic", "straight"):
            raise DomainError(f"unknown cone shape {self.shape!r}")
        if not self.beta > 0:
            raise DomainError("aperture must be positive")

    def radius(self, t):
        """Section radius at aperture one; the normalizing cube has this radius."""
        t = np.asarray(t, dtype=float)
        return np.sqrt(t) if self.shape == "parabolic" else t


@dataclass(frozen=True, eq=False)
class BanachContext:
    """Discretized norm over ``t`` (sup, weighted L2) or over a cone."""

    kind: str
    t_grid: np.ndarray
    t_weights: np.ndarray
    power: float = 0.0
    cone: ConeSpec | None = None

    def __post_init__(self):
        if self.kind not in ("sup_t", "l2_t", "l2_cone"):
            raise DomainError(f"unknown norm kind {self.kind!r}")
        t = np.asarray(self.t_grid, dtype=float)
        if t.size == 0:
            raise DomainError("empty time grid")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise DomainError("time grid must be strictly increasing")
        if self.kind == "l2_cone" and self.cone is None:
            raise DomainError("cone norms need a ConeSpec")

    @classmethod
    def make(cls, kind, lo=1e-6, hi=1e6, step=0.1, power=0.0, cone=None):
        if hi / lo < 1e6 * (1 - 1e-12):
            raise DomainError("time grids must span at least six decades")
        t, w = log_trapezoid(lo, hi, step)
        return cls(kind, t, w, power, cone)


def banach_norm(values, ctx: BanachContext, cone_weights=None):
    """Norm of kernel samples over the context.

    ``values`` has the time index last (``sup_t``, ``l2_t``) or second to last
    with the cone nodes last (``l2_cone``, where ``cone_weights`` of the same
    shape carry the ``Xi`` density and the quadrature weights).
    """
    v = np.abs(np.asarray(values))
    if v.size == 0:
        raise DomainError("no samples")
    if ctx.kind == "sup_t":
        return np.max(v, axis=-1)
    tw = ctx.t_weights * ctx.t_grid**ctx.power
    if ctx.kind == "l2_t":
        return np.sqrt(np.sum(v**2 * tw, axis=-1))
    if cone_weights is None:
        raise DomainError("cone norms need cone weights")
    inner = np.sum(v**2 * cone_weights, axis=-1)
    return np.sqrt(np.sum(inner * tw, axis=-1))


def cone_rule_1d(lam_j, x, radius, beta=1.0, nodes=9):
    """Rule over ``z`` in ``(-beta radius, beta radius)`` with ``x + z > 0``.

    Weights integrate against ``(x + z)**(2 lam) / V_radius(x)`` (one factor of
    ``Xi``).  The substitution ``v = (x + z)**(2 lam + 1)`` absorbs the weight,
    so the rule is exact for constants.
    """
    x = np.asarray(x, dtype=float)
    radius = np.asarray(radius, dtype=float)
    p = 2.0 * lam_j + 1.0
    lo = np.maximum(0.0, x - beta * radius)
    hi = x + beta * radius
    g, gw = np.polynomial.legendre.leggauss(nodes)
    va, vb = lo**p, hi**p
    v = 0.5 * (vb - va)[..., None] * (g + 1.0) + va[..., None]
    u = v ** (1.0 / p)
    w = 0.5 * (vb - va)[..., None] * gw / p
    w = w / ball_volume_1d(lam_j, x, radius)[..., None]
    # nodes crowd zero for small p; keep x + z representable as positive
    z = np.maximum(u - x[..., None], np.nextafter(-x, 0.0)[..., None])
    return z, w


# ----------------------------------------------------------------------------
# dump


def kernel_rows(params: HeatKernelParams, spec: DerivativeSpec, x, y, values):
    """Rows ``(n, lambda..., eta..., K, M..., x..., y..., t, value)``."""
    n = params.n
    spec = spec.sized(n)
    x, y, t = _broadcast(params, x, y)
    t = t.ravel()
    v = np.broadcast_to(values, x.shape[:-1]).ravel()
    xs, ys = x.reshape(-1, n), y.reshape(-1, n)
    for i in range(xs.shape[0]):
        yield [n, *params.lam, *params.eta, spec.K, *spec.M, *xs[i], *ys[i], t[i], v[i]]


def kernel_header(n: int):
    return (
        ["n"]
        + [f"lambda{j + 1}" for j in range(n)]
        + [f"eta{j + 1}" for j in range(n)]
        + ["K"]
        + [f"M{j + 1}" for j in range(n)]
        + [f"x{j + 1}" for j in range(n)]
        + [f"y{j + 1}" for j in range(n)]
        + ["t", "value"]
    )


def kernel_csv(params, spec, x, y, values) -> str:
    """CSV dump of kernel samples with 17 significant digits."""
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(kernel_header(params.n))
    for row in kernel_rows(params, spec, x, y, values):
        wr.writerow([format(float(v), ".17g") if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()
