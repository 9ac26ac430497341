"""Operators of the parity-restricted heat and Poisson semigroups.

Two realizations are available for most families:

* the spectral route: sandwich a symbol between parity-``eta`` transforms.
  The parity-adapted derivative of order ``M`` turns the parity ``eta`` into
  ``eta xor M`` and multiplies the symbol by ``sign * z**M``;
* the kernel route: integrate a kernel against ``f`` on its grid, with a
  local refinement when the kernel is narrower than the grid can resolve.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import special

from .analytic import DomainError, log_trapezoid
from .kernels import (
    ConeSpec,
    DerivativeSpec,
    HeatKernelParams,
    cone_rule_1d,
    heat_kernel_product,
    kernel_derivative,
    poisson_kernel,
    poisson_kernel_derivative,
)
from .symmetry import (
    Grid,
    GridFunction,
    as_order,
    as_sign_vector,
    eta_component,
    eta_extension,
    intertwining_sign,
    output_parity,
    restrict_plus,
    sign_vectors,
)
from .transform import (
    Multiplier,
    default_spectral_grid,
    hankel_apply,
    hankel_at_points,
    spectral_norms,
)

FAMILIES = ("maximal", "g_function", "laplace_mult", "stieltjes_mult", "riesz", "lusin_area")


class InvalidSpecError(DomainError):
    """Operator specification violates a family constraint."""


class DiagonalError(DomainError):
    """A singular kernel was requested on the diagonal."""


@dataclass(frozen=True)
class OperatorSpec:
    """Family, semigroup and orders of an operator.

    ``payload`` carries a :class:`~dunklkit.transform.Multiplier` for the
    multiplier families.
    """

    family: str
    semigroup: str = "heat"
    K: int = 0
    M: tuple[int, ...] = (0,)
    eta: tuple[int, ...] = (0,)
    payload: object = None
    route: str = "spectral"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidSpecError(f"unknown family {self.family!r}")
        if self.semigroup not in ("heat", "poisson"):
            raise InvalidSpecError(f"unknown semigroup {self.semigroup!r}")
        if self.route not in ("spectral", "kernel"):
            raise InvalidSpecError(f"unknown route {self.route!r}")
        object.__setattr__(self, "M", as_order(self.M))
        object.__setattr__(self, "eta", as_sign_vector(self.eta))
        if int(self.K) < 0:
            raise InvalidSpecError("K must be nonnegative")
        object.__setattr__(self, "K", int(self.K))
        if self.family in ("g_function", "lusin_area") and self.K + sum(self.M) == 0:
            raise InvalidSpecError("square functions need |M| + K > 0")
        if self.family == "riesz" and sum(self.M) == 0:
            raise InvalidSpecError("Riesz transforms need |M| > 0")
        if self.family in ("laplace_mult", "stieltjes_mult") and not isinstance(self.payload, Multiplier):
            raise InvalidSpecError("multiplier families need a Multiplier payload")

    def sized(self, n: int) -> "OperatorSpec":
        M = self.M if len(self.M) == n else as_order(self.M * n if len(self.M) == 1 else self.M, n)
        eta = as_sign_vector(self.eta, n)
        return OperatorSpec(self.family, self.semigroup, self.K, M, eta, self.payload, self.route)

    @property
    def t_power(self) -> float:
        """Power ``w`` of ``t**w dt`` in square-function norms (``w + 1`` is the paper's exponent)."""
        m = sum(self.M)
        return 2 * self.K + (2 * m if self.semigroup == "poisson" else m) - 1

    def metadata(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "payload"}
        if isinstance(self.payload, Multiplier):
            d["multiplier"] = self.payload.kind
        return d


# ----------------------------------------------------------------------------
# spectral route


@dataclass(frozen=True, eq=False)
class SpectralData:
    """Parity-``eta`` transform of ``f`` on a frequency grid (real kernel, no phase)."""

    f: GridFunction
    eta: tuple[int, ...]
    z_grid: Grid
    coeffs: np.ndarray
    znorm: np.ndarray

    @classmethod
    def of(cls, f: GridFunction, eta, z_grid: Grid | None = None) -> "SpectralData":
        z_grid = default_spectral_grid(f.grid) if z_grid is None else z_grid
        eta = as_sign_vector(eta, f.grid.n)
        coeffs = hankel_apply(f.values, f.grid, eta, z_grid.axes)
        return cls(f, eta, z_grid, coeffs, spectral_norms(z_grid))

    def monomial(self, M) -> np.ndarray:
        out = np.ones(self.z_grid.shape)
        for j, m in enumerate(M):
            if m:
                shape = [1] * self.z_grid.n
                shape[j] = -1
                out = out * self.z_grid.axes[j].reshape(shape) ** m
        return out

    def derivative_symbol(self, M):
        """Sign and monomial produced by the order-``M`` parity-adapted derivative."""
        return intertwining_sign(self.eta, M) * self.monomial(M), output_parity(self.eta, M)

    def synthesize(self, symbol, parity, points=None, dense=False) -> np.ndarray:
        """Inverse parity transform of ``symbol * coeffs`` on the grid of ``f`` or at points.

        ``symbol`` may carry extra leading axes (e.g. time); they are kept.
        With ``dense=True`` (one dimension only) scattered points inside the
        space grid are interpolated from a fine uniform table, which avoids
        evaluating Bessel functions at every point.
        """
        spec = np.asarray(symbol) * self.coeffs
        lead = spec.shape[: spec.ndim - self.z_grid.n]
        flat = spec.reshape((-1,) + self.z_grid.shape)
        if points is None:
            outs = [hankel_apply(s, self.z_grid, parity, self.f.grid.axes) for s in flat]
            return np.stack(outs).reshape(lead + self.f.grid.shape)
        pts = np.asarray(points, dtype=float)
        outs = [self._at_points(s, parity, pts.reshape(-1, self.z_grid.n), dense) for s in flat]
        return np.stack(outs).reshape(lead + pts.shape[:-1])

    def _trimmed(self, spec):
        # keep a prefix of each frequency axis, rounded up so matrices stay cached
        axes, weights, sl = [], [], []
        mag = np.abs(spec)
        tol = 1e-17 * max(float(mag.max()), 1e-300)
        for j, a in enumerate(self.z_grid.axes):
            prof = np.max(np.moveaxis(mag, j, 0).reshape(a.size, -1), axis=1)
            hit = np.flatnonzero(prof > tol)
            last = int(hit[-1]) + 1 if hit.size else 1
            last = min(a.size, 16 * math.ceil(last / 16))
            axes.append(a[:last])
            weights.append(self.z_grid.axis_weights[j][:last])
            sl.append(slice(0, last))
        return Grid(tuple(axes), tuple(weights), self.z_grid.lam), spec[tuple(sl)]

    def _at_points(self, spec, parity, pts, dense):
        zg, sub = self._trimmed(spec)
        if not dense or zg.n != 1:
            return hankel_at_points(sub, zg, parity, pts)
        zmax = float(zg.axes[0][-1])
        h = min(0.05, 0.3 / zmax)
        top = 1.1 * float(self.f.grid.axes[0][-1])
        table_nodes = h * np.arange(int(top / h) + 12)
        table = hankel_apply(sub, zg, parity, (table_nodes,))
        out = np.empty(pts.shape[0], dtype=table.dtype)
        inside = pts[:, 0] <= table_nodes[-6]
        out[inside] = local_interpolate(table_nodes, table, pts[inside, 0], order=12)
        if np.any(~inside):
            out[~inside] = hankel_at_points(sub, zg, parity, pts[~inside])
        return out


def _time_symbol(semigroup, K, znorm, t):
    """``d_t^K`` of the semigroup symbol at times ``t`` (leading axis)."""
    t = np.asarray(t, dtype=float).reshape((-1,) + (1,) * znorm.ndim)
    if semigroup == "heat":
        return (-(znorm**2)) ** K * np.exp(-t * znorm**2)
    return (-znorm) ** K * np.exp(-t * znorm)


def semigroup_apply(f: GridFunction, eta, t, K=0, M=None, semigroup="heat", points=None, z_grid=None):
    """``d_t^K`` of the parity-adapted derivative of the semigroup applied to ``f``.

    Returns an array with a leading time axis (length of ``t``) followed by the
    grid shape of ``f`` or the shape of ``points[..., 0]``.
    """
    data = SpectralData.of(f, eta, z_grid)
    M = as_order(M if M is not None else (0,) * f.grid.n, f.grid.n)
    mono, parity = data.derivative_symbol(M)
    sym = _time_symbol(semigroup, K, data.znorm, t) * mono
    return data.synthesize(sym, parity, points)


def heat_semigroup(f: GridFunction, eta, t: float, route="spectral", points=None) -> np.ndarray:
    """Heat semigroup ``W_t f`` on the grid of ``f`` (or at ``points``)."""
    if route == "spectral":
        return semigroup_apply(f, eta, [t], points=points)[0]
    pts = f.grid.points if points is None else points
    p = HeatKernelParams(f.lam, as_sign_vector(eta, f.grid.n), t)
    return kernel_apply(f, lambda tt, x, y: heat_kernel_product(p.at(tt), x, y), pts, t)


def poisson_semigroup(f: GridFunction, eta, t: float, route="spectral", points=None) -> np.ndarray:
    """Poisson semigroup ``P_t f``; the kernel route subordinates the heat kernel."""
    if route == "spectral":
        return semigroup_apply(f, eta, [t], semigroup="poisson", points=points)[0]
    pts = f.grid.points if points is None else points
    p = HeatKernelParams(f.lam, as_sign_vector(eta, f.grid.n), t)
    return kernel_apply(f, lambda tt, x, y: poisson_kernel(p.at(tt), x, y), pts, t, local=False)


# ----------------------------------------------------------------------------
# kernel route


def _local_spacing(axis: np.ndarray, xq: np.ndarray) -> np.ndarray:
    if axis.size == 1:
        return np.full(np.shape(xq), axis[0])
    gaps = np.diff(axis)
    # gap k sits between nodes k and k + 1; outside the nodes use the end gaps
    idx = np.clip(np.searchsorted(axis, xq), 1, axis.size - 1)
    return np.maximum(gaps[idx - 1], gaps[np.minimum(idx, gaps.size - 1)])


def local_interpolate(axis: np.ndarray, values: np.ndarray, xq: np.ndarray, order: int = 10, axis_index=0):
    """Piecewise Lagrange interpolation on the ``order`` nodes nearest to each query."""
    v = np.moveaxis(np.asarray(values), axis_index, 0)
    m = axis.size
    k = min(order, m)
    idx = np.searchsorted(axis, xq)
    start = np.clip(idx - k // 2, 0, m - k)
    nodes = start[:, None] + np.arange(k)
    xs = axis[nodes]  # (q, k)
    diff = xq[:, None] - xs
    out = np.zeros((xq.size,) + v.shape[1:], dtype=v.dtype)
    for i in range(k):
        num = np.prod(np.delete(diff, i, axis=1), axis=1)
        den = np.prod(xs[:, [i]] - np.delete(xs, i, axis=1), axis=1)
        li = num / den
        out += li.reshape((-1,) + (1,) * (v.ndim - 1)) * v[nodes[:, i]]
    return out


def resolvable_time(grid: Grid, x) -> np.ndarray:
    """Smallest time at which the grid near ``x`` resolves a Gaussian of width ``sqrt(t)``."""
    x = np.asarray(x, dtype=float)
    h = np.max(np.stack([_local_spacing(a, x[..., j]) for j, a in enumerate(grid.axes)]), axis=0)
    return (1.5 * h) ** 2


def kernel_apply(f: GridFunction, kern, points, t, local=True, window=9.0, local_nodes=24):
    """``int kern(t, x, y) f(y) dw(y)`` at each point ``x``.

    ``kern(t, x, y)`` broadcasts over ``x`` and ``y`` arrays with the coordinate
    last.  Points where the kernel width ``sqrt(t)`` is below the grid
    resolution use a local Gauss-Legendre window with ``f`` interpolated.
    """
    g = f.grid
    pts = np.asarray(points, dtype=float).reshape(-1, g.n)
    ypts = g.points.reshape(-1, g.n)
    fw = (f.values * g.weights).reshape(-1)
    out = np.zeros(pts.shape[0], dtype=np.result_type(f.values, float))
    fine = resolvable_time(g, pts) <= t if local else np.ones(pts.shape[0], bool)
    if np.any(fine):
        block = max(1, 4_000_000 // max(1, ypts.shape[0]))
        idx = np.flatnonzero(fine)
        for s in range(0, idx.size, block):
            sel = idx[s : s + block]
            k = kern(t, pts[sel, None, :], ypts[None, :, :])
            out[sel] = k @ fw
    for i in np.flatnonzero(~fine):
        out[i] = _local_integral(f, kern, pts[i], t, window, local_nodes)
    return out.reshape(np.asarray(points).shape[:-1])


def _local_integral(f: GridFunction, kern, x, t, window, nodes):
    g = f.grid
    gl, gw = np.polynomial.legendre.leggauss(nodes)
    axes, wts = [], []
    for j, a in enumerate(g.axes):
        lo = max(0.0, x[j] - window * math.sqrt(t))
        hi = min(a[-1], x[j] + window * math.sqrt(t))
        if lo == 0.0:
            # cluster towards the origin where y**(2 lam) is singular
            u, w = _power_rule(gl, gw, lo, hi, 3.0)
        else:
            u = 0.5 * (hi - lo) * (gl + 1) + lo
            w = 0.5 * (hi - lo) * gw
        axes.append(u)
        wts.append(w * u ** (2 * g.lam[j]))
    vals = np.asarray(f.values)
    for j, u in enumerate(axes):
        vals = np.moveaxis(local_interpolate(g.axes[j], vals, u, axis_index=j), 0, j)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    w = np.ones(())
    for wj in wts:
        w = np.multiply.outer(w, wj)
    k = kern(t, x, mesh)
    return np.sum(k * vals * w)


def _power_rule(gl, gw, lo, hi, p):
    v = 0.5 * (gl + 1)
    return lo + (hi - lo) * v**p, 0.5 * gw * (hi - lo) * p * v ** (p - 1)


# ----------------------------------------------------------------------------
# time grids


def spectral_time_grid(data: SpectralData, step=0.25, lo_factor=1e-8, hi_factor=60.0, semigroup="heat"):
    """Log-trapezoid grid covering the time scales of the spectral content of ``f``."""
    z = data.znorm
    mass = np.abs(data.coeffs) > 1e-12 * np.max(np.abs(data.coeffs))
    zmax = float(np.max(z[mass]))
    zmin = float(np.min(z[mass]))
    if semigroup == "heat":
        lo, hi = lo_factor / zmax**2, hi_factor / zmin**2
    else:
        lo, hi = lo_factor / zmax, hi_factor / zmin
    return log_trapezoid(lo, hi, step)


# ----------------------------------------------------------------------------
# families


def maximal_heat(f: GridFunction, eta, x=None, t_grid=None, route="kernel", semigroup="heat"):
    """Discrete supremum over ``t`` of ``|W_t f(x)|`` (a lower bound of the true supremum).

    The kernel route drops times below the grid resolution at each point; the
    clipping time is reported in ``meta['resolved_from']``.
    """
    g = f.grid
    eta = as_sign_vector(eta, g.n)
    pts = g.points if x is None else np.asarray(x, dtype=float)
    if t_grid is None:
        t_grid = np.logspace(-6, 6, 400)
    t_grid = np.asarray(t_grid, dtype=float)
    if route == "spectral":
        vals = semigroup_apply(f, eta, t_grid, semigroup=semigroup, points=None if x is None else pts)
        return np.max(np.abs(vals), axis=0), {"route": "spectral"}
    p = HeatKernelParams(f.lam, eta, 1.0)
    kern = heat_kernel_product if semigroup == "heat" else poisson_kernel
    flat = pts.reshape(-1, g.n)
    tres = resolvable_time(g, flat) if semigroup == "heat" else np.zeros(flat.shape[0])
    best = np.zeros(flat.shape[0])
    for t in t_grid:
        use = tres <= t
        if not np.any(use):
            continue
        v = kernel_apply(f, lambda tt, a, b: kern(p.at(tt), a, b), flat[use], t, local=False)
        best[use] = np.maximum(best[use], np.abs(v))
    meta = {"route": "kernel", "resolved_from": tres.reshape(pts.shape[:-1])}
    return best.reshape(pts.shape[:-1]), meta


def g_function(f: GridFunction, spec: OperatorSpec, x=None, t_step=0.25, z_grid=None) -> GridFunction | np.ndarray:
    """Square function ``||d_t^K delta_M S_t f(x)||`` in ``L^2(t**w dt)``.

    Spectral route: returns a :class:`GridFunction` on the grid of ``f`` (or
    values at ``x``).  Kernel route: values at ``x`` (default grid nodes).
    """
    g = f.grid
    spec = spec.sized(g.n)
    if spec.family != "g_function":
        spec = OperatorSpec("g_function", spec.semigroup, spec.K, spec.M, spec.eta, route=spec.route)
    data = SpectralData.of(f, spec.eta, z_grid)
    t, tw = spectral_time_grid(data, t_step, semigroup=spec.semigroup)
    wt = tw * t**spec.t_power
    if spec.route == "spectral":
        mono, parity = data.derivative_symbol(spec.M)
        vals = data.synthesize(_time_symbol(spec.semigroup, spec.K, data.znorm, t) * mono, parity, x)
        out = np.sqrt(np.tensordot(wt, np.abs(vals) ** 2, axes=(0, 0)))
        return out if x is not None else f.with_values(out, operator=spec.metadata())
    pts = g.points if x is None else np.asarray(x, dtype=float)
    vals = np.stack([_kernel_derivative_apply(f, spec, pts, tt) for tt in t])
    return np.sqrt(np.tensordot(wt, np.abs(vals) ** 2, axes=(0, 0)))


def _kernel_derivative_apply(f, spec: OperatorSpec, pts, t):
    p = HeatKernelParams(f.lam, spec.eta, 1.0)
    dspec = DerivativeSpec(spec.K, spec.M)
    if spec.semigroup == "heat":
        return kernel_apply(f, lambda tt, a, b: kernel_derivative(p.at(tt), dspec, a, b), pts, t)
    return kernel_apply(f, lambda tt, a, b: poisson_kernel_derivative(p.at(tt), dspec, a, b), pts, t, local=False)


def square_norm(gf: GridFunction) -> float:
    """``L^2(dw)`` norm of a grid function (compensated)."""
    return gf.norm()


def riesz_transform(f: GridFunction, spec: OperatorSpec, x_grid=None, z_grid=None, z_min=1e-3):
    """Riesz transform of order ``M``.

    Spectral route: inverse transform of ``sign z**M |z|**-|M|`` times the
    transform, with ``|z| < z_min`` excised.  Kernel route: values at points
    ``x_grid`` (off the support of ``f``) of the time-integrated kernel.
    """
    g = f.grid
    spec = spec.sized(g.n)
    if sum(spec.M) == 0:
        raise InvalidSpecError("Riesz transforms need |M| > 0")
    if spec.route == "spectral":
        data = SpectralData.of(f, spec.eta, z_grid)
        mono, parity = data.derivative_symbol(spec.M)
        r = data.znorm
        sym = np.where(r >= z_min, mono / np.where(r > 0, r, 1.0) ** sum(spec.M), 0.0)
        if x_grid is None:
            return f.with_values(data.synthesize(sym, parity), operator=spec.metadata(), z_min=z_min)
        return data.synthesize(sym, parity, x_grid)
    pts = np.asarray(x_grid if x_grid is not None else g.points, dtype=float)
    return _kernel_operator(f, lambda a, b: riesz_kernel(f.lam, spec.eta, spec.M, a, b), pts)


def _kernel_operator(f: GridFunction, kern, pts, excise=None):
    """Apply a singular kernel off the diagonal; nodes within ``excise`` of ``x`` are skipped."""
    g = f.grid
    flat = pts.reshape(-1, g.n)
    ypts = g.points.reshape(-1, g.n)
    fw = (f.values * g.weights).reshape(-1)
    out = np.zeros(flat.shape[0], dtype=np.result_type(f.values, float))
    for i, x in enumerate(flat):
        d = np.sqrt(np.sum((ypts - x) ** 2, axis=-1))
        r = excise if excise is not None else 0.5 * float(np.max(_local_spacing_all(g, x)))
        keep = (d > r) & (fw != 0)
        if not np.any(keep):
            continue
        out[i] = np.sum(kern(np.broadcast_to(x, ypts[keep].shape), ypts[keep]) * fw[keep])
    return out.reshape(pts.shape[:-1])


def _local_spacing_all(g: Grid, x):
    return np.array([_local_spacing(a, np.array([x[j]]))[0] for j, a in enumerate(g.axes)])


def _time_integral(integrand, d, scale, step=0.15, lo=1e-6, hi=1e8, tail=True):
    """``int_0^inf integrand(t) dt`` on a log grid from ``lo d**2`` to ``hi scale**2``.

    A power-law tail beyond the last node is added when the last samples decay
    faster than ``1/t``.
    """
    d = np.asarray(d, dtype=float)
    scale = np.asarray(scale, dtype=float)
    a = np.log(lo * d**2)
    b = np.log(hi * scale**2)
    m = int(np.ceil(np.max(b - a) / step)) + 1
    frac = np.linspace(0, 1, m).reshape((m,) + (1,) * d.ndim)
    ell = a + frac * (b - a)
    h = (b - a) / (m - 1)
    t = np.exp(ell)
    vals = integrand(t)
    w = h * t
    w = np.broadcast_to(w, vals.shape).copy()
    w[0] *= 0.5
    w[-1] *= 0.5
    total = np.sum(vals * w, axis=0)
    if tail:
        g1, g0 = vals[-1], vals[-2]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.abs(g1) / np.abs(g0)
            p = -np.log(ratio) / h  # g ~ t**-p
            ok = np.isfinite(p) & (p > 1.0) & (np.abs(g1) > 0)
            extra = np.where(ok, g1 * t[-1] / np.where(ok, p - 1.0, 1.0), 0.0)
        total = total + extra
    return total


def riesz_kernel(lam, eta, M, x, y, step=0.15):
    """``Gamma(|M|/2)**-1 int_0^inf delta_M G_t(x, y) t**(|M|/2 - 1) dt`` off the diagonal."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    n = lam.size
    M = as_order(M, n)
    eta = as_sign_vector(eta, n)
    x = np.asarray(x, dtype=float).reshape(-1, n) if n > 1 or np.ndim(x) else np.asarray(x, float).reshape(-1, 1)
    y = np.asarray(y, dtype=float).reshape(-1, n) if n > 1 or np.ndim(y) else np.asarray(y, float).reshape(-1, 1)
    x, y = np.broadcast_arrays(x, y)
    d = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    if np.any(d == 0):
        raise DiagonalError("Riesz kernels are singular on the diagonal")
    scale = np.maximum(d, np.max(np.maximum(x, y), axis=-1))
    p = HeatKernelParams(lam, eta, 1.0)
    spec = DerivativeSpec(0, M)
    half = sum(M) / 2

    def integrand(t):
        return kernel_derivative(p.at(t), spec, x, y) * t ** (half - 1)

    return _time_integral(integrand, d, scale, step) / special.gamma(half)


def laplace_kernel(lam, eta, profile, x, y, semigroup="heat", step=0.15):
    """Kernel ``-int_0^inf profile(t) d_t S_t(x, y) dt`` of a Laplace-transform multiplier."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    n = lam.size
    x = np.asarray(x, dtype=float).reshape(-1, n)
    y = np.asarray(y, dtype=float).reshape(-1, n)
    x, y = np.broadcast_arrays(x, y)
    d = np.sqrt(np.sum((x - y) ** 2, axis=-1))
    if np.any(d == 0):
        raise DiagonalError("multiplier kernels are singular on the diagonal")
    scale = np.maximum(d, np.max(np.maximum(x, y), axis=-1))
    p = HeatKernelParams(lam, as_sign_vector(eta, n), 1.0)
    if semigroup == "heat":

        def integrand(t):
            return -profile(t) * kernel_derivative(p.at(t), DerivativeSpec(1), x, y)

        return _time_integral(integrand, d, scale, step)

    def integrand(t):
        return -profile(t) * poisson_kernel_derivative(p.at(t), DerivativeSpec(1), x, y)

    return _time_integral(integrand, d, np.sqrt(scale), step, lo=1e-3, hi=1e5)


def stieltjes_kernel(lam, eta, atoms, x, y, semigroup="heat"):
    """Kernel ``sum_k c_k S_{t_k}(x, y)`` of a Laplace-Stieltjes multiplier."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    n = lam.size
    x = np.asarray(x, dtype=float).reshape(-1, n)
    y = np.asarray(y, dtype=float).reshape(-1, n)
    p = HeatKernelParams(lam, as_sign_vector(eta, n), 1.0)
    kern = heat_kernel_product if semigroup == "heat" else poisson_kernel
    total = 0.0
    for tk, ck in atoms:
        total = total + ck * kern(p.at(tk), x, y)
    return total


def multiplier_apply(f: GridFunction, spec: OperatorSpec, z_grid=None) -> GridFunction:
    """Laplace or Laplace-Stieltjes multiplier of the heat or Poisson semigroup.

    For the Poisson semigroup the symbol is evaluated at ``sqrt(|z|)`` so that
    ``exp(-t |z|**2)`` becomes ``exp(-t |z|)``.
    """
    m: Multiplier = spec.payload
    data = SpectralData.of(f, spec.eta, z_grid)
    r = data.znorm if spec.semigroup == "heat" else np.sqrt(data.znorm)
    out = data.synthesize(m(r), tuple(spec.eta))
    return f.with_values(out, operator=spec.metadata())


# ----------------------------------------------------------------------------
# Lusin area integrals


def lusin_area(f: GridFunction, spec: OperatorSpec, cone: ConeSpec = ConeSpec(), x=None, t_step=0.3, nodes=9,
               z_grid=None):
    """Cone square function, spectral route.

    At each ``x`` and height ``t`` the section of the cone (a cube of half-side
    ``beta sqrt(t)``, or ``beta t`` for the straight cone) is integrated with a
    ``nodes**n`` tensor rule carrying the density ``Xi``.
    """
    g = f.grid
    spec = spec.sized(g.n)
    if spec.K + sum(spec.M) == 0:
        raise InvalidSpecError("square functions need |M| + K > 0")
    data = SpectralData.of(f, spec.eta, z_grid)
    t, tw = spectral_time_grid(data, t_step, semigroup=spec.semigroup)
    wt = tw * t**spec.t_power
    pts = (g.points if x is None else np.asarray(x, dtype=float)).reshape(-1, g.n)
    mono, parity = data.derivative_symbol(spec.M)
    total = np.zeros(pts.shape[0])
    for ti, wi in zip(t, wt):
        rad = float(cone.radius(ti))
        us, ws = [], []
        for j in range(g.n):
            zj, wj = cone_rule_1d(g.lam[j], pts[:, j], rad, cone.beta, nodes)
            us.append(pts[:, j, None] + zj)
            ws.append(wj)
        # tensor product of per-axis section rules, per point
        mesh = np.stack(np.meshgrid(*[np.arange(nodes)] * g.n, indexing="ij"), -1).reshape(-1, g.n)
        u = np.stack([us[j][:, mesh[:, j]] for j in range(g.n)], axis=-1)  # (P, m, n)
        w = np.prod(np.stack([ws[j][:, mesh[:, j]] for j in range(g.n)], axis=-1), axis=-1)
        sym = _time_symbol(spec.semigroup, spec.K, data.znorm, [ti])[0] * mono
        vals = data.synthesize(sym, parity, u, dense=True)
        total += wi * np.sum(np.abs(vals) ** 2 * w, axis=-1)
    out = np.sqrt(total).reshape((g.shape if x is None else np.asarray(x).shape[:-1]))
    if x is None:
        return f.with_values(out, operator=spec.metadata(), cone=asdict(cone))
    return out


# ----------------------------------------------------------------------------
# full Dunkl operators


LINEAR = ("heat", "poisson", "laplace_mult", "stieltjes_mult", "riesz")


def full_dunkl_apply(F: GridFunction, family: str, t: float | None = None, spec: OperatorSpec | None = None):
    """Apply a linear operator to a function on a sign-closed grid by parity decomposition.

    ``family`` is ``'heat'`` or ``'poisson'`` (with ``t``), or one of the
    multiplier/Riesz families (with ``spec``; its ``eta`` is ignored).  Each
    parity component is restricted, transformed by the restricted operator
    and extended back with the parity of the output.
    """
    if family not in LINEAR:
        raise InvalidSpecError(f"full-space application supports the linear families {LINEAR}")
    g = F.grid
    if not g.sign_closed:
        raise DomainError("full-space operators act on sign-closed grids")
    total = np.zeros(g.shape, dtype=complex)
    for eta in sign_vectors(g.n):
        part = restrict_plus(eta_component(F, eta))
        if not np.any(part.values):
            continue
        if family in ("heat", "poisson"):
            sg = heat_semigroup if family == "heat" else poisson_semigroup
            out, parity = sg(part, eta, t), eta
        else:
            s = spec.sized(g.n)
            s = OperatorSpec(s.family, s.semigroup, s.K, s.M, eta, s.payload, "spectral")
            if family == "riesz":
                out, parity = riesz_transform(part, s).values, output_parity(eta, s.M)
            else:
                out, parity = multiplier_apply(part, s).values, eta
        total += eta_extension(part.with_values(out), parity).values
    if not np.iscomplexobj(F.values) and np.all(np.abs(total.imag) <= 1e-14 * (1 + np.abs(total.real))):
        total = total.real
    return F.with_values(total)


def result_document(gf: GridFunction, spec: OperatorSpec | None = None, **extra) -> str:
    """Columnar serialization with a JSON metadata header describing the operator."""
    meta = dict(gf.meta)
    if spec is not None:
        meta["operator"] = spec.metadata()
    meta.update(extra)
    return json.dumps({"metadata": _plain(meta)}) + "\n" + GridFunction(gf.grid, gf.values, meta).to_columns()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
