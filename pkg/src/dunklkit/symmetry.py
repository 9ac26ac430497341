"""Parity decomposition on Z_2^n and the derivative operators built on it.

Functions on R^n live on *sign-closed* tensor grids (every axis is mirrored
about 0, the origin itself excluded).  Functions on the open orthant live on
*positive* grids.  Both are carried by :class:`GridFunction`.
"""
from __future__ import annotations

import io
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .analytic import (
    DomainError,
    as_lambda,
    bessel_j_ratio,
    compensated_sum,
    jacobi_axis,
)

X_MIN = 1e-3


class SingularCoefficientError(DomainError):
    """The ``2 lam / x`` coefficient of an adjoint derivative is evaluated too close to 0."""


# ----------------------------------------------------------------------------
# sign vectors and multi-orders


def as_sign_vector(eta, n=None) -> tuple[int, ...]:
    """Validate a parity pattern in {0, 1}^n."""
    eta = tuple(int(e) for e in np.atleast_1d(eta))
    if any(e not in (0, 1) for e in eta):
        raise DomainError(f"parity entries must be 0 or 1: {eta}")
    if n is not None and len(eta) != n:
        if len(eta) == 1:
            return eta * n
        raise DomainError(f"parity vector has length {len(eta)}, expected {n}")
    return eta


def as_order(M, n=None) -> tuple[int, ...]:
    M = tuple(int(m) for m in np.atleast_1d(M))
    if any(m < 0 for m in M):
        raise DomainError(f"orders must be nonnegative: {M}")
    if n is not None and len(M) != n:
        if len(M) == 1 and n > 1 and M[0] == 0:
            return (0,) * n
        raise DomainError(f"order vector has length {len(M)}, expected {n}")
    return M


@dataclass(frozen=True)
class MultiOrder:
    """Derivative orders: ``M`` for the parity-adapted operator, ``K`` in time."""

    M: tuple[int, ...]
    K: int = 0

    def __post_init__(self):
        object.__setattr__(self, "M", as_order(self.M))
        if int(self.K) < 0:
            raise DomainError("time order must be nonnegative")
        object.__setattr__(self, "K", int(self.K))

    @property
    def total(self) -> int:
        return sum(self.M)


def sign_vectors(n: int):
    """All parity patterns of length ``n`` in lexicographic order."""
    return list(itertools.product((0, 1), repeat=n))


def output_parity(eta, M) -> tuple[int, ...]:
    """Parity after applying the order-``M`` operator: ``eta`` xor ``M mod 2``."""
    return tuple((e + m) % 2 for e, m in zip(eta, M))


def intertwining_sign(eta, M) -> int:
    """Sign in front of ``z**M`` when the order-``M`` operator hits the eigenfunction."""
    p = sum((1 - e) * (m % 2) + m // 2 for e, m in zip(eta, M))
    return -1 if p % 2 else 1


# ----------------------------------------------------------------------------
# grids and grid functions


@dataclass(frozen=True, eq=False)
class Grid:
    """Tensor grid with per-axis quadrature weights for ``|x|**(2 lam) dx``.

    ``duty`` records whether the nodes serve quadrature (Gauss-Jacobi) or
    finite-difference stencils (uniform).
    """

    axes: tuple[np.ndarray, ...]
    axis_weights: tuple[np.ndarray, ...]
    lam: np.ndarray
    duty: str = "quadrature"

    def __post_init__(self):
        lam = as_lambda(self.lam)
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        wts = tuple(np.asarray(w, dtype=float) for w in self.axis_weights)
        if len(axes) != lam.size or len(wts) != lam.size:
            raise DomainError("grid dimension does not match the multiplicity vector")
        for a, w in zip(axes, wts):
            if a.ndim != 1 or a.shape != w.shape:
                raise DomainError("axis nodes and weights must be matching 1-D arrays")
            if a.size > 1 and np.any(np.diff(a) <= 0):
                raise DomainError("grid nodes must be strictly increasing")
            if np.any(a == 0):
                raise DomainError("grid nodes may not sit on a coordinate hyperplane")
            if np.any(w < 0):
                raise DomainError("quadrature weights must be nonnegative")
            a.setflags(write=False)
            w.setflags(write=False)
        if self.duty not in ("quadrature", "stencil"):
            raise DomainError(f"unknown grid duty {self.duty!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "axis_weights", wts)

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.size for a in self.axes)

    @property
    def sign_closed(self) -> bool:
        return all(np.array_equal(a, -a[::-1]) for a in self.axes)

    @property
    def positive(self) -> bool:
        return all(a[0] > 0 for a in self.axes)

    @property
    def weights(self) -> np.ndarray:
        out = np.ones(())
        for w in self.axis_weights:
            out = np.multiply.outer(out, w)
        return out

    @property
    def points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def mirrored(self) -> "Grid":
        """Sign-closed grid obtained by reflecting a positive grid."""
        if not self.positive:
            raise DomainError("only positive grids can be mirrored")
        axes = tuple(np.concatenate([-a[::-1], a]) for a in self.axes)
        wts = tuple(np.concatenate([w[::-1], w]) for w in self.axis_weights)
        return Grid(axes, wts, self.lam, self.duty)

    def positive_half(self) -> "Grid":
        if not self.sign_closed:
            raise DomainError("grid is not sign-closed")
        half = [a.size // 2 for a in self.axes]
        return Grid(
            tuple(a[h:] for a, h in zip(self.axes, half)),
            tuple(w[h:] for w, h in zip(self.axis_weights, half)),
            self.lam,
            self.duty,
        )

    def same_nodes(self, other: "Grid") -> bool:
        return self.n == other.n and all(np.array_equal(a, b) for a, b in zip(self.axes, other.axes))


def quadrature_grid(lam, radius, nodes, mass_scale: float = 1.0) -> Grid:
    """Positive Gauss-Jacobi grid on ``(0, radius)^n``.

    ``radius`` and ``nodes`` may be scalars or per-axis sequences.
    ``mass_scale`` multiplies every axis weight; it exists so that a wrong
    measure normalization can be injected deliberately.
    """
    lam = as_lambda(lam)
    radius = np.broadcast_to(np.asarray(radius, dtype=float), lam.shape)
    nodes = np.broadcast_to(np.asarray(nodes, dtype=int), lam.shape)
    rules = [jacobi_axis(lj, r, m, mass_scale) for lj, r, m in zip(lam, radius, nodes)]
    return Grid(tuple(r[0] for r in rules), tuple(r[1] for r in rules), lam)


def uniform_grid(lam, radius, nodes) -> Grid:
    """Positive midpoint grid ``(k + 1/2) h`` for stencil work.

    Weights are midpoint-rule weights for ``x**(2 lam) dx``; they are only
    adequate for smooth integrands away from the origin.
    """
    lam = as_lambda(lam)
    radius = np.broadcast_to(np.asarray(radius, dtype=float), lam.shape)
    nodes = np.broadcast_to(np.asarray(nodes, dtype=int), lam.shape)
    axes, wts = [], []
    for lj, r, m in zip(lam, radius, nodes):
        h = r / m
        x = (np.arange(m) + 0.5) * h
        axes.append(x)
        wts.append(h * x ** (2 * lj))
    return Grid(tuple(axes), tuple(wts), lam, "stencil")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a function on a :class:`Grid`.

    ``meta`` collects diagnostics such as truncated-stencil warnings.
    """

    grid: Grid
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.shape:
            raise DomainError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def sample(cls, f, grid: Grid, **meta) -> "GridFunction":
        """Evaluate ``f(points)`` with ``points`` of shape ``(*grid.shape, n)``."""
        return cls(grid, np.asarray(f(grid.points)), dict(meta))

    @property
    def lam(self) -> np.ndarray:
        return self.grid.lam

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    def with_values(self, values, **meta) -> "GridFunction":
        return type(self)(self.grid, values, {**self.meta, **meta})

    def inner(self, other: "GridFunction") -> complex:
        if not self.grid.same_nodes(other.grid):
            raise DomainError("grid functions live on different grids")
        return compensated_sum(self.weights * self.values * np.conj(other.values))

    def norm(self) -> float:
        return math.sqrt(compensated_sum(self.weights * np.abs(self.values) ** 2))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def to_columns(self) -> str:
        """Columnar text: one row per point (coordinates, weight, re, im).

        A leading JSON comment line keeps what is needed to rebuild the grid.
        """
        g = self.grid
        head = {
            "lambda": g.lam.tolist(),
            "shape": list(g.shape),
            "duty": g.duty,
            "axis_weights": [w.tolist() for w in g.axis_weights],
            "meta": _jsonable(self.meta),
        }
        pts = g.points.reshape(-1, g.n)
        vals = np.asarray(self.values, dtype=complex).ravel()
        cols = np.column_stack([pts, g.weights.ravel(), vals.real, vals.imag])
        names = [f"x{j + 1}" for j in range(g.n)] + ["weight", "re", "im"]
        buf = io.StringIO()
        buf.write("# " + json.dumps(head) + "\n")
        buf.write(",".join(names) + "\n")
        np.savetxt(buf, cols, delimiter=",", fmt="%.17g")
        return buf.getvalue()

    @classmethod
    def from_columns(cls, text: str) -> "GridFunction":
        lines = text.splitlines()
        head = json.loads(lines[0][2:])
        shape = tuple(head["shape"])
        n = len(shape)
        data = np.loadtxt(io.StringIO("\n".join(lines[2:])), delimiter=",", ndmin=2)
        pts = data[:, :n].reshape(*shape, n)
        axes = []
        for j in range(n):
            idx = [0] * n
            idx[j] = slice(None)
            axes.append(pts[tuple(idx) + (j,)])
        grid = Grid(tuple(axes), tuple(np.asarray(w) for w in head["axis_weights"]), head["lambda"], head["duty"])
        values = (data[:, n + 1] + 1j * data[:, n + 2]).reshape(shape)
        if not np.any(data[:, n + 2]):
            values = values.real
        return cls(grid, values, head.get("meta", {}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ----------------------------------------------------------------------------
# parity decomposition


def eta_component(f: GridFunction, eta) -> GridFunction:
    """Parity-``eta`` part ``2**-n sum_eps eps**eta f(eps x)`` on a sign-closed grid.

    Averaging one axis at a time keeps the output exactly symmetric: flipping
    ``(a + s b) / 2`` gives ``(b + s a) / 2``, which is ``s`` times the
    original bit for bit.
    """
    g = f.grid
    if not g.sign_closed:
        raise DomainError("parity components need a sign-closed grid")
    eta = as_sign_vector(eta, g.n)
    v = np.asarray(f.values)
    for j, e in enumerate(eta):
        flipped = np.flip(v, axis=j)
        v = 0.5 * (v + flipped) if e == 0 else 0.5 * (v - flipped)
    return f.with_values(v)


def restrict_plus(f: GridFunction) -> GridFunction:
    g = f.grid
    if not g.sign_closed:
        raise DomainError("restriction needs a sign-closed grid")
    sl = tuple(slice(a.size // 2, None) for a in g.axes)
    return GridFunction(g.positive_half(), np.asarray(f.values)[sl], dict(f.meta))


def eta_extension(f: GridFunction, eta) -> GridFunction:
    """Extend a function on the orthant to the ``eta``-symmetric function on R^n."""
    g = f.grid
    if not g.positive:
        raise DomainError("extension needs a positive grid")
    eta = as_sign_vector(eta, g.n)
    v = np.asarray(f.values)
    for j, e in enumerate(eta):
        flipped = np.flip(v, axis=j)
        v = np.concatenate([-flipped if e else flipped, v], axis=j)
    return GridFunction(g.mirrored(), v, dict(f.meta))


def is_eta_symmetric(f: GridFunction, eta) -> bool:
    """Exact (bitwise) parity test on a sign-closed grid."""
    eta = as_sign_vector(eta, f.grid.n)
    v = np.asarray(f.values)
    for j, e in enumerate(eta):
        if not np.array_equal(np.flip(v, axis=j), -v if e else v):
            return False
    return True


# ----------------------------------------------------------------------------
# finite differences


@lru_cache(maxsize=128)
def fd_weights(offsets: tuple, k: int) -> np.ndarray:
    """Weights for the ``k``-th derivative at 0 from samples at ``offsets`` (Fornberg)."""
    z = np.asarray(offsets, dtype=float)
    m = z.size
    c = np.zeros((m, k + 1))
    c1, c4 = 1.0, z[0]
    c[0, 0] = 1.0
    for i in range(1, m):
        mn = min(i, k)
        c2, c5, c4 = 1.0, c4, z[i]
        for j in range(i):
            c3 = z[i] - z[j]
            c2 *= c3
            if j == i - 1:
                for s in range(mn, 0, -1):
                    c[i, s] = c1 * (s * c[i - 1, s - 1] - c5 * c[i - 1, s]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for s in range(mn, -1, -1):
                c[j, s] = (c4 * c[j, s] - (s * c[j, s - 1] if s else 0.0)) / c3
        c1 = c2
    out = c[:, k].copy()
    out.setflags(write=False)
    return out


def central_stencil(k: int, accuracy: int = 4):
    """Integer offsets and weights of the centred ``k``-th derivative stencil."""
    if k == 0:
        return (0,), np.ones(1)
    half = (k + 1) // 2 - 1 + accuracy // 2
    offs = tuple(range(-half, half + 1))
    return offs, fd_weights(offs, k)


def fd_partial(f, x, axis: int, k: int, h, accuracy: int = 4):
    """``k``-th partial derivative of a callable along ``axis`` by centred differences.

    ``f`` maps points of shape ``(..., n)`` to values of shape ``(...)``;
    ``h`` broadcasts against ``x[..., 0]``.
    """
    x = np.asarray(x, dtype=float)
    if k == 0:
        return f(x)
    offs, w = central_stencil(k, accuracy)
    h = np.asarray(h, dtype=float)
    acc = 0.0
    for o, c in zip(offs, w):
        if c == 0.0:
            continue
        xs = x.copy()
        xs[..., axis] = x[..., axis] + o * h
        acc = acc + c * f(xs)
    return acc / h**k


def default_step(xj):
    return np.maximum(1e-5, 1e-3 * np.abs(xj))


def reflect(x, j):
    """Apply the reflection in the hyperplane ``x_j = 0``."""
    y = np.array(x, dtype=float, copy=True)
    y[..., j] = -y[..., j]
    return y


def dunkl_derivative(f, lam, j: int, x, h=None, accuracy: int = 4):
    """Differential-difference operator along axis ``j`` applied to a callable.

    ``f(x) -> values``; the derivative part uses centred differences and the
    reflection part is evaluated exactly.
    """
    lam = as_lambda(lam)
    x = np.asarray(x, dtype=float)
    if lam.size == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    h = default_step(x[..., j]) if h is None else h
    d = fd_partial(f, x, j, 1, h, accuracy)
    return d + lam[j] * (f(x) - f(reflect(x, j))) / x[..., j]


def dunkl_laplacian(f, lam, x, h=None, accuracy: int = 4):
    """Nonnegative Dunkl Laplacian ``-sum_j T_j**2`` applied to a callable.

    Uses the expanded form
    ``T_j**2 f = f_jj + 2 lam_j f_j / x_j - lam_j (f - f o sigma_j) / x_j**2``.
    """
    lam = as_lambda(lam)
    x = np.asarray(x, dtype=float)
    if lam.size == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    fx = f(x)
    out = 0.0
    for j, lj in enumerate(lam):
        hj = default_step(x[..., j]) if h is None else h
        d1 = fd_partial(f, x, j, 1, hj, accuracy)
        d2 = fd_partial(f, x, j, 2, hj, accuracy)
        xj = x[..., j]
        out = out - (d2 + 2 * lj * d1 / xj - lj * (fx - f(reflect(x, j))) / xj**2)
    return out


def _grid_derivative(v, x, axis, accuracy):
    """First derivative along ``axis`` on a uniform axis; lower order at the ends."""
    h = x[1] - x[0]
    half = accuracy // 2
    offs, w = central_stencil(1, accuracy)
    n = x.size
    v = np.moveaxis(np.asarray(v), axis, 0)
    out = np.zeros_like(v, dtype=np.result_type(v, float))
    truncated = 0
    for i in range(n):
        lo, hi = max(0, i - half), min(n - 1, i + half)
        if hi - lo < 2 * half:
            truncated += 1
            offsets = tuple(range(lo - i, hi - i + 1))
            ww = fd_weights(offsets, 1)
        else:
            offsets, ww = offs, w
        out[i] = sum(c * v[i + o] for o, c in zip(offsets, ww)) / h
    return np.moveaxis(out, 0, axis), truncated


def _check_uniform(x):
    d = np.diff(x)
    if x.size < 3 or not np.allclose(d, d[0], rtol=1e-9, atol=0):
        raise DomainError("stencil work needs a uniform grid axis with at least 3 nodes")


def dunkl_derivative_grid(f: GridFunction, j: int, accuracy: int = 4) -> GridFunction:
    """Differential-difference operator along axis ``j`` on a sign-closed uniform grid."""
    g = f.grid
    if not g.sign_closed:
        raise DomainError("the reflection term needs a sign-closed grid")
    x = g.axes[j]
    _check_uniform(x)
    d, trunc = _grid_derivative(f.values, x, j, accuracy)
    shape = [1] * g.n
    shape[j] = -1
    xj = x.reshape(shape)
    out = d + g.lam[j] * (f.values - np.flip(f.values, axis=j)) / xj
    meta = {}
    if trunc:
        meta["truncated_stencil_nodes"] = f.meta.get("truncated_stencil_nodes", 0) + trunc
        warnings.warn(f"{trunc} boundary nodes used one-sided stencils", RuntimeWarning, stacklevel=2)
    return f.with_values(out, **meta)


def delta_sequence(eta_j: int, m_j: int):
    """Order in which plain (``'d'``) and adjoint (``'a'``) derivatives are applied."""
    return ["d" if (k + eta_j) % 2 == 0 else "a" for k in range(m_j)]


def delta_eta_M(f: GridFunction, eta, M, accuracy: int = 4, x_min: float = X_MIN) -> GridFunction:
    """Parity-adapted derivative of order ``M`` on a positive uniform grid.

    Along axis ``j`` the plain derivative and its adjoint ``d/dx + 2 lam_j / x``
    alternate, starting with the plain one when ``eta_j = 0``.
    """
    g = f.grid
    eta = as_sign_vector(eta, g.n)
    M = as_order(M, g.n)
    if not g.positive:
        raise DomainError("parity-adapted derivatives act on positive grids")
    if sum(M) > 0 and min(a[0] for a, m in zip(g.axes, M) if m) < x_min:
        raise SingularCoefficientError(f"grid reaches below x_min={x_min}")
    v = np.asarray(f.values)
    trunc = 0
    for j in reversed(range(g.n)):
        x = g.axes[j]
        if M[j]:
            _check_uniform(x)
        shape = [1] * g.n
        shape[j] = -1
        xj = x.reshape(shape)
        for op in delta_sequence(eta[j], M[j]):
            d, t = _grid_derivative(v, x, j, accuracy)
            trunc += t
            v = d + (2 * g.lam[j] / xj) * v if op == "a" else d
    meta = {"truncated_stencil_nodes": trunc} if trunc else {}
    return f.with_values(v, **meta)


def delta_eta_M_callable(f, lam, eta, M, x, rel_step: float = 1e-2, accuracy: int = 6):
    """Parity-adapted derivative of a callable by nested centred differences.

    Steps are relative to ``x_j`` so that the ``2 lam / x`` coefficient and the
    stencil stay on the same scale.
    """
    lam = as_lambda(lam)
    n = lam.size
    eta = as_sign_vector(eta, n)
    M = as_order(M, n)
    x = np.asarray(x, dtype=float)
    if n == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]

    def step(fun, j, op):
        def g(p):
            hj = rel_step * x[..., j]
            d = fd_partial(fun, p, j, 1, hj, accuracy)
            return d + (2 * lam[j] / p[..., j]) * fun(p) if op == "a" else d

        return g

    fun = f
    for j in reversed(range(n)):
        for op in delta_sequence(eta[j], M[j]):
            fun = step(fun, j, op)
    return fun(x)


def eigen_component(lam, eta, z, x):
    """``prod_j (x_j z_j)**eta_j phi^(lam_j + eta_j)(x_j z_j)``, real on the orthant."""
    lam = as_lambda(lam)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    out = 1.0
    for j, (lj, e) in enumerate(zip(lam, as_sign_vector(eta, lam.size))):
        w = x[..., j] * z[..., j]
        out = out * w**e * bessel_j_ratio(lj + e - 0.5, w)
    return out


def intertwine_check(lam, eta, M, z, x, rel_step: float = 1e-2, accuracy: int = 6):
    """Both sides of the intertwining identity for the parity-adapted derivative.

    Returns
    -------
    lhs : ndarray
        Finite-difference derivative of ``eigen_component(lam, eta, z, .)``.
    rhs : ndarray
        ``sign * z**M * eigen_component(lam, eta xor M, z, x)``.
    """
    lam = as_lambda(lam)
    n = lam.size
    eta = as_sign_vector(eta, n)
    M = as_order(M, n)
    z = np.asarray(z, dtype=float)
    x = np.asarray(x, dtype=float)
    if n == 1:
        z = z[..., None] if (z.ndim == 0 or z.shape[-1] != 1) else z
        x = x[..., None] if (x.ndim == 0 or x.shape[-1] != 1) else x
    lhs = delta_eta_M_callable(lambda p: eigen_component(lam, eta, z, p), lam, eta, M, x, rel_step, accuracy)
    eps = output_parity(eta, M)
    rhs = intertwining_sign(eta, M) * np.prod(z ** np.asarray(M), axis=-1) * eigen_component(lam, eps, z, x)
    return lhs, rhs
