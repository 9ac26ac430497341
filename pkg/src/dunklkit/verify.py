"""Numerical certification of kernel estimates, lemmas and exact identities.

Comparability statements are certified by fitted-constant stability: sample
ratios are grouped by decade of a scale variable (the distance ``|x - y|``
and the smallest coordinate of ``x``), and the largest decade maximum must
stay within ``STABILITY_FACTOR`` of the median decade maximum.  Exact
inequalities are checked pointwise.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from .analytic import (
    DomainError,
    as_lambda,
    ball_volume_1d,
    ball_volume_plus,
    log_trapezoid,
    omega_laplace,
    psi,
    q_form,
)
from .kernels import (
    ConeSpec,
    DerivativeSpec,
    HeatKernelParams,
    dunkl_heat_kernel,
    est_envelope,
    heat_kernel_integral_rep,
    heat_kernel_product,
    kernel_derivative,
    poisson_kernel,
)
from .operators import (
    OperatorSpec,
    g_function,
    laplace_kernel,
    lusin_area,
    poisson_semigroup,
    riesz_kernel,
    riesz_transform,
    stieltjes_kernel,
)
from .symmetry import (
    GridFunction,
    dunkl_laplacian,
    intertwine_check,
    quadrature_grid,
    sign_vectors,
)
from .transform import dunkl_forward, dunkl_inverse, hankel_apply, spectral_grid, transform_plus, transform_plus_by_extension

STABILITY_FACTOR = 8.0
FLOAT_SLACK = 1e-12
KERNELS = ("maximal", "g", "laplace", "stieltjes", "riesz", "lusin", "poisson_lusin")
LEMMAS = (
    "theta",
    "qz",
    "intXi",
    "intdifXi",
    "intXi2",
    "xiineq",
    "EST_envelope",
    "EST2_integral",
    "ball_comparability",
    "double",
)


class SampleGeneratorError(RuntimeError):
    """A generated sample violates the constraint it was generated for."""


class QuadratureFailure(RuntimeError):
    """A kernel norm came out non-finite."""


@dataclass
class VerificationReport:
    check_name: str
    sample_count: int
    fitted_constant: float
    worst_ratio: float
    gamma_used: float | None
    passed: bool
    runtime_seconds: float
    seed: int
    threshold: float
    lam: tuple = ()
    n: int = 1
    details: dict = field(default_factory=dict)
    samples: dict | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("samples")
        d["pass"] = d.pop("passed")
        d["lam"] = [float(v) for v in self.lam]
        return _plain(d)

    def comparable(self) -> dict:
        """Report content without the wall-clock time."""
        d = self.to_dict()
        d.pop("runtime_seconds")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        d = dict(d)
        d["passed"] = d.pop("pass")
        d["lam"] = tuple(d.get("lam", ()))
        return cls(**d)


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DUNKLKIT_THREADS", "1")))
    except ValueError:
        return 1


def _chunked(fn, count, chunk):
    """Apply ``fn(slice)`` over consecutive chunks, possibly in threads; order is preserved."""
    slices = [slice(s, min(count, s + chunk)) for s in range(0, count, chunk)]
    workers = _threads()
    if workers == 1 or len(slices) == 1:
        parts = [fn(s) for s in slices]
    else:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(fn, slices))
    return np.concatenate(parts) if parts else np.zeros(0)


# ----------------------------------------------------------------------------
# sampling


def log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size))


def _unit_vectors(rng, count, n):
    u = rng.normal(size=(count, n))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def _step_inside(rng, base, length):
    """``base + length * v`` for random unit ``v``, flipped or redrawn to stay in the orthant."""
    count, n = base.shape
    v = _unit_vectors(rng, count, n)
    out = base + length[:, None] * v
    bad = np.any(out <= 0, axis=1)
    out[bad] = base[bad] - length[bad, None] * v[bad]
    for _ in range(50):
        bad = np.any(out <= 0, axis=1)
        if not np.any(bad):
            break
        v = _unit_vectors(rng, int(bad.sum()), n)
        out[bad] = base[bad] + length[bad, None] * v
    bad = np.any(out <= 0, axis=1)
    out[bad] = base[bad] + length[bad, None] * np.abs(v[: bad.sum()]) if bad.any() else out[bad]
    return out


def sample_pairs(rng, n, count, lo=1e-2, hi=1e2):
    """Pairs with ``|x_j|`` and ``|x - y|`` log-uniform on ``[lo, hi]``."""
    x = log_uniform(rng, lo, hi, (count, n))
    d = log_uniform(rng, lo, hi, count)
    y = _step_inside(rng, x, d)
    return x, y


def sample_smoothness(rng, n, count, direction="x_arg", lo=1e-2, hi=1e2, rel=(1e-3, 0.45)):
    """Triples ``(x, x2, y)`` (or ``(x, y, y2)``) with the separation constraint.

    Returns ``(x, y, moved)`` where ``moved`` replaces ``x`` (``'x_arg'``) or
    ``y`` (``'y_arg'``).
    """
    x, y = sample_pairs(rng, n, count, lo, hi)
    d = np.linalg.norm(x - y, axis=1)
    h = np.maximum(log_uniform(rng, rel[0], rel[1], count) * d, 1e-5)
    base = x if direction == "x_arg" else y
    moved = _step_inside(rng, base, h)
    sep = np.linalg.norm(moved - base, axis=1)
    if np.any(d <= 2 * sep) or np.any(sep < 1e-5 * (1 - 1e-9)):
        raise SampleGeneratorError("smoothness sample violates |x - y| > 2 |x - x'|")
    return x, y, moved


# ----------------------------------------------------------------------------
# stability


def decade_stability(ratios, *scales, min_count=5):
    """Largest per-decade maximum over the median per-decade maximum, worst over ``scales``."""
    worst = 1.0
    r = np.asarray(ratios, dtype=float)
    for s in scales:
        dec = np.floor(np.log10(np.asarray(s, dtype=float)))
        maxima = [r[dec == k].max() for k in np.unique(dec) if np.count_nonzero(dec == k) >= min_count]
        if len(maxima) == 0:
            continue
        med = float(np.median(maxima))
        if med <= 0:
            return math.inf
        worst = max(worst, max(maxima) / med)
    return worst


def two_sided_stability(ratios, *scales, min_count=5):
    """As :func:`decade_stability`, also bounding decade minima away from the median minimum."""
    r = np.asarray(ratios, dtype=float)
    upper = decade_stability(r, *scales, min_count=min_count)
    with np.errstate(divide="ignore"):
        lower = decade_stability(1.0 / r, *scales, min_count=min_count)
    return max(upper, lower)


# ----------------------------------------------------------------------------
# kernels under test


def default_lusin_gamma(lam) -> float:
    return min(0.5, 0.9 * float(np.min(as_lambda(lam) + 0.5)))


@dataclass(frozen=True, eq=False)
class KernelEvaluator:
    """Kernel family sampled as a vector over its norm index set.

    ``components(x, y, scale, partner)`` returns ``(values, weights)`` with
    the index set on the trailing axes; ``norm`` reduces them.  Index sets
    (time grids, cone nodes) depend only on ``scale`` and the breakpoints of
    ``x`` and ``partner`` so that differences are taken on a common set.
    """

    kind: str
    lam: np.ndarray
    eta: tuple
    K: int = 0
    M: tuple = (0,)
    cone: ConeSpec = ConeSpec()
    tau_step: float = 0.12
    cone_nodes: int = 10
    chunk: int = 32
    sub_step: float = 0.5
    map_power: float = 3.0
    payload: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.lam.size)

    @property
    def norm_kind(self) -> str:
        return {"maximal": "sup_t", "g": "l2_t", "lusin": "l2_cone", "poisson_lusin": "l2_cone"}.get(self.kind, "scalar")

    @property
    def t_power(self) -> float:
        m = sum(self.M)
        if self.kind == "poisson_lusin":
            return 2 * self.K + 2 * m - 1
        return 2 * self.K + m - 1

    def components(self, x, y, scale, partner=None):
        p = HeatKernelParams(self.lam, self.eta, 1.0)
        if self.kind == "maximal":
            t, _ = log_trapezoid(1e-4, 1e6, self.tau_step)
            tt = scale[:, None] ** 2 * t
            vals = heat_kernel_product(p.at(tt), x[:, None, :], y[:, None, :])
            return vals, None
        if self.kind == "g":
            tau, w = log_trapezoid(1e-4, 1e9, self.tau_step)
            tt = scale[:, None] ** 2 * tau
            vals = kernel_derivative(p.at(tt), DerivativeSpec(self.K, self.M), x[:, None, :], y[:, None, :])
            return vals, scale[:, None] ** 2 * w * tt**self.t_power
        if self.kind == "riesz":
            return riesz_kernel(self.lam, self.eta, self.M, x, y), None
        if self.kind == "laplace":
            return laplace_kernel(self.lam, self.eta, self.payload["profile"], x, y), None
        if self.kind == "stieltjes":
            return stieltjes_kernel(self.lam, self.eta, self.payload["atoms"], x, y), None
        if self.kind in ("lusin", "poisson_lusin"):
            return self._cone_components(x, y, scale, x if partner is None else partner)
        raise DomainError(f"unknown kernel {self.kind!r}")

    def _cone_components(self, x, y, scale, partner):
        heat = self.kind == "lusin"
        if heat:
            tau, tw = log_trapezoid(1e-3, 1e7, self.tau_step * 2)
            tt = scale[:, None] ** 2 * tau
            tw = scale[:, None] ** 2 * tw
        else:
            tau, tw = log_trapezoid(1e-3, 1e5, self.tau_step * 2.5)
            tt = scale[:, None] * tau
            tw = scale[:, None] * tw
        m, T = tt.shape
        rad = np.asarray(self.cone.radius(tt))
        zs, zw, dens = [], [], []
        for j in range(self.n):
            lo = -self.cone.beta * rad
            hi = self.cone.beta * rad
            pts = (x,) if partner is x else (x, partner)
            breaks = np.stack([np.broadcast_to(-p[:, None, j], (m, T)) for p in pts], -1)
            z, w = segment_rule(lo, hi, breaks, self.cone_nodes, self.map_power)
            u = x[:, None, None, j] + z
            pos = u > 0
            d = np.where(pos, np.where(pos, u, 1.0) ** (2 * self.lam[j]), 0.0)
            d = d / ball_volume_1d(self.lam[j], np.broadcast_to(x[:, None, j], (m, T)), rad)[..., None]
            zs.append(z)
            zw.append(w)
            dens.append(d)
        Q = zs[0].shape[-1]
        shape = (m, T) + (Q,) * self.n

        def spread(a, j):
            s = [m, T] + [1] * self.n
            s[2 + j] = Q
            return a.reshape(s)

        u = np.stack([np.broadcast_to(spread(x[:, None, None, j] + zs[j], j), shape) for j in range(self.n)], -1)
        density = np.ones(shape)
        weights = np.ones(shape)
        for j in range(self.n):
            density = density * spread(dens[j], j)
            weights = weights * spread(zw[j], j)
        inside = density > 0
        u = np.where(inside[..., None], u, 1.0)
        yb = y.reshape((m, 1) + (1,) * self.n + (self.n,))
        tb = tt.reshape((m, T) + (1,) * self.n)
        p = HeatKernelParams(self.lam, self.eta, 1.0)
        if heat:
            vals = kernel_derivative(p.at(tb), DerivativeSpec(self.K, self.M), u, yb)
        else:
            vals = _subordinated_derivative(p, self.K, self.M, tb, u, yb, self.sub_step)
        vals = np.where(inside, vals * np.sqrt(density), 0.0)
        weights = weights * (tw * tt**self.t_power).reshape((m, T) + (1,) * self.n)
        return vals, weights

    def norm(self, values, weights):
        v = np.abs(values)
        if self.norm_kind == "scalar":
            return v
        axes = tuple(range(1, v.ndim))
        if self.norm_kind == "sup_t":
            return np.max(v, axis=axes)
        return np.sqrt(np.sum(v**2 * weights, axis=axes))


def segment_rule(lo, hi, breaks, nodes, power=3.0):
    """Composite rule on ``[lo, hi]`` split at ``breaks`` (clipped), S-shaped in each piece.

    The map ``v**p / (v**p + (1 - v)**p)`` clusters nodes at both ends of
    every segment, which tames integrable endpoint singularities.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    b = np.sort(np.clip(breaks, lo[..., None], hi[..., None]), axis=-1)
    ends = np.concatenate([lo[..., None], b, hi[..., None]], axis=-1)
    g, gw = np.polynomial.legendre.leggauss(nodes)
    v = 0.5 * (g + 1.0)
    den = v**power + (1 - v) ** power
    s = v**power / den
    ds = power * v ** (power - 1) * (1 - v) ** (power - 1) / den**2 * 0.5 * gw
    a, c = ends[..., :-1, None], ends[..., 1:, None]
    z = a + (c - a) * s
    w = (c - a) * ds
    return z.reshape(z.shape[:-2] + (-1,)), w.reshape(w.shape[:-2] + (-1,))


def _subordinated_derivative(p: HeatKernelParams, K, M, t, u, y, step=0.3):
    """``d_t^K delta_M`` of the subordinated Poisson kernel, Hermite form in ``t``.

    ``P_t = -int pi**-1/2 s**-1/2 d_t exp(-t**2 / 4s) G_s ds``, so ``d_t^K``
    falls on the Gaussian and becomes a Hermite polynomial.
    """
    sig, sw = log_trapezoid(1.0 / 200.0, 1e10, step)
    s = t[..., None] ** 2 * sig  # (..., S) with t broadcast
    x_arg = t[..., None] / (2.0 * np.sqrt(s))
    k = K + 1
    dk = (2.0 * np.sqrt(s)) ** (-k) * (-1.0) ** k * special.eval_hermite(k, x_arg) * np.exp(-(x_arg**2))
    weight = -dk / np.sqrt(np.pi * s) * t[..., None] ** 2 * sw
    g = kernel_derivative(p.at(s), DerivativeSpec(0, M), u[..., None, :], y[..., None, :])
    return np.sum(weight * g, axis=-1)


@dataclass(frozen=True, eq=False)
class KernelUnderTest:
    evaluator: KernelEvaluator
    gamma: float = 1.0

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise DomainError("gamma must lie in (0, 1]")
        if self.evaluator.kind in ("lusin", "poisson_lusin"):
            bound = float(np.min(self.evaluator.lam + 0.5))
            if self.gamma > 0.5:
                raise DomainError("Lusin kernels need gamma <= 1/2")
            if self.gamma >= bound:
                raise DomainError(f"Lusin kernels need gamma < min(lam + 1/2) = {bound}")


def make_kernel(kind, lam, eta=None, K=None, M=None, gamma=None, beta=1.0, seed=0) -> KernelUnderTest:
    """Kernel under test with the default parameters of each family."""
    lam = as_lambda(lam)
    n = lam.size
    eta = tuple(int(e) for e in (eta if eta is not None else (0,) * n))
    if len(eta) == 1 and n > 1:
        eta = eta * n
    defaults = {"maximal": (0, 0), "g": (1, 0), "riesz": (0, 1), "lusin": (1, 0), "poisson_lusin": (1, 0)}
    k0, m0 = defaults.get(kind, (0, 0))
    K = k0 if K is None else int(K)
    if M is None:
        M = (m0,) + (0,) * (n - 1)
    M = tuple(int(v) for v in np.broadcast_to(np.asarray(M, dtype=int), (n,)))
    payload = {}
    if kind == "laplace":
        sigma = 1.0
        c = 1.0 / special.gamma(1.0 - 1j * sigma)
        payload["profile"] = lambda t: c * t ** (-1j * sigma)
    if kind == "stieltjes":
        rng = np.random.default_rng(seed)
        ts = np.logspace(-6, 6, 64)
        payload["atoms"] = list(zip(ts, np.exp(2j * np.pi * rng.uniform(size=64))))
    cone = ConeSpec("straight" if kind == "poisson_lusin" else "parabolic", beta)
    ev = KernelEvaluator(kind, lam, eta, K, M, cone, payload=payload)
    if gamma is None:
        gamma = default_lusin_gamma(lam) if kind in ("lusin", "poisson_lusin") else 1.0
    return KernelUnderTest(ev, float(gamma))


def _check_finite(values, x, y):
    bad = ~np.isfinite(values)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise QuadratureFailure(f"non-finite kernel norm at x={x[i].tolist()}, y={y[i].tolist()}")


def growth_check(k: KernelUnderTest, count=10_000, seed=0, name=None) -> VerificationReport:
    """``||K(x, y)|| * w(B(x, |x - y|))`` over log-uniform samples."""
    t0 = time.perf_counter()
    ev = k.evaluator
    rng = np.random.default_rng(seed)
    x, y = sample_pairs(rng, ev.n, count)
    d = np.linalg.norm(x - y, axis=1)
    if np.any(d < 1e-4):
        raise SampleGeneratorError("growth samples must stay off the diagonal")

    def work(sl):
        v, w = ev.components(x[sl], y[sl], d[sl])
        return ev.norm(v, w)

    nrm = _chunked(work, count, ev.chunk)
    _check_finite(nrm, x, y)
    ratio = nrm * ball_volume_plus(ev.lam, x, d)
    worst = decade_stability(ratio, d, np.min(x, axis=1))
    return _report(name or f"growth[{ev.kind}]", ratio, worst, None, seed, t0, ev.lam,
                   {"eta": ev.eta, "K": ev.K, "M": ev.M}, {"x": x, "y": y, "ratio": ratio})


def smoothness_check(k: KernelUnderTest, direction="x_arg", count=10_000, seed=0, name=None) -> VerificationReport:
    """``||K(x, y) - K(x', y)|| / ((|x - x'| / |x - y|)**gamma / w(B(x, |x - y|)))``."""
    t0 = time.perf_counter()
    ev = k.evaluator
    rng = np.random.default_rng(seed)
    x, y, moved = sample_smoothness(rng, ev.n, count, direction)
    d = np.linalg.norm(x - y, axis=1)
    h = np.linalg.norm(moved - (x if direction == "x_arg" else y), axis=1)

    def work(sl):
        if direction == "x_arg":
            a, w = ev.components(x[sl], y[sl], d[sl], partner=moved[sl])
            b, _ = ev.components(moved[sl], y[sl], d[sl], partner=x[sl])
        else:
            a, w = ev.components(x[sl], y[sl], d[sl])
            b, _ = ev.components(x[sl], moved[sl], d[sl])
        return ev.norm(a - b, w)

    diff = _chunked(work, count, ev.chunk)
    _check_finite(diff, x, y)
    ratio = diff * ball_volume_plus(ev.lam, x, d) / (h / d) ** k.gamma
    worst = decade_stability(ratio, d, np.min(x, axis=1))
    return _report(name or f"smoothness[{ev.kind},{direction}]", ratio, worst, k.gamma, seed, t0, ev.lam,
                   {"eta": ev.eta, "K": ev.K, "M": ev.M}, {"x": x, "y": y, "moved": moved, "ratio": ratio})


def gradient_check(k: KernelUnderTest, count=2000, seed=0) -> VerificationReport:
    """Gradient form ``|grad K(x, y)| |x - y| w(B(x, |x - y|))`` for scalar kernels."""
    t0 = time.perf_counter()
    ev = k.evaluator
    if ev.norm_kind != "scalar":
        raise DomainError("gradient checks apply to scalar kernels")
    rng = np.random.default_rng(seed)
    x, y = sample_pairs(rng, ev.n, count)
    d = np.linalg.norm(x - y, axis=1)
    h = 1e-4 * np.minimum(d, np.min(np.minimum(x, y), axis=1))

    def work(sl):
        g2 = 0.0
        for j in range(ev.n):
            e = np.zeros(ev.n)
            e[j] = 1.0
            hs = h[sl, None] * e
            for a, b in ((x[sl] + hs, y[sl]), (x[sl], y[sl] + hs)):
                fp = ev.components(a, b, d[sl])[0]
                a2, b2 = (x[sl] - hs, y[sl]) if b is y[sl] else (x[sl], y[sl] - hs)
                fm = ev.components(a2, b2, d[sl])[0]
                g2 = g2 + np.abs((fp - fm) / (2 * h[sl])) ** 2
        return np.sqrt(g2)

    grad = _chunked(work, count, ev.chunk)
    _check_finite(grad, x, y)
    ratio = grad * d * ball_volume_plus(ev.lam, x, d)
    worst = decade_stability(ratio, d, np.min(x, axis=1))
    return _report(f"gradient[{ev.kind}]", ratio, worst, None, seed, t0, ev.lam, {"eta": ev.eta})


def _report(name, ratio, worst, gamma, seed, t0, lam, details, samples=None, threshold=STABILITY_FACTOR):
    finite = bool(np.all(np.isfinite(ratio)))
    return VerificationReport(
        check_name=name,
        sample_count=int(np.size(ratio)),
        fitted_constant=float(np.max(ratio)) if np.size(ratio) else 0.0,
        worst_ratio=float(worst),
        gamma_used=gamma,
        passed=bool(finite and worst <= threshold),
        runtime_seconds=time.perf_counter() - t0,
        seed=int(seed),
        threshold=float(threshold),
        lam=tuple(float(v) for v in np.atleast_1d(lam)),
        n=int(np.atleast_1d(lam).size),
        details=_plain(details),
        samples=samples,
    )


# ----------------------------------------------------------------------------
# lemmas


def lemma_suite(name, lam=(0.0,), count=None, seed=0, perturb=0.0, gamma=None) -> VerificationReport:
    """Run one lemma check.

    ``perturb`` tightens the constant of an exact inequality by that
    fraction (a negative control); comparability checks ignore it.
    """
    if name not in LEMMAS:
        raise DomainError(f"unknown lemma {name!r}")
    lam = as_lambda(lam)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    fn = {
        "theta": _lemma_theta,
        "qz": _lemma_qz,
        "xiineq": _lemma_xiineq,
        "intXi": _lemma_int_xi,
        "intdifXi": _lemma_int_dif_xi,
        "intXi2": _lemma_int_xi2,
        "EST_envelope": _lemma_est_envelope,
        "EST2_integral": _lemma_est2,
        "ball_comparability": _lemma_ball,
        "double": _lemma_double,
    }[name]
    exact = name in ("theta", "qz", "xiineq")
    if count is None:
        count = 100_000 if exact else 10_000
    if exact:
        fitted, worst, details = fn(rng, lam, count, perturb)
        threshold = 1.0 + FLOAT_SLACK
    else:
        fitted, worst, details = fn(rng, lam, count, gamma)
        threshold = details.pop("threshold", STABILITY_FACTOR)
    return VerificationReport(
        check_name=f"lemma[{name}]",
        sample_count=int(count),
        fitted_constant=float(fitted),
        worst_ratio=float(worst),
        gamma_used=details.pop("gamma", None),
        passed=bool(np.isfinite(worst) and worst <= threshold),
        runtime_seconds=time.perf_counter() - t0,
        seed=int(seed),
        threshold=float(threshold),
        lam=tuple(float(v) for v in lam),
        n=int(lam.size),
        details=_plain(details | {"perturb": perturb}),
    )


def _cube_s(rng, count, n):
    s = rng.uniform(-1, 1, (count, n))
    edge = rng.uniform(size=(count, n)) < 0.3
    return np.where(edge, np.sign(s), s)


def _lemma_theta(rng, lam, count, perturb):
    n = lam.size
    x, y = sample_pairs(rng, n, count)
    d = np.linalg.norm(x - y, axis=1)
    s = _cube_s(rng, count, n)
    z = _step_inside(rng, x, d * 0.5 * rng.uniform(0, 1, count) ** 0.3 * (1 - 1e-9))
    zy = _step_inside(rng, y, d * 0.5 * rng.uniform(0, 1, count) ** 0.3 * (1 - 1e-9))
    if np.any(np.linalg.norm(z - x, axis=1) >= d / 2) or np.any(np.linalg.norm(zy - y, axis=1) >= d / 2):
        raise SampleGeneratorError("theta sample violates |x - y| > 2 |x - z|")
    base = q_form(x, y, s)
    r = np.concatenate([q_form(z, y, s) / base, q_form(x, zy, s) / base])
    lo, hi = 0.25 * (1 + perturb), 4.0 * (1 - perturb)
    worst = max(np.max(r) / hi, lo / np.min(r))
    return np.max(r), worst, {"min_ratio": np.min(r), "max_ratio": np.max(r), "violations": int(np.sum((r > hi * (1 + FLOAT_SLACK)) | (r < lo * (1 - FLOAT_SLACK))))}


def _lemma_qz(rng, lam, count, perturb):
    n = lam.size
    x, y = sample_pairs(rng, n, count)
    s = _cube_s(rng, count, n)
    # half the shifts point towards y, where the inequality is tight
    toward = (y - x) * rng.uniform(0, 1.2, (count, 1))
    free = _unit_vectors(rng, count, n) * log_uniform(rng, 1e-2, 1e2, count)[:, None]
    z = np.where(rng.uniform(size=(count, 1)) < 0.5, toward, free)
    ok = np.all(x + z > 0, axis=1)
    x, y, z, s = x[ok], y[ok], z[ok], s[ok]
    lhs = q_form(x + z, y, s)
    half = 0.5 * (1 + perturb)
    rhs = half * q_form(x, y, s) - (1 - perturb) * np.sum(z * z, axis=1)
    scale = q_form(x, y, s) + np.sum(z * z, axis=1)
    gap = (rhs - lhs) / scale
    worst = 1.0 + max(0.0, float(np.max(gap)))
    return float(np.min((lhs + np.sum(z * z, axis=1)) / q_form(x, y, s))), worst, {"violations": int(np.sum(gap > FLOAT_SLACK)), "admissible": int(ok.sum())}


def _lemma_xiineq(rng, lam, count, perturb):
    x = log_uniform(rng, 1e-2, 1e2, count)
    y = log_uniform(rng, 1e-2, 1e2, count)
    xi_ = rng.uniform(1.0, 4.0, count)
    lhs = np.abs(x - y) ** xi_ * (1 + perturb)
    rhs = np.abs(x**xi_ - y**xi_)
    r = lhs / rhs
    return float(np.max(np.abs(x - y) ** xi_ / rhs)), float(np.max(r)), {"violations": int(np.sum(r > 1 + FLOAT_SLACK))}


def ball_measure(lam, x, radius, nodes=40):
    """``w+(B(x, radius))`` for the Euclidean ball, exact in one dimension, quadrature in two."""
    lam = as_lambda(lam)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.asarray(radius, dtype=float)
    if lam.size == 1:
        return ball_volume_1d(lam[0], x[:, 0], r)
    if lam.size != 2:
        raise DomainError("ball measures are implemented for n <= 2")
    # outer variable u1 = x1 + r sin(phi); inner interval length exact
    lo = np.full(x.shape[0], -0.5 * np.pi)
    hi = np.full(x.shape[0], 0.5 * np.pi)
    brk = np.arcsin(np.clip(-x[:, 0] / r, -1, 1))[:, None]
    phi, w = segment_rule(lo, hi, brk, nodes)
    u1 = x[:, 0, None] + r[:, None] * np.sin(phi) if r.ndim else x[:, 0, None] + r * np.sin(phi)
    rr = r[:, None] if r.ndim else r
    half = rr * np.cos(phi)
    p2 = 2 * lam[1] + 1
    a = np.maximum(x[:, 1, None] - half, 0.0)
    b = x[:, 1, None] + half
    inner = (b**p2 - a**p2) / p2
    dens = np.where(u1 > 0, np.abs(u1) ** (2 * lam[0]), 0.0)
    return np.sum(w * rr * np.cos(phi) * dens * inner, axis=1)


def _sample_xt(rng, n, count):
    x = log_uniform(rng, 1e-2, 1e2, (count, n))
    t = log_uniform(rng, 1e-2, 1e2, count) ** 2
    return x, t


def _lemma_int_xi(rng, lam, count, gamma):
    x, t = _sample_xt(rng, lam.size, count)
    r = np.sqrt(t)
    val = ball_measure(lam, x, r) / ball_volume_plus(lam, x, r)
    width = float(np.max(val) / np.min(val))
    worst = max(two_sided_stability(val, t, np.min(x, axis=1)), width / 2)
    return np.max(val), worst, {"bracket": [np.min(val), np.max(val)], "bracket_width": width, "threshold": STABILITY_FACTOR}


def _lemma_ball(rng, lam, count, gamma):
    x, t = _sample_xt(rng, lam.size, count)
    R = np.sqrt(t)
    val = ball_volume_plus(lam, x, R) / (R**lam.size * np.prod((x + R[:, None]) ** (2 * lam), axis=1))
    worst = two_sided_stability(val, R, np.min(x, axis=1))
    return np.max(val), worst, {"bracket": [np.min(val), np.max(val)]}


def _xi_difference(lam, x, x2, t, nodes=12):
    """``int |sqrt Xi(x) - sqrt Xi(x')|**2`` over the cube section, both shifts in the orthant."""
    count, n = x.shape
    r = np.sqrt(t)
    zs, ws, a, b = [], [], [], []
    for j in range(n):
        lo = np.maximum(-r, -np.minimum(x[:, j], x2[:, j]))
        z, w = segment_rule(lo, r, np.stack([-x[:, j], -x2[:, j]], -1), nodes)
        zs.append(z)
        ws.append(w)
        u, u2 = x[:, j, None] + z, x2[:, j, None] + z
        a.append(np.where(u > 0, np.abs(u), 1.0) ** lam[j] / np.sqrt(ball_volume_1d(lam[j], x[:, j], r))[:, None])
        b.append(np.where(u2 > 0, np.abs(u2), 1.0) ** lam[j] / np.sqrt(ball_volume_1d(lam[j], x2[:, j], r))[:, None])
    A = a[0]
    B = b[0]
    W = ws[0]
    for j in range(1, n):
        A = (A[..., None] * a[j][:, None, :]).reshape(count, -1)
        B = (B[..., None] * b[j][:, None, :]).reshape(count, -1)
        W = (W[..., None] * ws[j][:, None, :]).reshape(count, -1)
    return np.sum(W * (A - B) ** 2, axis=1)


def _lemma_int_dif_xi(rng, lam, count, gamma):
    gamma = default_lusin_gamma(lam) if gamma is None else gamma
    x, t = _sample_xt(rng, lam.size, count)
    h = log_uniform(rng, 1e-3, 1.0, count) * np.sqrt(t)
    x2 = _step_inside(rng, x, h)
    sep = np.linalg.norm(x - x2, axis=1)
    val = _xi_difference(lam, x, x2, t) / (sep**2 / t) ** gamma
    worst = decade_stability(val, t, np.min(x, axis=1), sep)
    return np.max(val), worst, {"gamma": gamma}


def _lemma_int_xi2(rng, lam, count, gamma):
    gamma = min(0.5, float(np.min(lam + 0.5))) if gamma is None else gamma
    n = lam.size
    x, t = _sample_xt(rng, n, count)
    r = np.sqrt(t)
    h = log_uniform(rng, 1e-3, 10.0, count) * r
    x2 = _step_inside(rng, x, h)
    sep = np.linalg.norm(x - x2, axis=1)
    # cube section: w(Q ∩ orthant) - w(Q ∩ {u > x - x'}), normalized by V
    full = ball_volume_plus(lam, x, r)
    keep = 1.0
    for j in range(n):
        p = 2 * lam[j] + 1
        a = np.maximum.reduce([np.zeros(count), x[:, j] - x2[:, j], x[:, j] - r])
        b = x[:, j] + r
        keep = keep * np.maximum(b**p - np.minimum(a, b) ** p, 0.0) / p
    val = np.maximum(full - keep, 0.0) / full / (sep**2 / t) ** gamma
    worst = decade_stability(val, t, np.min(x, axis=1), sep)
    return np.max(val), worst, {"gamma": gamma}


def _lemma_est_envelope(rng, lam, count, gamma):
    n = lam.size
    x, y = sample_pairs(rng, n, count)
    d = np.linalg.norm(x - y, axis=1)
    t = d**2 * log_uniform(rng, 1e-2, 1e2, count)
    worst, fitted, per = 1.0, 0.0, {}
    for eta in sign_vectors(n):
        for K, M, l, r in ((0, 0, 0, 0), (1, 0, 0, 0), (0, 1, 0, 0), (0, 2, 0, 0), (0, 1, 1, 0), (0, 0, 0, 1)):
            spec = DerivativeSpec(K, (M,) + (0,) * (n - 1), (l,) + (0,) * (n - 1), (r,) + (0,) * (n - 1))
            p = HeatKernelParams(lam, eta, t)
            val = np.abs(kernel_derivative(p, spec, x, y)) / est_envelope(p, spec, x, y)
            st = decade_stability(val, d, t, np.min(x, axis=1))
            per[f"eta={eta},K={K},M={M},l={l},r={r}"] = [float(np.max(val)), float(st)]
            worst = max(worst, st)
            fitted = max(fitted, float(np.max(val)))
    return fitted, worst, {"configs": per}


EST2_CONFIGS = (
    # p, W, C, u
    (math.inf, 1.0, 1 / 128, 1.0),
    (2.0, 2.0, 1 / 8, 0.0),
    (2.0, 2.0, 1 / 128, 1.0),
    (1.0, 0.5, 1 / 8, 0.0),
    (1.0, 1.0, 1 / 8, 1.0),
)


def _lemma_est2(rng, lam, count, gamma, configs=EST2_CONFIGS):
    n = lam.size
    x, y = sample_pairs(rng, n, count)
    d = np.linalg.norm(x - y, axis=1)
    V = ball_volume_plus(lam, x, d)
    tau, tw = log_trapezoid(1e-6, 1e12, 0.1)
    worst, fitted, per = 1.0, 0.0, {}
    for eps in sign_vectors(n):
        for eta in sign_vectors(n):
            nu = lam + np.asarray(eta) + 1 + np.asarray(eps)
            for p, W, C, u in configs:
                norms = np.empty(count)
                for s0 in range(0, count, 256):
                    sl = slice(s0, s0 + 256)
                    t = d[sl, None] ** 2 * tau
                    xs, ys = x[sl, None, :], y[sl, None, :]
                    ex = -(n / 2 + lam.sum() + sum(eta) + 2 * sum(eps)) - (0 if math.isinf(p) else W / p) - u / 2
                    mono = np.prod(xs ** (2 * np.asarray(eps) + np.asarray(eta)) * ys ** (2 * np.asarray(eps) + np.asarray(eta)), -1)
                    integral = np.ones_like(t)
                    for j in range(n):
                        w = 2 * C * x[sl, None, j] * y[sl, None, j] / t
                        integral = integral * np.exp(-C * (x[sl, None, j] - y[sl, None, j]) ** 2 / t) * omega_laplace(nu[j], w)
                    ups = mono * t**ex * integral
                    if math.isinf(p):
                        norms[sl] = np.max(ups, axis=1)
                    else:
                        norms[sl] = np.sum(ups**p * t ** (W - 1) * d[sl, None] ** 2 * tw, axis=1) ** (1 / p)
                val = norms * d**u * V
                st = decade_stability(val, d, np.min(x, axis=1))
                per[f"eps={eps},eta={eta},p={p},W={W},C={C},u={u}"] = [float(np.max(val)), float(st)]
                worst = max(worst, st)
                fitted = max(fitted, float(np.max(val)))
    return fitted, worst, {"configs": per}


def _lemma_double(rng, lam, count, gamma):
    n = lam.size
    x, y = sample_pairs(rng, n, count)
    d = np.linalg.norm(x - y, axis=1)
    z = _step_inside(rng, x, d * 0.5 * rng.uniform(0, 1, count) * (1 - 1e-9))
    dz = np.linalg.norm(z - y, axis=1)
    worst, fitted = 1.0, 0.0
    for g in (-1.0, 0.5, 2.0):
        val = (dz ** (-g) / ball_volume_plus(lam, z, dz)) / (d ** (-g) / ball_volume_plus(lam, x, d))
        worst = max(worst, two_sided_stability(val, d, np.min(x, axis=1)))
        fitted = max(fitted, float(np.max(val)), float(1 / np.min(val)))
    return fitted, worst, {}


# ----------------------------------------------------------------------------
# identities


@dataclass(frozen=True)
class IdentityConfig:
    lam: tuple = (-0.3,)
    seed: int = 0
    functions: int = 20
    radius: float = 10.0
    nodes: int = 200
    z_max: float = 20.0
    samples: int = 1000
    omega_order: int = 64
    constant_factor: float = 1.0
    mass_scale: float = 1.0


def _identity(name, err, tol, seed, t0, lam, details=None):
    err = float(err)
    return VerificationReport(
        check_name=f"identity[{name}]",
        sample_count=int((details or {}).pop("count", 1)),
        fitted_constant=err,
        worst_ratio=err / tol,
        gamma_used=None,
        passed=bool(np.isfinite(err) and err <= tol),
        runtime_seconds=time.perf_counter() - t0,
        seed=int(seed),
        threshold=float(tol),
        lam=tuple(float(v) for v in np.atleast_1d(lam)),
        n=int(np.atleast_1d(lam).size),
        details=_plain(details or {}),
    )


def random_test_functions(grid, count, rng):
    """Gaussians times low-degree polynomials with random complex coefficients."""
    pts = grid.points
    out = []
    for _ in range(count):
        v = np.zeros(grid.shape, dtype=complex)
        for _ in range(3):
            c = rng.normal() + 1j * rng.normal()
            centre = rng.uniform(-2, 2, grid.n)
            width = rng.uniform(0.5, 1.2)
            poly = 1 + np.sum(rng.normal(size=grid.n) * (pts - centre), axis=-1) * 0.5
            v += c * poly * np.exp(-np.sum((pts - centre) ** 2, axis=-1) / (2 * width**2))
        out.append(GridFunction(grid, v))
    return out


def spectral_test_functions(lam, eta, x_grid, z_grid, count, rng):
    """``H_eta`` images of smooth spectra vanishing to fourth order at the origin."""
    r = np.sqrt(np.sum(z_grid.points**2, axis=-1))
    out = []
    for _ in range(count):
        k = rng.integers(2, 4)
        width = rng.uniform(1.0, 2.0)
        poly = 1 + np.sum(rng.normal(size=z_grid.n) * 0.3 * z_grid.points, axis=-1)
        spec = r ** (2 * k) * np.exp(-((r / width) ** 2)) * poly
        out.append(GridFunction(x_grid, hankel_apply(spec, z_grid, eta, x_grid.axes)))
    return out


def check_plancherel(cfg: IdentityConfig, tol=1e-6):
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    lam = as_lambda(cfg.lam)
    nodes = cfg.nodes if lam.size == 1 else max(60, cfg.nodes // 2)
    xg = quadrature_grid(lam, cfg.radius, nodes, cfg.mass_scale).mirrored()
    zg = spectral_grid(lam, cfg.z_max, nodes).mirrored()
    zg = type(zg)(zg.axes, tuple(w * cfg.mass_scale for w in zg.axis_weights), zg.lam)
    plan, inv = 0.0, 0.0
    for f in random_test_functions(xg, cfg.functions, rng):
        F = dunkl_forward(f, zg)
        plan = max(plan, abs(F.norm() / f.norm() - 1))
        back = dunkl_inverse(F, xg)
        inv = max(inv, np.max(np.abs(back.values - f.values)) / np.max(np.abs(f.values)))
    return [
        _identity("plancherel", plan, tol, cfg.seed, t0, lam, {"count": cfg.functions}),
        _identity("inversion", inv, tol, cfg.seed, t0, lam, {"count": cfg.functions}),
    ]


def check_restricted_transform(cfg: IdentityConfig, tol=1e-10):
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed + 1)
    lam = as_lambda(cfg.lam)
    nodes = 60 if lam.size > 1 else 120
    xg = quadrature_grid(lam, cfg.radius, nodes)
    zg = spectral_grid(lam, cfg.z_max, nodes)
    err = 0.0
    for eta in sign_vectors(lam.size):
        f = random_test_functions(xg, 1, rng)[0]
        a = transform_plus(f, eta, zg).values
        b = transform_plus_by_extension(f, eta, zg).values
        err = max(err, np.max(np.abs(a - b)) / np.max(np.abs(b)))
    return _identity("restricted_transform", err, tol, cfg.seed, t0, lam)


def check_eigenfunction(cfg: IdentityConfig, tol=1e-6):
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed + 2)
    lam = as_lambda(cfg.lam)
    n = lam.size
    m = cfg.samples
    x = rng.uniform(0.3, 3.0, (m, n)) * rng.choice([-1, 1], (m, n))
    z = rng.uniform(0.2, 3.0, (m, n)) * rng.choice([-1, 1], (m, n))
    lhs = dunkl_laplacian(lambda p: psi(lam, z, p), lam, x, accuracy=8)
    rhs = np.sum(z * z, axis=-1) * psi(lam, z, x)
    scale = np.sum(z * z, axis=-1) * np.abs(psi(lam, z, np.zeros_like(x)))
    err = np.max(np.abs(lhs - rhs) / scale)
    return _identity("eigenfunction", err, tol, cfg.seed, t0, lam, {"count": m})


def check_intertwining(cfg: IdentityConfig, tol=1e-6, draws=10):
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed + 3)
    err = 0.0
    for _ in range(draws):
        lam = rng.uniform(-0.45, 2.5, 1)
        z = rng.uniform(0.2, 3.0, 1)
        x = rng.uniform(0.3, 3.0, 1)
        for eta in (0, 1):
            for M in range(4):
                lhs, rhs = intertwine_check(lam, (eta,), (M,), z, x)
                ref = abs(z[0]) ** M * max(abs(float(np.squeeze(rhs))) / max(abs(z[0]) ** M, 1e-300), 1e-2)
                err = max(err, abs(float(np.squeeze(lhs - rhs))) / ref)
    return _identity("intertwining", err, tol, cfg.seed, t0, cfg.lam, {"count": draws * 8})


def _pair_samples(rng, n, m, lo=-2, hi=2):
    x = 10 ** rng.uniform(-1, 1, (m, n))
    d = 10 ** rng.uniform(lo, hi, m)
    y = _step_inside(rng, x, d)
    t = 10 ** rng.uniform(lo, hi, m)
    return x, y, t


def check_bhk(cfg: IdentityConfig, tol=1e-8, order=None):
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed + 4)
    lam = as_lambda(cfg.lam)
    x, y, t = _pair_samples(rng, lam.size, cfg.samples)
    err = 0.0
    for eta in sign_vectors(lam.size):
        p = HeatKernelParams(lam, eta, t)
        ref = heat_kernel_product(p, x, y)
        rep = heat_kernel_integral_rep(p, x, y, order=order or cfg.omega_order, constant_factor=cfg.constant_factor)
        ok = ref > 1e-280
        err = max(err, float(np.max(np.abs(rep[ok] - ref[ok]) / ref[ok])))
    return _identity("bhk_representation", err, tol, cfg.seed, t0, lam, {"count": cfg.samples, "order": order or cfg.omega_order})


def _positive_rule(lam, x, y, t_max, nodes=600):
    R = float(np.max(np.maximum(x, y))) + 20 * math.sqrt(t_max)
    return quadrature_grid(lam, R, nodes)


def check_semigroup_and_mass(cfg: IdentityConfig, tol_law=1e-5, tol_mass=1e-6, draws=40):
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed + 5)
    lam = as_lambda(cfg.lam)
    n = lam.size
    law, mass = 0.0, 0.0
    nodes = 600 if n == 1 else 160
    for _ in range(draws):
        x = rng.uniform(0.1, 3.0, n)
        y = rng.uniform(0.1, 3.0, n)
        t, s = rng.uniform(0.1, 2.0, 2)
        g = _positive_rule(lam, x, y, max(t, s), nodes)
        z = g.points.reshape(-1, n)
        w = g.weights.reshape(-1)
        for eta in sign_vectors(n):
            p = HeatKernelParams(lam, eta, t)
            a = heat_kernel_product(p, np.broadcast_to(x, z.shape), z)
            b = heat_kernel_product(p.at(s), z, np.broadcast_to(y, z.shape))
            lhs = np.sum(a * b * w)
            rhs = heat_kernel_product(p.at(t + s), x, y)
            law = max(law, abs(lhs - rhs) / abs(rhs))
        p0 = HeatKernelParams(lam, (0,) * n, t)
        m0 = np.sum(heat_kernel_product(p0, np.broadcast_to(x, z.shape), z) * w)
        # full kernel: integrate over every orthant by reflecting y
        xs = x * rng.choice([-1, 1], n)
        full = 0.0
        for sgn in sign_vectors(n):
            zz = z * (1 - 2 * np.asarray(sgn))
            full += np.sum(dunkl_heat_kernel(lam, t, np.broadcast_to(xs, zz.shape), zz) * w)
        mass = max(mass, abs(m0 - 1), abs(full - 1))
    return [
        _identity("semigroup_law", law, tol_law, cfg.seed, t0, lam, {"count": draws}),
        _identity("unit_mass", mass, tol_mass, cfg.seed, t0, lam, {"count": draws}),
    ]


def check_heat_equation(cfg: IdentityConfig, tol=1e-6, draws=200):
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed + 6)
    lam = as_lambda(cfg.lam)
    n = lam.size
    x = rng.uniform(0.3, 3.0, (draws, n))
    y = rng.uniform(0.3, 3.0, (draws, n))
    t = rng.uniform(0.2, 2.0, draws)
    err = 0.0
    for eta in sign_vectors(n):
        p = HeatKernelParams(lam, eta, t)
        dt = kernel_derivative(p, DerivativeSpec(1), x, y)
        g = heat_kernel_product(p, x, y)
        lap = 0.0
        for j in range(n):
            e1 = tuple(int(i == j) for i in range(n))
            e2 = tuple(2 * int(i == j) for i in range(n))
            d1 = kernel_derivative(p, DerivativeSpec(0, (0,) * n, e1, (0,) * n), x, y)
            d2 = kernel_derivative(p, DerivativeSpec(0, (0,) * n, e2, (0,) * n), x, y)
            lap = lap + d2 + 2 * lam[j] * d1 / x[:, j] - 2 * lam[j] * eta[j] * g / x[:, j] ** 2
        scale = np.abs(heat_kernel_product(p, x, y)) / t
        err = max(err, float(np.max(np.abs(dt - lap) / scale)))
    return _identity("heat_equation", err, tol, cfg.seed, t0, lam, {"count": draws})


def check_classical(cfg: IdentityConfig, tol_heat=1e-12, tol_poisson=1e-8, draws=500):
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed + 7)
    x = 10 ** rng.uniform(-1, 1, draws)
    y = 10 ** rng.uniform(-1, 1, draws)
    t = 10 ** rng.uniform(-1, 1, draws)
    lam0 = np.array([0.0])
    heat = 0.0
    for eta, sg in ((0, 1.0), (1, -1.0)):
        ref = (np.exp(-((x - y) ** 2) / (4 * t)) + sg * np.exp(-((x + y) ** 2) / (4 * t))) / np.sqrt(4 * np.pi * t)
        val = heat_kernel_product(HeatKernelParams(lam0, (eta,), t), x[:, None], y[:, None])
        ok = np.abs(ref) > 1e-280
        heat = max(heat, float(np.max(np.abs(val[ok] - ref[ok]) / np.abs(ref[ok]))))
    xs = x * rng.choice([-1, 1], draws)
    ys = y * rng.choice([-1, 1], draws)
    ref = np.exp(-((xs - ys) ** 2) / (4 * t)) / np.sqrt(4 * np.pi * t)
    val = dunkl_heat_kernel(lam0, t, xs[:, None], ys[:, None])
    # sign-mixed pairs come out of a cancelling average; measure against the component size
    size = np.maximum(ref, np.exp(-((x - y) ** 2) / (4 * t)) / np.sqrt(4 * np.pi * t) * 1e-3)
    ok = size > 1e-280
    heat = max(heat, float(np.max(np.abs(val[ok] - ref[ok]) / size[ok])))
    pois = 0.0
    for eta, sg in ((0, 1.0), (1, -1.0)):
        ref = t / np.pi * (1 / (t**2 + (x - y) ** 2) + sg / (t**2 + (x + y) ** 2))
        val = poisson_kernel(HeatKernelParams(lam0, (eta,), t), x[:, None], y[:, None])
        pois = max(pois, float(np.max(np.abs(val - ref) / np.abs(ref))))
    return [
        _identity("classical_heat", heat, tol_heat, cfg.seed, t0, lam0, {"count": draws}),
        _identity("classical_poisson", pois, tol_poisson, cfg.seed, t0, lam0, {"count": draws}),
    ]


def check_subordination(cfg: IdentityConfig, tol=1e-4):
    t0 = time.perf_counter()
    lam = as_lambda(cfg.lam)
    if lam.size > 1:
        xg = quadrature_grid(lam, 8.0, 100)
    else:
        xg = quadrature_grid(lam, 20.0, 160)
    pts = xg.points
    err = 0.0
    probe = np.array([[0.3] * lam.size, [1.0] * lam.size, [2.2] * lam.size])
    for eta in sign_vectors(lam.size):
        vals = np.prod(pts ** np.asarray(eta), axis=-1) * np.exp(-np.sum(pts**2, axis=-1))
        f = GridFunction(xg, vals)
        for t in (0.25, 0.5, 1.0, 2.0):
            a = poisson_semigroup(f, eta, t, route="kernel", points=probe)
            b = poisson_semigroup(f, eta, t, points=probe, route="spectral")
            err = max(err, float(np.max(np.abs(a - b) / np.abs(b))))
    return _identity("subordination", err, tol, cfg.seed, t0, lam, {"count": 4 * 3 * 2**lam.size})


G_PAIRS = ((1, 0), (2, 0), (0, 1), (0, 2), (1, 1))


def check_g_constants(cfg: IdentityConfig, tol=1e-3, functions=4):
    """Square-function constants ``Gamma(2K + M) 2**-(2K + M)``; for ``n > 1`` and ``|M| > 0`` only ``<=``."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed + 8)
    lam = as_lambda(cfg.lam)
    n = lam.size
    nodes = 200 if n == 1 else 100
    xg = quadrature_grid(lam, 25.0 if n == 1 else 16.0, nodes)
    zg = spectral_grid(lam, 12.0, nodes)
    err = 0.0
    for eta in sign_vectors(n):
        for f in spectral_test_functions(lam, eta, xg, zg, functions, rng):
            nf = f.norm() ** 2
            for K, M in G_PAIRS:
                Mv = (M,) + (0,) * (n - 1)
                g = g_function(f, OperatorSpec("g_function", K=K, M=Mv, eta=eta), z_grid=zg).norm() ** 2
                c = math.gamma(2 * K + M) * 2.0 ** (-(2 * K + M))
                rel = g / (c * nf) - 1
                err = max(err, abs(rel) if (n == 1 or M == 0) else max(rel, 0.0))
    return _identity("g_constants", err, tol, cfg.seed, t0, lam, {"count": functions * 2**n * len(G_PAIRS)})


def check_riesz_contraction(cfg: IdentityConfig, tol=1e-3):
    t0 = time.perf_counter()
    rng = np.random.default_rng(cfg.seed + 9)
    lam = as_lambda(cfg.lam)
    n = lam.size
    nodes = 200 if n == 1 else 100
    xg = quadrature_grid(lam, 25.0 if n == 1 else 16.0, nodes)
    zg = spectral_grid(lam, 12.0, nodes)
    worst, unit = 0.0, 0.0
    for _ in range(cfg.functions):
        eta = tuple(int(v) for v in rng.integers(0, 2, n))
        M = tuple(int(v) for v in rng.integers(0, 3, n))
        if sum(M) == 0:
            M = (1,) + M[1:]
        f = spectral_test_functions(lam, eta, xg, zg, 1, rng)[0]
        r = riesz_transform(f, OperatorSpec("riesz", M=M, eta=eta), z_grid=zg).norm() / f.norm()
        worst = max(worst, r - 1)
        if n == 1:
            unit = max(unit, abs(r - 1))
    return _identity("riesz_contraction", max(worst, unit), tol, cfg.seed, t0, lam, {"count": cfg.functions})


def lusin_g_equivalence(lams=((-0.3,), (1.7,)), betas=(0.5, 1.0, 2.0), seed=0, functions=1, nodes=80,
                        width=4.0) -> VerificationReport:
    """``||S f|| / ||g f||`` over test functions, parities, the listed ``(K, M)`` and apertures.

    Passes when the largest ratio over the smallest stays within ``width``.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed + 11)
    ratios, rows = [], []
    for lam in lams:
        lam = as_lambda(lam)
        n = lam.size
        xg = quadrature_grid(lam, 20.0 if n == 1 else 10.0, nodes if n == 1 else max(24, nodes // 3))
        zg = spectral_grid(lam, 10.0, xg.shape[0])
        for eta in sign_vectors(n):
            for f in spectral_test_functions(lam, eta, xg, zg, functions, rng):
                for K, M in G_PAIRS:
                    Mv = (M,) + (0,) * (n - 1)
                    g = g_function(f, OperatorSpec("g_function", K=K, M=Mv, eta=eta), z_grid=zg).norm()
                    spec = OperatorSpec("lusin_area", K=K, M=Mv, eta=eta)
                    for beta in betas:
                        s = lusin_area(f, spec, ConeSpec("parabolic", beta), z_grid=zg).norm()
                        ratios.append(s / g)
                        rows.append([float(v) for v in lam] + [list(eta), K, M, beta, s / g])
    r = np.asarray(ratios)
    spread = float(r.max() / r.min())
    return VerificationReport(
        check_name="lusin_g_equivalence",
        sample_count=int(r.size),
        fitted_constant=spread,
        worst_ratio=spread / width,
        gamma_used=None,
        passed=bool(np.all(np.isfinite(r)) and spread <= width),
        runtime_seconds=time.perf_counter() - t0,
        seed=int(seed),
        threshold=float(width),
        lam=tuple(float(v) for v in as_lambda(lams[0])),
        n=int(as_lambda(lams[0]).size),
        details=_plain({"bracket": [r.min(), r.max()], "rows": rows}),
    )


def check_refinement(cfg: IdentityConfig, floor=1e-13):
    """Errors never grow along a three-step refinement ladder (down to a round-off floor)."""
    t0 = time.perf_counter()
    lam = as_lambda(cfg.lam)
    bhk = [check_bhk(IdentityConfig(cfg.lam, cfg.seed, samples=200), order=o).fitted_constant for o in (8, 16, 32)]
    plan = []
    for nodes in (30, 60, 120):
        c = IdentityConfig(cfg.lam, cfg.seed, functions=3, nodes=nodes if lam.size == 1 else nodes // 2)
        plan.append(check_plancherel(c)[0].fitted_constant)
    bad = 0
    for seq in (bhk, plan):
        for a, b in zip(seq, seq[1:]):
            bad += b > max(a, floor)
    return _identity("refinement_ladder", float(bad), 0.5, cfg.seed, t0, lam, {"bhk": bhk, "plancherel": plan})


def identity_suite(cfg: IdentityConfig = IdentityConfig()) -> list[VerificationReport]:
    """Every exact identity as an executable check; order is fixed."""
    out: list[VerificationReport] = []
    out += check_plancherel(cfg)
    out.append(check_restricted_transform(cfg))
    out.append(check_eigenfunction(cfg))
    out.append(check_intertwining(cfg))
    out.append(check_bhk(cfg))
    out += check_semigroup_and_mass(cfg)
    out.append(check_heat_equation(cfg))
    out += check_classical(cfg)
    out.append(check_subordination(cfg))
    out.append(check_g_constants(cfg))
    out.append(check_riesz_contraction(cfg))
    out.append(check_refinement(cfg))
    return out


def merge_reports(reports) -> list[VerificationReport]:
    """Deterministic order: by check name, then seed."""
    return sorted(reports, key=lambda r: (r.check_name, r.seed, r.lam))
