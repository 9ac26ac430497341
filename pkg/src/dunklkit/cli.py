"""Command line driver: ``dunklkit eval | verify | report``.

Every option may also come from a JSON config file (``--config``); flags
given on the command line win.  Exit codes: 0 success, 1 verification
failure, 2 usage or configuration error.  Errors are reported on stderr as
``{"code", "message", "context"}``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import warnings

import numpy as np

from .analytic import DomainError, as_lambda
from .kernels import ConeSpec, DerivativeSpec, HeatKernelParams, kernel_csv, kernel_derivative, poisson_kernel_derivative
from .operators import (
    OperatorSpec,
    g_function,
    lusin_area,
    maximal_heat,
    multiplier_apply,
    result_document,
    riesz_transform,
    semigroup_apply,
)
from .symmetry import GridFunction, quadrature_grid
from .transform import Multiplier, spectral_grid, transform_plus
from . import verify as vf

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message, prog=self.prog)


DEFAULTS = {
    "common": {"n": 1, "lam": [0.0], "eta": [0], "seed": 0, "out": None},
    "eval": {
        "kernel": None,
        "op": None,
        "transform": None,
        "t": 1.0,
        "pairs": None,
        "K": 0,
        "M": [0],
        "l": [0],
        "r": [0],
        "function": "gaussian",
        "radius": 20.0,
        "nodes": 160,
        "z_max": 12.0,
        "beta": 1.0,
        "semigroup": "heat",
        "sigma": 1.0,
    },
    "verify": {
        "suite": "identities",
        "kernel": "maximal",
        "lemma": "all",
        "gamma": None,
        "beta": 1.0,
        "count": None,
        "direction": "both",
        "corrupt_constant": 1.0,
        "omega_mass_scale": 1.0,
        "perturb": 0.0,
        "dump_samples": None,
    },
    "report": {"inputs": []},
}


def _floats(s):
    return [float(v) for v in str(s).replace(",", " ").split()]


def _ints(s):
    return [int(v) for v in str(s).replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dunklkit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    S = argparse.SUPPRESS

    def common(sp):
        sp.add_argument("--config", default=S, help="JSON file with option values")
        sp.add_argument("--n", type=int, default=S)
        sp.add_argument("--lambda", dest="lam", type=_floats, default=S, help="multiplicities, comma separated")
        sp.add_argument("--eta", type=_ints, default=S, help="parity bits, comma separated")
        sp.add_argument("--seed", type=int, default=S)
        sp.add_argument("--out", default=S, help="output path (stdout when omitted)")

    e = sub.add_parser("eval", help="evaluate a kernel, operator or transform")
    common(e)
    what = e.add_mutually_exclusive_group()
    what.add_argument("--kernel", choices=["heat", "poisson"], default=S)
    what.add_argument("--op", choices=["heat", "poisson", "maximal", "g", "lusin", "riesz", "laplace", "stieltjes"], default=S)
    what.add_argument("--transform", choices=["plus"], default=S)
    e.add_argument("--t", type=float, default=S)
    e.add_argument("--pairs", default=S, help="CSV with columns x1..xn, y1..yn")
    e.add_argument("--K", type=int, default=S)
    e.add_argument("--M", type=_ints, default=S)
    e.add_argument("--l", type=_ints, default=S)
    e.add_argument("--r", type=_ints, default=S)
    e.add_argument("--function", choices=["gaussian", "bump"], default=S)
    e.add_argument("--radius", type=float, default=S)
    e.add_argument("--nodes", type=int, default=S)
    e.add_argument("--z-max", dest="z_max", type=float, default=S)
    e.add_argument("--beta", type=float, default=S)
    e.add_argument("--semigroup", choices=["heat", "poisson"], default=S)
    e.add_argument("--sigma", type=float, default=S, help="imaginary power for --op laplace")

    v = sub.add_parser("verify", help="run verification suites")
    common(v)
    v.add_argument("--suite", choices=["identities", "growth", "smoothness", "gradient", "lemmas", "equivalence", "all"], default=S)
    v.add_argument("--kernel", choices=list(vf.KERNELS) + ["all"], default=S)
    v.add_argument("--lemma", choices=list(vf.LEMMAS) + ["all"], default=S)
    v.add_argument("--gamma", type=float, default=S)
    v.add_argument("--beta", type=float, default=S)
    v.add_argument("--count", type=int, default=S)
    v.add_argument("--direction", choices=["x_arg", "y_arg", "both"], default=S)
    v.add_argument("--corrupt-constant", dest="corrupt_constant", type=float, default=S)
    v.add_argument("--omega-mass-scale", dest="omega_mass_scale", type=float, default=S)
    v.add_argument("--perturb", type=float, default=S)
    v.add_argument("--dump-samples", dest="dump_samples", default=S, help="CSV of per-sample ratios")

    r = sub.add_parser("report", help="aggregate report files into one table")
    r.add_argument("inputs", nargs="*", default=S)
    r.add_argument("--config", default=S)
    r.add_argument("--out", default=S)
    return p


def resolve(argv) -> dict:
    """Parsed options merged over config-file values over defaults."""
    ns = vars(build_parser().parse_args(argv))
    cmd = ns.pop("command", None)
    if cmd is None:
        raise ConfigError("a subcommand is required", choices=["eval", "verify", "report"])
    allowed = dict(DEFAULTS[cmd])
    if cmd != "report":
        allowed = {**DEFAULTS["common"], **allowed}
    cfg = {}
    if "config" in ns:
        path = ns.pop("config")
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}", path=path) from None
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object", path=path)
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        if "lambda" in cfg:
            cfg["lam"] = cfg.pop("lambda")
        unknown = sorted(set(cfg) - set(allowed))
        if unknown:
            raise ConfigError("unknown config keys", keys=unknown)
    out = {**allowed, **cfg, **ns}
    out["command"] = cmd
    return _validate(out)


def _validate(c: dict) -> dict:
    if c["command"] == "report":
        return c
    lam = np.atleast_1d(np.asarray(c["lam"], dtype=float))
    n = int(c["n"])
    if n < 1:
        raise ConfigError("n must be positive", n=n)
    if lam.size == 1 and n > 1:
        lam = np.repeat(lam, n)
    if lam.size != n:
        raise ConfigError("lambda has the wrong length", n=n, lam=lam.tolist())
    c["lam"] = tuple(float(v) for v in as_lambda(lam))
    eta = [int(v) for v in np.atleast_1d(c["eta"])]
    if len(eta) == 1 and n > 1:
        eta = eta * n
    if len(eta) != n or any(e not in (0, 1) for e in eta):
        raise ConfigError("eta must be n bits", eta=eta)
    c["eta"] = tuple(eta)
    for key in ("M", "l", "r"):
        if key in c:
            v = [int(m) for m in np.atleast_1d(c[key])]
            if len(v) == 1 and n > 1:
                v = v + [0] * (n - 1) if key == "M" else v * n
            if len(v) != n or any(m < 0 for m in v):
                raise ConfigError(f"{key} must be n nonnegative integers", value=v)
            c[key] = tuple(v)
    if c["command"] == "eval":
        if sum(x is not None for x in (c["kernel"], c["op"], c["transform"])) != 1:
            raise ConfigError("choose exactly one of --kernel, --op, --transform")
        if not c["t"] > 0:
            raise ConfigError("t must be positive", t=c["t"])
    if c["command"] == "verify":
        g = c["gamma"]
        if g is not None and not (0 < g <= 1):
            raise ConfigError("gamma must lie in (0, 1]", gamma=g)
        if g is not None and c["kernel"] in ("lusin", "poisson_lusin", "all") and g > 0.5:
            raise ConfigError("Lusin kernels need gamma <= 1/2", gamma=g)
        if c["count"] is not None and c["count"] < 1:
            raise ConfigError("count must be positive", count=c["count"])
    return c


# ----------------------------------------------------------------------------
# output


def write_atomic(path, text: str):
    """Write via a temporary file in the target directory and rename."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(c, text):
    if c.get("out"):
        write_atomic(c["out"], text)
    else:
        sys.stdout.write(text)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


# ----------------------------------------------------------------------------
# eval


def _read_pairs(path, n):
    try:
        with open(path) as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read pairs: {exc}", path=path) from None
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    data = np.array([[float(v) for v in r] for r in rows], dtype=float).reshape(-1, 2 * n) if rows else np.zeros((0, 2 * n))
    if data.shape[1] != 2 * n:
        raise ConfigError("pairs need 2n columns", n=n, columns=data.shape[1])
    return data[:, :n], data[:, n:]


def _is_number(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def _test_function(c, grid):
    pts = grid.points
    eta = np.asarray(c["eta"])
    parity = np.prod(pts**eta, axis=-1)
    if c["function"] == "gaussian":
        return GridFunction(grid, parity * np.exp(-np.sum(pts**2, axis=-1)))
    return GridFunction(grid, parity * np.exp(-np.sum((pts - 2.0) ** 2, axis=-1) / 0.5))


def cmd_eval(c) -> int:
    lam = as_lambda(c["lam"])
    n = lam.size
    if c["kernel"]:
        x, y = _read_pairs(c["pairs"], n) if c["pairs"] else (np.zeros((0, n)), np.zeros((0, n)))
        params = HeatKernelParams(lam, c["eta"], c["t"])
        spec = DerivativeSpec(c["K"], c["M"], c["l"], c["r"])
        if x.shape[0] == 0:
            vals = np.zeros(0)
        elif c["kernel"] == "heat":
            vals = kernel_derivative(params, spec, x, y)
        else:
            vals = poisson_kernel_derivative(params, spec, x, y)
        _emit(c, kernel_csv(params, spec, x, y, vals))
        return EXIT_OK
    grid = quadrature_grid(lam, c["radius"], c["nodes"])
    zg = spectral_grid(lam, c["z_max"], c["nodes"])
    f = _test_function(c, grid)
    if c["transform"]:
        out = transform_plus(f, c["eta"], zg)
        doc = result_document(out, None, transform="plus", eta=list(c["eta"]))
        return _finish_eval(c, doc, f, out)
    op = c["op"]
    eta = c["eta"]
    if op in ("heat", "poisson"):
        vals = semigroup_apply(f, eta, c["t"], semigroup=op, z_grid=zg)[0]
        out = f.with_values(vals, operator={"family": op, "t": c["t"], "eta": list(eta)})
        spec = None
    elif op == "maximal":
        vals, meta = maximal_heat(f, eta, semigroup=c["semigroup"])
        out = f.with_values(vals, operator={"family": "maximal", "semigroup": c["semigroup"]}, **meta)
        spec = None
    elif op == "g":
        spec = OperatorSpec("g_function", c["semigroup"], c["K"], c["M"], eta)
        out = g_function(f, spec, z_grid=zg)
    elif op == "lusin":
        spec = OperatorSpec("lusin_area", c["semigroup"], c["K"], c["M"], eta)
        cone = ConeSpec("parabolic" if c["semigroup"] == "heat" else "straight", c["beta"])
        out = lusin_area(f, spec, cone, z_grid=zg)
    elif op == "riesz":
        spec = OperatorSpec("riesz", K=0, M=c["M"], eta=eta)
        out = riesz_transform(f, spec, z_grid=zg)
    elif op == "laplace":
        spec = OperatorSpec("laplace_mult", c["semigroup"], eta=eta, payload=Multiplier.imaginary_power(c["sigma"]))
        out = multiplier_apply(f, spec, zg)
    else:
        rng = np.random.default_rng(c["seed"])
        atoms = list(zip(np.logspace(-6, 6, 64), np.exp(2j * np.pi * rng.uniform(size=64)) / 64))
        spec = OperatorSpec("stieltjes_mult", c["semigroup"], eta=eta, payload=Multiplier.laplace_stieltjes(atoms))
        out = multiplier_apply(f, spec, zg)
    return _finish_eval(c, result_document(out, spec), f, out)


def _finish_eval(c, doc, f, out):
    summary = {"norm_input": f.norm(), "norm_output": out.norm(), "ratio": out.norm() / f.norm()}
    if c.get("out"):
        write_atomic(c["out"], doc)
        sys.stdout.write(json.dumps(summary) + "\n")
    else:
        sys.stdout.write(doc)
    return EXIT_OK


# ----------------------------------------------------------------------------
# verify


def run_verify(c) -> list:
    lam = c["lam"]
    seed = c["seed"]
    count = c["count"]
    suites = ["identities", "growth", "smoothness", "lemmas"] if c["suite"] == "all" else [c["suite"]]
    kinds = list(vf.KERNELS) if c["kernel"] == "all" else [c["kernel"]]
    reports = []
    for suite in suites:
        if suite == "identities":
            cfg = vf.IdentityConfig(
                lam=lam, seed=seed, constant_factor=c["corrupt_constant"], mass_scale=c["omega_mass_scale"]
            )
            reports += vf.identity_suite(cfg)
        elif suite == "lemmas":
            names = vf.LEMMAS if c["lemma"] == "all" else [c["lemma"]]
            for name in names:
                reports.append(vf.lemma_suite(name, lam, count, seed, c["perturb"], c["gamma"]))
        elif suite == "equivalence":
            reports.append(vf.lusin_g_equivalence((lam,), seed=seed))
        else:
            for kind in kinds:
                k = vf.make_kernel(kind, lam, c["eta"], gamma=c["gamma"], beta=c["beta"], seed=seed)
                kw = {"seed": seed} if count is None else {"seed": seed, "count": count}
                if suite == "growth":
                    reports.append(vf.growth_check(k, **kw))
                elif suite == "gradient":
                    reports.append(vf.gradient_check(k, **kw))
                else:
                    dirs = ["x_arg", "y_arg"] if c["direction"] == "both" else [c["direction"]]
                    for d in dirs:
                        reports.append(vf.smoothness_check(k, d, **kw))
    return vf.merge_reports(reports)


def samples_csv(reports) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["check", "seed", "index", "x", "y", "moved", "ratio"])
    for r in reports:
        s = r.samples
        if not s:
            continue
        for i, ratio in enumerate(s["ratio"]):
            moved = " ".join(_fmt(v) for v in s["moved"][i]) if "moved" in s else ""
            wr.writerow([
                r.check_name,
                r.seed,
                i,
                " ".join(_fmt(v) for v in s["x"][i]),
                " ".join(_fmt(v) for v in s["y"][i]),
                moved,
                _fmt(ratio),
            ])
    return buf.getvalue()


def cmd_verify(c) -> int:
    reports = run_verify(c)
    text = json.dumps([r.to_dict() for r in reports], indent=1) + "\n"
    _emit(c, text)
    if c["dump_samples"]:
        write_atomic(c["dump_samples"], samples_csv(reports))
    failed = [r for r in reports if not r.passed]
    if failed:
        sys.stderr.write(json.dumps({"failed": [r.to_dict() for r in failed]}) + "\n")
        return EXIT_FAIL
    return EXIT_OK


# ----------------------------------------------------------------------------
# report


REPORT_COLUMNS = ["check", "lambda", "n", "seed", "fitted_constant", "worst_ratio", "pass"]


def cmd_report(c) -> int:
    inputs = c["inputs"]
    if not inputs:
        raise ConfigError("no report files given")
    latest = {}
    for path in inputs:
        try:
            mtime = os.path.getmtime(path)
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report: {exc}", path=path) from None
        for d in data if isinstance(data, list) else [data]:
            r = vf.VerificationReport.from_dict(d)
            key = (r.check_name, tuple(r.lam), r.n, r.seed)
            if key in latest:
                warnings.warn(f"duplicate report {r.check_name!r}; keeping the newest", stacklevel=1)
                if latest[key][0] > mtime:
                    continue
            latest[key] = (mtime, r)
    if not latest:
        raise ConfigError("report files contain no reports", inputs=inputs)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(REPORT_COLUMNS)
    for key in sorted(latest):
        r = latest[key][1]
        wr.writerow([
            r.check_name,
            " ".join(_fmt(float(v)) for v in r.lam),
            r.n,
            r.seed,
            _fmt(float(r.fitted_constant)),
            _fmt(float(r.worst_ratio)),
            int(bool(r.passed)),
        ])
    _emit(c, buf.getvalue())
    return EXIT_OK


# ----------------------------------------------------------------------------


def _error(code, message, **context) -> str:
    return json.dumps({"code": code, "message": message, "context": vf._plain(context)})


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            warnings.showwarning = lambda msg, *a, **k: sys.stderr.write(f"warning: {msg}\n")
            c = resolve(argv)
            return {"eval": cmd_eval, "verify": cmd_verify, "report": cmd_report}[c["command"]](c)
    except ConfigError as exc:
        sys.stderr.write(_error("config", str(exc), **exc.context) + "\n")
        return EXIT_USAGE
    except DomainError as exc:
        sys.stderr.write(_error("domain", str(exc), argv=argv) + "\n")
        return EXIT_USAGE
    except (vf.QuadratureFailure, vf.SampleGeneratorError) as exc:
        sys.stderr.write(_error("numerical", str(exc), argv=argv) + "\n")
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
