"""Acceptance criteria 1 to 13, one test each.

Each test records a single pass/fail line; the lines are repeated in the
terminal summary. Run as a script for the same output.
"""
import time

import numpy as np
import pytest

from dunklkit.verify import (
    IdentityConfig,
    check_bhk,
    check_classical,
    check_eigenfunction,
    check_g_constants,
    check_intertwining,
    check_plancherel,
    check_riesz_contraction,
    check_semigroup_and_mass,
    check_subordination,
    growth_check,
    lemma_suite,
    lusin_g_equivalence,
    make_kernel,
    smoothness_check,
)

LAMS = ((-0.3,), (0.0,), (1.7,), (-0.3, 0.5))
KERNEL_LAMS = ((-0.3,), (0.2,), (1.7,))
SPOT_LAM = (0.2, 0.5)
# per-kernel sample counts keep the whole criterion under five minutes
KERNEL_COUNTS = {"poisson_lusin": 1000}
DEFAULT_COUNT = 1500
SPOT_COUNTS = {"lusin": 300}
SPOT_DEFAULT = 1000


def worst(reports):
    return max(r.fitted_constant for r in reports)


def test_criterion_01_plancherel(record_criterion):
    reps = [check_plancherel(IdentityConfig(lam, functions=20))[0] for lam in LAMS]
    record_criterion(1, all(r.passed for r in reps), worst(reps), 1e-6)
    assert all(r.passed for r in reps)


def test_criterion_02_inversion(record_criterion):
    reps = [check_plancherel(IdentityConfig(lam, functions=20))[1] for lam in LAMS]
    record_criterion(2, all(r.passed for r in reps), worst(reps), 1e-6)
    assert all(r.passed for r in reps)


def test_criterion_03_eigenfunction(record_criterion):
    reps = [check_eigenfunction(IdentityConfig(lam, samples=1000)) for lam in LAMS]
    record_criterion(3, all(r.passed for r in reps), worst(reps), 1e-6)
    assert all(r.passed for r in reps)


def test_criterion_04_classical(record_criterion):
    heat, pois = check_classical(IdentityConfig((0.0,)))
    ok = heat.passed and pois.passed
    record_criterion(4, ok, heat.fitted_constant, 1e-12, f"poisson={pois.fitted_constant:.3g} tol=1e-08")
    assert ok


def test_criterion_05_bhk(record_criterion):
    reps = [check_bhk(IdentityConfig(lam, samples=1000, omega_order=64)) for lam in LAMS]
    record_criterion(5, all(r.passed for r in reps), worst(reps), 1e-8)
    assert all(r.passed for r in reps)


def test_criterion_06_semigroup_mass(record_criterion):
    reps = [check_semigroup_and_mass(IdentityConfig(lam)) for lam in LAMS]
    law = [r[0] for r in reps]
    mass = [r[1] for r in reps]
    ok = all(r.passed for r in law + mass)
    record_criterion(6, ok, worst(law), 1e-5, f"mass={worst(mass):.3g} tol=1e-06")
    assert ok


def test_criterion_07_intertwining(record_criterion):
    r = check_intertwining(IdentityConfig((0.0,)), draws=10)
    record_criterion(7, r.passed, r.fitted_constant, 1e-6)
    assert r.passed


def test_criterion_08_g_constants(record_criterion):
    g = [check_g_constants(IdentityConfig(lam)) for lam in KERNEL_LAMS]
    riesz = [check_riesz_contraction(IdentityConfig(lam, functions=10)) for lam in KERNEL_LAMS]
    ok = all(r.passed for r in g + riesz)
    record_criterion(8, ok, worst(g), 1e-3, f"riesz excess={worst(riesz):.3g} tol=1e-03")
    assert ok


def test_criterion_09_subordination(record_criterion):
    reps = [check_subordination(IdentityConfig(lam)) for lam in LAMS]
    record_criterion(9, all(r.passed for r in reps), worst(reps), 1e-4)
    assert all(r.passed for r in reps)


def test_criterion_10_exact_inequalities(record_criterion):
    reps = [lemma_suite(name, lam, count=100_000) for name in ("theta", "qz", "xiineq") for lam in LAMS]
    violations = sum(r.details["violations"] for r in reps)
    ok = all(r.passed for r in reps) and violations == 0
    record_criterion(10, ok, max(r.worst_ratio for r in reps), 1 + 1e-12, f"violations={violations}")
    assert ok


def _kernel_reports(lam, counts, default, kinds):
    out = []
    for kind in kinds:
        k = make_kernel(kind, lam)
        count = counts.get(kind, default)
        out.append(growth_check(k, count=count))
        for direction in ("x_arg", "y_arg"):
            out.append(smoothness_check(k, direction, count=count))
    return out


def test_criterion_11_standard_estimates(record_criterion):
    t0 = time.perf_counter()
    kinds = ("maximal", "g", "laplace", "stieltjes", "riesz", "lusin", "poisson_lusin")
    reps = []
    for lam in KERNEL_LAMS:
        reps += _kernel_reports(lam, KERNEL_COUNTS, DEFAULT_COUNT, kinds)
    reps += _kernel_reports(SPOT_LAM, SPOT_COUNTS, SPOT_DEFAULT, ("maximal", "g", "riesz", "lusin"))
    ok = all(r.passed for r in reps)
    failed = [f"{r.check_name}@{r.lam}" for r in reps if not r.passed]
    note = f"checks={len(reps)} seconds={time.perf_counter() - t0:.0f}"
    if failed:
        note += " failed=" + ",".join(failed)
    record_criterion(11, ok, max(r.worst_ratio for r in reps), 8.0, note)
    assert ok, failed


def test_criterion_12_lusin_g_bracket(record_criterion):
    r = lusin_g_equivalence(betas=(0.5, 1.0, 2.0))
    lo, hi = r.details["bracket"]
    record_criterion(12, r.passed, r.fitted_constant, 4.0, f"bracket=[{lo:.3f}, {hi:.3f}]")
    assert r.passed


def test_criterion_13_negative_controls(record_criterion):
    bhk = check_bhk(IdentityConfig((0.2,), samples=1000, constant_factor=1.1))
    plan = check_plancherel(IdentityConfig((0.2,), functions=20, mass_scale=1.1))[0]
    ok = not bhk.passed and not plan.passed
    record_criterion(13, ok, min(bhk.worst_ratio, plan.worst_ratio), 1.0,
                     f"bhk err={bhk.fitted_constant:.3g} plancherel err={plan.fitted_constant:.3g}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
