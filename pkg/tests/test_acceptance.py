"""Acceptance suite P1 to P10.

Each criterion runs the relevant experiment groups at their default settings and
checks every residual against the stated tolerance together with the runtime limit.
One PASS/FAIL line per criterion is printed to the terminal.  Run it on its own with
``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
"""

import sys
import time

import pytest

from hierakit.config import load_config
from hierakit.suites import run_command


def _evaluate(label, command, groups, limit_seconds, overrides=None):
    cfg = load_config(command, overrides or {}, suite=groups)
    start = time.perf_counter()
    report = run_command(cfg).report
    elapsed = time.perf_counter() - start
    in_time = elapsed < limit_seconds
    passed = report.passed and in_time and len(report.checks) > 0
    worst = ", ".join(c.line() for c in report.failures) or f"{len(report.checks)} checks"
    line = f"{'PASS' if passed else 'FAIL'}  {label}: {worst}; {elapsed:.2f} s (limit {limit_seconds} s)"
    return passed, line, report


@pytest.fixture
def emit(capsys):
    def _emit(line):
        with capsys.disabled():
            print(f"\n{line}")

    return _emit


CRITERIA = [
    ("P1 Lie-algebra antisymmetry and Jacobi, N<=6 and N=inf", "verify-algebra", ["antisymmetry", "jacobi"], 30, None),
    (
        "P2 homomorphism onto N times the operator commutator, N<=3, n=2",
        "verify-algebra",
        ["homomorphism"],
        10,
        {"model": {"n": 2, "N": [2, 3]}},
    ),
    ("P3 bracket convergence slope over N=8..64", "converge-bracket", ["convergence"], 10, None),
    ("P4 BBGKY vector field and worked coefficients", "flow-equivalence", ["coefficients", "bbgky"], 60, None),
    ("P5 GP vector field, K=3", "flow-equivalence", ["gp"], 60, None),
    (
        "P6 density-matrix, reduced-density and factorization maps are Poisson",
        "morphism",
        ["density-matrix", "reduced-density", "factorization"],
        120,
        None,
    ),
    ("P7 pullback of H_GP equals H_NLS, n=64", "morphism", ["pullback"], 5, None),
    ("P8 commuting diagram and RK4 order", "commuting-diagram", ["diagram", "order"], 300, None),
    ("P9 NLS mass, energy drift order and GP residual order", "nls-gp", ["mass", "energy", "gp-residual"], 120, None),
    ("P10 gradients against central differences", "verify-algebra", ["gradient"], 60, None),
]


@pytest.mark.parametrize("label,command,groups,limit,overrides", CRITERIA, ids=[c[0].split()[0] for c in CRITERIA])
def test_criterion(label, command, groups, limit, overrides, emit):
    passed, line, report = _evaluate(label, command, groups, limit, overrides)
    emit(line)
    assert passed, "\n".join(c.line() for c in report.checks)


def test_p3_instance_has_nonvanishing_two_particle_term():
    report = run_command(load_config("converge-bracket")).report
    assert [c.name for c in report.checks] == ["bracket convergence slope"]


def test_p4_pins_stated_sizes():
    cfg = load_config("flow-equivalence")
    assert cfg.model.N == (2, 3) and cfg.model.n == (4, 6) and cfg.instances == 10


def test_p8_pins_stated_sizes():
    cfg = load_config("commuting-diagram")
    assert (cfg.flow.dt, cfg.flow.T, cfg.model.N, cfg.model.n) == (1e-3, 0.5, (3,), (4,))


if __name__ == "__main__":
    ok = True
    for label, command, groups, limit, overrides in CRITERIA:
        passed, line, _ = _evaluate(label, command, groups, limit, overrides)
        print(line, flush=True)
        ok &= passed
    sys.exit(0 if ok else 1)
