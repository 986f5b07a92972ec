"""Acceptance criteria: one test per criterion, one PASS/FAIL line each.

Tolerances and runtime limits are pinned here, independently of the suite
module, so a loosened check in the suite fails the pin before it can pass.
"""

import math

import pytest

from jumplab.suite import CRITERIA, REFERENCE_GRID, run_criterion

# criterion -> {check name: (tolerance, op)}
PINNED = {
    1: {"pure_jump.max_drift": (1e-10, "<="), "additive.max_drift": (1e-10, "<=")},
    2: {"geometric.order": (0.45, ">=")},
    3: {"ratio": (10.0, ">")},
    4: {"identity_step_residual": (1e-12, "<="), "unit_noise.order_total": (0.45, ">=")},
    5: {"max_relative_gap": (1e-8, "<="), "min_J": (0.0, ">"),
        "linear_flow_J1_error": (1e-3, "<="), "single_jump_J_error": (0.0, "<=")},
    6: {"mass_gap": (1e-2, "<="), "linear_flow.max_residual": (1e-2, "<="),
        "pull_back_error": (1e-8, "<=")},
    7: {"l1": (3.0 / math.sqrt(200), "<=")},
    8: {"heat_l1": (1e-2, "<="), "ou_mean_error": (1e-2, "<="),
        "ou_variance_error": (1e-2, "<="), "poisson_peak_error": (1e-2, "<=")},
    9: {"l1": (5e-2, "<=")},
    10: {"constant_error": (1e-6, "<="), "poisson_mixture_error": (1e-2, "<="),
         "gaussian_error": (1e-2, "<="), "duality_x.max_deviation": (5e-2, "<="),
         "duality_cos.max_deviation": (5e-2, "<=")},
    11: {"l1_gap": (5e-2, "<=")},
    12: {"l1": (1e-2, "<=")},
}
TIME_LIMITS = {1: 10.0, 2: 60.0, 4: 30.0, 7: 300.0, 9: 120.0}


def test_suite_limits_match_pins():
    assert {c.number for c in CRITERIA} == set(PINNED)
    assert {c.number: c.time_limit for c in CRITERIA if c.time_limit} == TIME_LIMITS
    assert REFERENCE_GRID[2] == 512


@pytest.mark.parametrize("number", sorted(PINNED), ids=lambda n: f"criterion_{n:02d}")
def test_criterion(number, acceptance_log):
    res = run_criterion(number, threads=4)
    acceptance_log.append(res.line())
    print(res.line())
    checks = {c.name: c for c in res.report.checks}
    for name, (tol, op) in PINNED[number].items():
        assert name in checks, f"missing check {name}"
        assert checks[name].tolerance == pytest.approx(tol, rel=1e-12, abs=0.0)
        assert checks[name].op == op
    in_time, passed = res.in_time, res.report.passed
    assert in_time, f"{res.elapsed:.1f} s over the {res.criterion.time_limit} s limit"
    assert passed, "; ".join(c.line() for c in res.report.failing())
