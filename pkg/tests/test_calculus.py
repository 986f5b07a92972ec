import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jumplab.calculus import (CandidateIntegral, FieldDifferential, evolve_field,
                              first_integral_coeffs_xdep, first_integral_coeffs_xindep,
                              identity_candidate, ito_wentzell_residual, ito_wentzell_study,
                              registry_candidate, verify_first_integral)
from jumplab.errors import DivergenceError, WrongVariantError
from jumplab.fields import GridField, SpatialGrid
from jumplab.sde_core import TimeGrid, make_model, sample_noise, simulate_path


def square_candidate():
    return CandidateIntegral(lambda t, x: x[..., 0] ** 2,
                             time_derivative=lambda t, x: np.zeros(np.shape(x)[:-1]),
                             gradient=lambda t, x: 2.0 * x,
                             hessian=lambda t, x: np.full(np.shape(x) + (1,), 2.0),
                             name="x^2", autonomous=True)


def log_candidate():
    return CandidateIntegral(lambda t, x: np.log(np.abs(x[..., 0])),
                             gradient=lambda t, x: 1.0 / x,
                             hessian=lambda t, x: (-1.0 / x ** 2)[..., None],
                             name="log|x|", autonomous=True)


PROBES = np.linspace(-2.0, 2.0, 9)[:, None]


# -- coefficient builders ------------------------------------------------------


def test_identity_on_constant_coefficients():
    m = make_model("additive", a=0.4, b=0.7, marks=((1.3, 1.0),))
    d = first_integral_coeffs_xindep(identity_candidate(), m)
    np.testing.assert_allclose(d.Q(0.0, PROBES), -0.4)
    np.testing.assert_allclose(d.D(0.0, PROBES)[..., 0], -0.7)
    np.testing.assert_allclose(d.G(0.0, PROBES, m.marks.marks[0]), -1.3, atol=1e-15)


def test_square_under_unit_noise():
    sigma = 0.8
    m = make_model("additive", a=0.0, b=sigma, marks=None)
    d = first_integral_coeffs_xindep(square_candidate(), m)
    np.testing.assert_allclose(d.Q(0.0, PROBES), sigma ** 2, rtol=1e-14)
    np.testing.assert_allclose(d.D(0.0, PROBES)[..., 0], -2 * sigma * PROBES[:, 0])


def test_xindep_rejects_state_dependent_jumps():
    with pytest.raises(WrongVariantError):
        first_integral_coeffs_xindep(identity_candidate(), make_model("geometric"))


@pytest.mark.parametrize("key", ["additive", "ou_jump", "pure_jump"])
def test_builders_agree_for_state_free_jumps(key):
    m = make_model(key)
    u = square_candidate()
    a = first_integral_coeffs_xindep(u, m)
    b = first_integral_coeffs_xdep(u, m)
    x = np.random.default_rng(0).uniform(-3, 3, (1000, 1))
    for mark in m.marks.marks:
        assert np.max(np.abs(a.G(0.3, x, mark) - b.G(0.3, x, mark))) <= 1e-12


@pytest.mark.parametrize("c", [0.5, -0.3, 2.0])
def test_xdep_linear_jump(c):
    m = make_model("geometric", marks=((c, 1.0),))
    d = first_integral_coeffs_xdep(identity_candidate(), m)
    np.testing.assert_allclose(d.G(0.0, PROBES, m.marks.marks[0]),
                               PROBES[:, 0] / (1 + c) - PROBES[:, 0], atol=1e-12)


def test_xdep_log_jump():
    m = make_model("geometric", marks=((0.5, 1.0),))
    d = first_integral_coeffs_xdep(log_candidate(), m)
    x = np.array([[0.3], [1.0], [2.5], [-1.7]])
    np.testing.assert_allclose(d.G(0.0, x, m.marks.marks[0]), -math.log(1.5), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(theta=st.floats(0.1, 3.0), sigma=st.floats(0.0, 2.0), x=st.floats(-4, 4))
def test_identity_drift_on_ou(theta, sigma, x):
    m = make_model("ou_jump", theta=theta, sigma=sigma)
    d = first_integral_coeffs_xindep(identity_candidate(), m)
    assert d.Q(0.0, np.array([[x]]))[0] == pytest.approx(theta * x, abs=1e-12)
    assert d.D(0.0, np.array([[x]]))[0, 0] == pytest.approx(-sigma, abs=1e-15)


# -- evolve_field ----------------------------------------------------------------


def _field(func=lambda x: np.sin(x[..., 0])):
    return GridField.from_function(SpatialGrid.line(-2.0, 2.0, 33), func)


def test_zero_differential_keeps_field():
    m = make_model("ou_jump")
    f = _field()
    out = evolve_field(f, FieldDifferential.constant(0.0, 0.0), sample_noise(m, TimeGrid.uniform(0, 1, 50), 1))
    assert np.all(out.values == f.final)


def test_unit_drift_adds_one():
    m = make_model("additive", marks=None)
    f = _field(lambda x: np.zeros(x.shape[:-1]))
    out = evolve_field(f, FieldDifferential.constant(1.0, 0.0),
                       sample_noise(m, TimeGrid.uniform(0, 1, 64), 0))
    assert np.all(out.final == 1.0)


def test_unit_noise_is_wiener_prefix_sum():
    m = make_model("additive", a=0.0, b=1.0, marks=None)
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 100), 2)
    f = _field()
    out = evolve_field(f, FieldDifferential.constant(0.0, 1.0), nz)
    w = np.concatenate([[0.0], np.cumsum(nz.dw[0])])
    np.testing.assert_allclose(out.values - f.final, np.broadcast_to(w[:, None], out.values.shape),
                               atol=1e-13)


def test_autonomous_path_matches_stepwise_update():
    m = make_model("ou_jump")
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 80), 4)
    d = first_integral_coeffs_xindep(square_candidate(), m)
    stepwise = FieldDifferential(d.Q, d.D, d.G, d.m, variant="stepwise", autonomous=False)
    f = _field()
    a, b = evolve_field(f, d, nz), evolve_field(f, stepwise, nz)
    np.testing.assert_allclose(a.values, b.values, atol=1e-12)
    assert sorted(a.left_limits) == sorted(b.left_limits)


def test_evolve_reports_divergence():
    m = make_model("additive", marks=None)
    bad = FieldDifferential.constant(np.inf, 0.0)
    with pytest.raises(DivergenceError):
        evolve_field(_field(), bad, sample_noise(m, TimeGrid.uniform(0, 1, 10), 0))


# -- Ito-Wentzell ----------------------------------------------------------------


@pytest.mark.parametrize("seed", range(3))
def test_iw_identity_field_has_zero_residual(seed):
    m = make_model("ou_jump")
    zero = FieldDifferential.constant(0.0, 0.0)
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 200), seed)
    tr = simulate_path(m, [0.2], nz)
    f = GridField.from_function(SpatialGrid.line(-8.0, 8.0, 64), lambda x: x[..., 0])
    r = ito_wentzell_residual(zero, evolve_field(f, zero, nz), m, tr, nz)
    assert r.metrics["max_residual_cont"] <= 1e-12
    assert r.metrics["max_residual_jump"] <= 1e-12
    assert r.tables["residuals"][0] == ["seed", "t", "residual_cont", "residual_jump"]


def test_iw_unit_drift_on_static_model():
    m = make_model("additive", a=0.0, b=0.0, marks=None)
    d = FieldDifferential.constant(1.0, 0.0)
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 100), 0)
    tr = simulate_path(m, [0.1], nz)
    f = GridField.from_function(SpatialGrid.line(-2.0, 2.0, 33), lambda x: np.cos(x[..., 0]))
    r = ito_wentzell_residual(d, evolve_field(f, d, nz), m, tr, nz, table=False)
    assert r.metrics["max_residual_cont"] <= 1e-12


def test_iw_zero_case_has_first_order_total():
    m = make_model("ou_jump", sigma=0.0, marks=None)
    d = first_integral_coeffs_xindep(identity_candidate(), m)
    f0 = GridField.from_function(SpatialGrid.line(-4.0, 4.0, 81), lambda x: x[..., 0])
    rep = ito_wentzell_study(m, d, f0, [1.0], range(2), TimeGrid.uniform(0, 1, 50), levels=2)
    assert rep.metrics["order_total"] >= 0.9


def test_iw_reports_excluded_steps():
    m = make_model("additive", a=5.0, b=0.0, marks=None)
    zero = FieldDifferential.constant(0.0, 0.0)
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 50), 0)
    tr = simulate_path(m, [0.0], nz)
    f = GridField.from_function(SpatialGrid.line(-1.0, 1.0, 21), lambda x: x[..., 0])
    r = ito_wentzell_residual(zero, evolve_field(f, zero, nz), m, tr, nz, table=False)
    assert r.metrics["excluded_steps"] > 0
    assert r.warnings


# -- first integrals along paths --------------------------------------------------


@pytest.mark.parametrize("key", ["additive", "pure_jump"])
def test_exact_integrals_are_conserved(key):
    m = make_model(key)
    rep = verify_first_integral(registry_candidate(m), m, range(10),
                                TimeGrid.uniform(0, 1, 200), [0.3], tol=1e-10)
    assert rep.passed
    if key == "pure_jump":
        # exact up to the rounding of two differently ordered sums
        assert rep.metrics["max_drift"] <= 1e-14


def test_rotation_invariant_small_horizon():
    m = make_model("rotation2d")
    rep = verify_first_integral(registry_candidate(m), m, [0], TimeGrid.uniform(0, 0.01, 100),
                                [1.0, 0.5], refinements=2)
    assert rep.metrics["finest_max_drift"] <= 1e-6
    assert rep.metrics["order"] == pytest.approx(1.0, abs=0.05)


def test_rotation_candidate_requires_deterministic_model():
    with pytest.raises(ValueError):
        registry_candidate(make_model("rotation2d", noise=0.3))


def test_non_integral_is_detected():
    m = make_model("geometric")
    grid = TimeGrid.uniform(0, 1, 100)
    good = verify_first_integral(registry_candidate(m), m, range(10), grid, [1.0])
    bad = verify_first_integral(identity_candidate(), m, range(10), grid, [1.0])
    assert bad.metrics["max_drift"] > 10 * good.metrics["max_drift"]


def test_verification_is_thread_independent():
    m = make_model("ou_jump")
    args = (registry_candidate(m), m, range(8), TimeGrid.uniform(0, 1, 50), [0.3])
    a = verify_first_integral(*args, refinements=1, threads=1)
    b = verify_first_integral(*args, refinements=1, threads=4)
    assert a.metrics == b.metrics
