import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jumplab.errors import CFLError
from jumplab.fields import (ABSORBING, CLAMPED, CubicSampler, GridField, SpatialGrid,
                            check_time_step, cubic_at, local_cubic, stable_time_step)
from jumplab.fields.initial import gaussian_density, mollified_delta, mollifier_variance
from jumplab.report import VerificationReport, fit_order
from jumplab.sde_core import make_model


@pytest.mark.parametrize("lo, hi, points", [
    ((0.0,), (-1.0,), 16),
    ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), 16),
    ((0.0,), (1.0,), 4),
])
def test_bad_grids(lo, hi, points):
    with pytest.raises(ValueError):
        SpatialGrid(lo, hi, points)


@settings(max_examples=50, deadline=None)
@given(lo=st.floats(-10, 0), width=st.floats(0.5, 20), points=st.integers(8, 200))
def test_trapezoid_is_exact_for_linear_functions(lo, width, points):
    g = SpatialGrid.line(lo, lo + width, points)
    x = g.x[..., 0]
    hi = lo + width
    assert g.integrate(2 * x + 1) == pytest.approx(hi ** 2 - lo ** 2 + width, rel=1e-10, abs=1e-10)


def test_two_dimensional_grid_shapes():
    g = SpatialGrid((-1.0, -2.0), (1.0, 2.0), 16)
    assert g.n == 2 and g.shape == (16, 16) and g.x.shape == (16, 16, 2)
    assert g.integrate(np.ones(g.shape)) == pytest.approx(8.0)


@pytest.mark.parametrize("n", [1, 2])
def test_gaussian_density_has_unit_mass(n):
    g = SpatialGrid((-4.0,) * n, (4.0,) * n, 64)
    p = gaussian_density(g, [0.3] * n, 0.2)
    assert abs(float(g.integrate(p)) - 1.0) <= 1e-10
    assert np.all(p >= 0)


def test_mollified_delta_width():
    g = SpatialGrid.line(-4.0, 4.0, 129)
    p = mollified_delta(g, 1.0)
    x = g.x[..., 0]
    var = float(g.integrate((x - 1.0) ** 2 * p))
    np.testing.assert_allclose(var, 4 * g.dx[0] ** 2, rtol=1e-3)
    np.testing.assert_allclose(mollifier_variance(g), 4 * g.dx ** 2)


def test_cubic_reproduces_cubics():
    g = SpatialGrid.line(-2.0, 2.0, 41)
    x = g.x[..., 0]
    f = x ** 3 - x
    pts = np.linspace(-1.0, 1.0, 17)[:, None]
    val, grad, hess, _ = local_cubic(np.broadcast_to(f, (17, 41)), g, pts)
    p = pts[:, 0]
    np.testing.assert_allclose(val, p ** 3 - p, atol=1e-12)
    np.testing.assert_allclose(grad[:, 0], 3 * p ** 2 - 1, atol=1e-10)
    np.testing.assert_allclose(hess[:, 0, 0], 6 * p, atol=1e-8)


def test_cubic_at_absorbs_and_clamps():
    g = SpatialGrid.line(0.0, 1.0, 16)
    v = np.ones(16)
    outside = np.array([[-0.5], [1.5]])
    np.testing.assert_allclose(cubic_at(v, g, outside, ABSORBING), 0.0)
    np.testing.assert_allclose(cubic_at(v, g, outside, CLAMPED), 1.0)


def test_sampler_matches_direct_interpolation():
    g = SpatialGrid.line(-3.0, 3.0, 64)
    pts = np.random.default_rng(0).uniform(-3.5, 3.5, (20, 1))
    vals = np.stack([np.sin(g.x[..., 0]), np.cos(g.x[..., 0])])
    s = CubicSampler(g, pts)
    np.testing.assert_allclose(s(vals), [cubic_at(v, g, pts) for v in vals], atol=1e-12)


def test_cfl_bound_formula():
    g = SpatialGrid.line(-8.0, 8.0, 512)
    m = make_model("additive", a=2.0, b=0.5, marks=((1.0, 4.0),))
    h = g.dx[0]
    expected = min(h * h / (2 * 0.25), h / (2 * 2.0), 0.1 / 4.0)
    assert stable_time_step(m, g) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(CFLError) as info:
        check_time_step(2 * expected, m, g)
    assert info.value.required_dt == pytest.approx(expected)


def test_static_model_has_no_bound():
    g = SpatialGrid.line(-1.0, 1.0, 16)
    assert math.isinf(stable_time_step(make_model("additive", a=0.0, b=0.0, marks=None), g))


def test_grid_field_snapshots(tmp_path):
    g = SpatialGrid.line(0.0, 1.0, 8)
    f = GridField(g, np.array([0.0, 0.5, 1.0]), np.stack([np.zeros(8), np.ones(8), 2 * np.ones(8)]))
    assert f.snapshot_index(0.5) == 1
    np.testing.assert_allclose(f.mass(), [0.0, 1.0, 2.0])
    f.to_csv(tmp_path / "f.csv", every=2)
    head = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert head == "x_1,t=0,t=1"


# -- reports ----------------------------------------------------------------------


@pytest.mark.parametrize("op, value, passed", [
    ("<=", 1.0, True), ("<", 1.0, False), (">=", 1.0, True), (">", 1.0, False),
    ("<=", float("nan"), False),
])
def test_check_operators(op, value, passed):
    rep = VerificationReport("r")
    rep.check("c", value, 1.0, op)
    assert rep.passed is passed


def test_unknown_operator_is_rejected():
    with pytest.raises(ValueError):
        VerificationReport("r").check("c", 1.0, 1.0, "==")


def test_merge_prefixes_names():
    a, b = VerificationReport("a"), VerificationReport("b")
    b.metrics["m"] = 1.0
    b.check("m", 2.0, 1.0)
    a.merge(b, "sub")
    assert "sub.m" in a.metrics
    assert [c.name for c in a.failing()] == ["sub.m"]


def test_report_text_is_deterministic():
    def build():
        r = VerificationReport("r", config={"x": [1, 2]})
        r.metrics["value"] = 0.125
        r.check("value", 0.125, 1.0)
        return r.to_text()
    assert build() == build()


@pytest.mark.parametrize("order", [0.5, 1.0, 2.0])
def test_fit_order_recovers_power_laws(order):
    h = np.array([0.1, 0.05, 0.025])
    assert fit_order(h, 3.0 * h ** order) == pytest.approx(order)
