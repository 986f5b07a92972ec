import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm, poisson

from jumplab.errors import CFLError
from jumplab.fields import SpatialGrid
from jumplab.fields.initial import gaussian_density, mollified_delta
from jumplab.kolmogorov import (bin_masses, chapman_consistency, compensate_drift,
                                drift_compensation_check, duality, monte_carlo_density,
                                solve_backward, solve_forward)
from jumplab.sde_core import make_model

GRID = SpatialGrid.line(-8.0, 8.0, 512)
X = GRID.x[..., 0]
HEAT = make_model("additive", a=0.0, b=math.sqrt(2.0), marks=None)
STATIC = make_model("additive", a=0.0, b=0.0, marks=None)


# -- drift compensation --------------------------------------------------------------


def test_compensation_without_jumps_is_identity():
    m = make_model("ou_jump", marks=None)
    assert compensate_drift(m) is m


def test_compensation_constant_atom():
    m = make_model("additive", a=5.0, b=0.0, marks=((2.0, 1.0),))
    c = compensate_drift(m)
    np.testing.assert_allclose(c.a(0.0, np.array([[0.0], [3.0]])), 3.0)
    assert c.marks is m.marks


def test_compensation_two_linear_atoms():
    m = make_model("geometric", alpha=0.4, sigma=0.2, marks=((0.1, 1.0), (-0.2, 2.0)))
    c = compensate_drift(m)
    x = np.linspace(-2, 2, 7)[:, None]
    np.testing.assert_allclose(c.a(0.0, x), m.a(0.0, x) + 0.3 * x, atol=1e-14)
    np.testing.assert_array_equal(c.b(0.0, x), m.b(0.0, x))


def test_centered_measure_matches_compensated_drift():
    m = make_model("ou_jump")
    rep = drift_compensation_check(m, GRID, gaussian_density(GRID, 0.5, 0.09), 0.25)
    assert rep.passed


# -- forward ----------------------------------------------------------------------


def test_heat_kernel():
    F = solve_forward(HEAT, GRID, gaussian_density(GRID, 0.0, 0.01), 0.25, store="ends")
    exact = norm.pdf(X, scale=math.sqrt(0.51))
    assert float(GRID.integrate(np.abs(F.final - exact))) <= 1e-2


def test_poisson_peaks():
    g = SpatialGrid.line(-4.0, 12.0, 512)
    x = g.x[..., 0]
    m = make_model("pure_jump", marks=((1.0, 1.0),))
    F = solve_forward(m, g, mollified_delta(g, 0.0), 1.0, dt=1e-2, store="ends")
    for k in range(6):
        mass = float(g.integrate(F.final * (np.abs(x - k) < 0.5)))
        assert abs(mass - poisson.pmf(k, 1.0)) <= 1e-2


@pytest.mark.parametrize("key", ["ou_jump", "geometric", "additive", "pure_jump"])
def test_forward_conserves_mass(key):
    F = solve_forward(make_model(key), GRID, gaussian_density(GRID, 0.5, 0.09), 0.5, store=10)
    gap = np.abs(F.mass() - 1.0)
    assert gap.max() <= 1e-2 + abs(F.boundary_loss[-1])


def test_forward_in_two_dimensions_conserves_mass():
    g = SpatialGrid((-3.0, -3.0), (3.0, 3.0), 64)
    m = make_model("rotation2d", noise=0.3)
    F = solve_forward(m, g, gaussian_density(g, [0.5, 0.0], 0.1), 0.2, store="ends")
    assert abs(F.mass()[-1] - 1.0) <= 1e-2
    assert F.final.shape == (64, 64)


def test_forward_refuses_large_step():
    with pytest.raises(CFLError):
        solve_forward(HEAT, GRID, gaussian_density(GRID, 0.0, 0.25), 0.25, dt=0.1)


def test_forward_rejects_unknown_measure():
    with pytest.raises(ValueError):
        solve_forward(HEAT, GRID, gaussian_density(GRID, 0.0, 0.25), 0.1,
                      jump_measure="compensated")


# -- backward ---------------------------------------------------------------------


def test_backward_constant_stays_constant():
    B = solve_backward(make_model("ou_jump"), GRID, lambda x: np.ones(x.shape[:-1]), 0.5, 0.0)
    assert np.max(np.abs(B.values - 1.0)) <= 1e-6


def test_backward_heat_semigroup():
    g = SpatialGrid.line(-10.0, 10.0, 512)
    y = g.x[..., 0]
    B = solve_backward(HEAT, g, lambda x: np.cos(x[..., 0]), 1.0, 0.0)
    err = np.abs(B.start - math.exp(-1.0) * np.cos(y))
    assert err[np.abs(y) <= 6.0].max() <= 1e-2


def test_backward_poisson_mixture():
    g = SpatialGrid.line(-10.0, 10.0, 512)
    y = g.x[..., 0]
    m = make_model("pure_jump", marks=((1.0, 1.0),))
    B = solve_backward(m, g, lambda x: np.cos(x[..., 0]), 1.0, 0.0, dt=1e-2)
    mix = sum(poisson.pmf(k, 1.0) * np.cos(y + k) for k in range(40))
    assert np.abs(B.start - mix)[y <= 3.0].max() <= 1e-2


def test_backward_needs_ordered_interval():
    with pytest.raises(ValueError):
        solve_backward(HEAT, GRID, lambda x: x[..., 0], 0.0, 1.0)


@pytest.mark.parametrize("phi", [lambda x: x[..., 0], lambda x: np.cos(x[..., 0])])
def test_duality_pairing_is_constant(phi):
    m = make_model("ou_jump")
    rep = duality(m, GRID, gaussian_density(GRID, 0.5, 0.09), phi, 0.5)
    assert rep.passed


# -- Chapman ----------------------------------------------------------------------


def test_chapman_at_terminal_time_is_exact():
    m = make_model("ou_jump")
    rep = chapman_consistency(m, GRID, gaussian_density(GRID, 0.5, 0.09), 0.25, s=0.25)
    assert rep.metrics["l1_gap"] <= 1e-8


def test_chapman_static_model():
    rep = chapman_consistency(STATIC, GRID, gaussian_density(GRID, 0.5, 0.09), 0.5, s=0.2)
    assert rep.metrics["l1_gap"] <= 1e-8


# -- Monte Carlo -----------------------------------------------------------------


def test_static_paths_land_in_one_bin():
    h = monte_carlo_density(STATIC, [0.3], 1000, GRID, 0.5)
    k = np.searchsorted(h.edges[0], 0.3) - 1
    assert h.counts[k] == 1000
    assert h.counts.sum() == 1000


def test_heat_histogram():
    h = monte_carlo_density(HEAT, [0.0], 100_000, GRID, 0.25)
    exact = np.diff(norm.cdf(h.edges[0], scale=math.sqrt(0.5)))
    assert np.sum(np.abs(h.masses - exact)) <= 5e-2


def test_poisson_bin_masses():
    g = SpatialGrid.line(-0.5, 9.5, 64)
    m = make_model("pure_jump", marks=((1.0, 1.0),))
    edges = [np.arange(-0.5, 10.0, 1.0)]
    h = monte_carlo_density(m, [0.0], 20_000, g, 1.0, edges=edges)
    p = poisson.pmf(np.arange(10), 1.0)
    band = 3 * np.sqrt(p * (1 - p) / h.valid) + 1e-12
    assert np.all(np.abs(h.masses - p) <= band)


def test_histogram_is_thread_independent():
    m = make_model("ou_jump")
    a = monte_carlo_density(m, [0.5], 5000, GRID, 0.2, threads=1)
    b = monte_carlo_density(m, [0.5], 5000, GRID, 0.2, threads=3)
    assert np.array_equal(a.counts, b.counts)


@settings(max_examples=20, deadline=None)
@given(x0=st.floats(-12.0, 12.0), seed=st.integers(0, 2 ** 16))
def test_histogram_accounts_for_every_path(x0, seed):
    h = monte_carlo_density(make_model("ou_jump"), [x0], 1000, GRID, 0.1, seed=seed)
    assert h.counts.sum() + h.outside == h.valid
    assert h.valid + h.diverged == 1000


def test_histogram_needs_enough_paths():
    with pytest.raises(ValueError):
        monte_carlo_density(STATIC, [0.0], 999, GRID, 0.1)


def test_bin_masses_of_grid_density_sum_to_mass():
    p = gaussian_density(GRID, 0.5, 0.09)
    masses = bin_masses(GRID, p, [np.linspace(-8, 8, 51)])
    assert abs(masses.sum() - 1.0) <= 1e-10
