import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from jumplab.errors import CFLError
from jumplab.fields import SpatialGrid
from jumplab.fields.initial import gaussian_density
from jumplab.kernel import (check_global_invariants, check_pathwise_invariant, kernel_noise,
                            sample_density, solve_kernel_spde, validate_density)
from jumplab.sde_core import (NoiseRealization, TimeGrid, evolve_jacobian, make_model,
                              sample_noise, simulate_path)

GRID = SpatialGrid.line(-8.0, 8.0, 512)


def one_jump(model, T=0.5, tau=0.25, steps=10):
    grid = TimeGrid.uniform(0.0, T, steps).with_nodes([tau])
    return NoiseRealization(grid, np.zeros((model.m, grid.steps)), [tau], [0], model.marks, 0)


def test_static_model_keeps_kernel():
    m = make_model("additive", a=0.0, b=0.0, marks=None)
    rho0 = gaussian_density(GRID, 0.5, 0.09)
    K = solve_kernel_spde(m, GRID, rho0, sample_noise(m, TimeGrid.uniform(0, 0.5, 20), 0))
    assert np.all(K.values == rho0)


def test_constant_advection_transports_profile():
    m = make_model("additive", a=0.5, b=0.0, marks=None)
    K = solve_kernel_spde(m, GRID, gaussian_density(GRID, 0.0, 0.25),
                          kernel_noise(m, GRID, 0.5, 0), store="ends")
    exact = gaussian_density(GRID, 0.25, 0.25)
    assert float(GRID.integrate(np.abs(K.final - exact))) <= 1e-2


def test_constant_shift_jump_resamples_kernel():
    m = make_model("pure_jump", marks=((1.0, 1.0),))
    K = solve_kernel_spde(m, GRID, gaussian_density(GRID, -1.0, 0.25), one_jump(m))
    k = K.field.snapshot_index(0.25)
    x = GRID.x[..., 0]
    left = K.field.left_limits[k]
    ref = np.where(x - 1.0 >= x[0], CubicSpline(x, left)(x - 1.0), 0.0)
    assert np.max(np.abs(K.values[k] - ref)) <= 1e-8
    assert np.max(np.abs(K.values[k] - gaussian_density(GRID, 0.0, 0.25))) <= 1e-6


@pytest.mark.parametrize("key", ["ou_jump", "geometric", "additive", "pure_jump"])
def test_mass_is_conserved(key):
    m = make_model(key)
    K = solve_kernel_spde(m, GRID, gaussian_density(GRID, 0.5, 0.09),
                          kernel_noise(m, GRID, 0.5, 3), store=20)
    gap = np.abs(K.mass() - 1.0)
    assert gap.max() <= 1e-2
    assert np.all(np.isfinite(K.values))
    # any gap beyond rounding is explained by the absorbing boundary
    assert np.all(gap <= 2 * np.abs(K.boundary_loss) + 1e-10)


def test_static_pathwise_identity_is_interpolation_only():
    m = make_model("additive", a=0.0, b=0.0, marks=None)
    nz = sample_noise(m, TimeGrid.uniform(0, 0.5, 10), 0)
    K = solve_kernel_spde(m, GRID, gaussian_density(GRID, 0.0, 0.25), nz)
    tr = simulate_path(m, np.linspace(-1.5, 1.5, 31)[:, None], nz)
    J, _ = evolve_jacobian(m, tr, nz)
    assert check_pathwise_invariant(K, tr, J).metrics["max_residual"] <= 1e-8


def test_linear_flow_pathwise_identity():
    m = make_model("geometric", alpha=0.5, sigma=0.0, marks=None)
    nz = kernel_noise(m, GRID, 0.5, 1)
    K = solve_kernel_spde(m, GRID, gaussian_density(GRID, 0.0, 0.25), nz)
    tr = simulate_path(m, np.linspace(-1.5, 1.5, 31)[:, None], nz)
    J, _ = evolve_jacobian(m, tr, nz)
    np.testing.assert_allclose(J.values[-1], np.exp(0.25), rtol=1e-2)
    assert check_pathwise_invariant(K, tr, J).metrics["max_residual"] <= 1e-2


def test_global_invariants_static_square():
    m = make_model("additive", a=0.0, b=0.0, marks=None)
    nz = sample_noise(m, TimeGrid.uniform(0, 0.5, 10), 0)
    K = solve_kernel_spde(m, GRID, gaussian_density(GRID, 0.0, 0.25), nz)
    rep = check_global_invariants(K, m, functions=("1", "x2"), samples=10_000, seed=0,
                                  quad_tol=1e-10)
    assert rep.passed
    assert rep.metrics["gap[x2]"] <= 1e-10 + 3 * rep.metrics["se[x2]"]


def test_global_invariants_ou_jump():
    m = make_model("ou_jump")
    K = solve_kernel_spde(m, GRID, gaussian_density(GRID, 0.5, 0.09), kernel_noise(m, GRID, 0.5, 3),
                          store="ends")
    rep = check_global_invariants(K, m, functions=("1", "x"), samples=10_000, seed=1)
    assert rep.passed
    assert rep.metrics["gap[x]"] <= 3 * rep.metrics["se[x]"] + 1e-2


def test_explicit_step_above_bound_is_refused():
    m = make_model("ou_jump")
    with pytest.raises(CFLError) as info:
        solve_kernel_spde(m, GRID, gaussian_density(GRID, 0.0, 0.25),
                          sample_noise(m, TimeGrid.uniform(0, 0.5, 2), 0))
    assert 0 < info.value.required_dt < 0.25


@pytest.mark.parametrize("values", [
    np.full(512, -1.0),
    np.full(512, np.nan),
    np.ones(100),
])
def test_invalid_initial_density(values):
    with pytest.raises(ValueError):
        validate_density(GRID, values)


def test_sampler_reproduces_moments():
    rng = np.random.default_rng(0)
    y = sample_density(GRID, gaussian_density(GRID, 0.5, 0.09), 200_000, rng)
    assert abs(y.mean() - 0.5) <= 5e-3
    assert abs(y.var() - 0.09) <= 5e-3


def test_kernel_csv(tmp_path):
    m = make_model("additive", a=0.0, b=0.0, marks=None)
    K = solve_kernel_spde(m, GRID, gaussian_density(GRID, 0.0, 0.25),
                          sample_noise(m, TimeGrid.uniform(0, 0.5, 4), 0))
    path = tmp_path / "k.csv"
    K.to_csv(path)
    rows = path.read_text().splitlines()
    assert rows[0].split(",")[:2] == ["x_1", "t=0"]
    assert len(rows) == 1 + 512
