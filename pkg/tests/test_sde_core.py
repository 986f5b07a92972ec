import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jumplab.errors import (DivergenceError, InvalidModelError, InvariantViolationError,
                            SingularMapError)
from jumplab.sde_core import (REGISTRY, JumpDiffusionModel, MarkMeasure, NoiseRealization,
                              TimeGrid, evolve_jacobian, inverse_jump_map, jump_jacobian_det,
                              k_coefficient, make_model, refine_noise, sample_noise,
                              simulate_path)
from jumplab.sde_core.jacobian import inverse_map_det


def linear_jump_model(C, rate=1.0):
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = C.shape[0]
    return JumpDiffusionModel(
        n=n, m=1,
        drift=lambda t, x: np.zeros(np.shape(x)),
        diffusion=lambda t, x: np.zeros(np.shape(x) + (1,)),
        jump=lambda t, x, mark: x @ C.T,
        jump_jac=lambda t, x, mark: np.broadcast_to(C, np.shape(x)[:-1] + (n, n)).copy(),
        marks=MarkMeasure.from_atoms([(np.zeros(n), rate)]),
        time_homogeneous=True)


def sine_jump_model(eps=0.1):
    return JumpDiffusionModel(
        n=1, m=1,
        drift=lambda t, x: np.zeros(np.shape(x)),
        diffusion=lambda t, x: np.zeros(np.shape(x) + (1,)),
        jump=lambda t, x, mark: eps * np.sin(x),
        jump_jac=lambda t, x, mark: (eps * np.cos(x))[..., None],
        marks=MarkMeasure.from_atoms([(0.0, 1.0)]),
        time_homogeneous=True)


def one_jump(model, T=1.0, tau=0.5, steps=10):
    grid = TimeGrid.uniform(0.0, T, steps).with_nodes([tau])
    return NoiseRealization(grid, np.zeros((model.m, grid.steps)), [tau], [0], model.marks, 0)


# -- marks and noise ---------------------------------------------------------------


def test_mark_measure_total_rate():
    mm = MarkMeasure.from_atoms([(0.6, 1.0), (-0.4, 0.5)])
    assert mm.total_rate == 1.5
    np.testing.assert_allclose(mm.probabilities, [2 / 3, 1 / 3])


@pytest.mark.parametrize("rates", [[0.0], [-1.0], [np.inf]])
def test_mark_measure_rejects_bad_rates(rates):
    with pytest.raises(InvalidModelError):
        MarkMeasure(np.zeros((1, 1)), np.asarray(rates))


def test_empty_atoms_give_wiener_only_noise():
    m = make_model("additive", marks=None)
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 100), 3)
    assert nz.n_jumps == 0
    assert nz.dw.shape == (1, 100)


def test_noise_is_bit_identical_per_seed():
    m = make_model("ou_jump")
    grid = TimeGrid.uniform(0, 1, 64)
    a, b = sample_noise(m, grid, 11), sample_noise(m, grid, 11)
    assert a.dw.tobytes() == b.dw.tobytes()
    assert a.jump_times.tobytes() == b.jump_times.tobytes()
    assert np.array_equal(a.jump_atoms, b.jump_atoms)
    ta, tb = simulate_path(m, [0.1], a), simulate_path(m, [0.1], b)
    assert ta.states.tobytes() == tb.states.tobytes()


def test_mean_jump_count_is_total_rate():
    m = make_model("pure_jump", marks=((1.0, 1.0),))
    grid = TimeGrid.uniform(0, 1, 1)
    counts = [sample_noise(m, grid, s).n_jumps for s in range(10_000)]
    assert abs(np.mean(counts) - 1.0) <= 0.05


def test_jump_times_are_grid_nodes():
    m = make_model("ou_jump")
    nz = sample_noise(m, TimeGrid.uniform(0, 2, 50), 5)
    assert nz.n_jumps > 0
    assert np.all(nz.grid.nodes[nz.jump_nodes] == nz.jump_times)
    assert np.all((nz.jump_times > 0) & (nz.jump_times <= 2))
    assert np.all(np.diff(nz.grid.nodes) > 0)


def test_refinement_keeps_jumps_and_coarse_wiener_values():
    m = make_model("ou_jump")
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 40), 2)
    fine = refine_noise(nz)
    assert fine.grid.base_steps == 80
    assert np.array_equal(fine.jump_times, nz.jump_times)
    idx = np.searchsorted(fine.grid.nodes, nz.grid.nodes)
    np.testing.assert_allclose(fine.wiener_path()[:, idx], nz.wiener_path(), atol=1e-12)


# -- paths ----------------------------------------------------------------------


def test_static_model_stays_put():
    m = make_model("additive", a=0.0, b=0.0, marks=None)
    tr = simulate_path(m, [1.0], sample_noise(m, TimeGrid.uniform(0, 1, 50), 0))
    assert np.all(tr.states == 1.0)


def test_constant_drift_is_exact():
    m = make_model("additive", a=1.0, b=0.0, marks=None)
    tr = simulate_path(m, [0.0], sample_noise(m, TimeGrid.uniform(0, 1, 1024), 0))
    assert tr.final[0] == 1.0


def test_unit_noise_path_is_prefix_sum():
    m = make_model("additive", a=0.0, b=1.0, marks=None)
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 200), 4)
    tr = simulate_path(m, [0.0], nz)
    np.testing.assert_array_equal(tr.states[1:, 0], np.cumsum(nz.dw[0]))


@pytest.mark.parametrize("key", ["ou_jump", "geometric", "additive", "pure_jump"])
def test_post_jump_equals_left_limit_plus_amplitude(key):
    m = make_model(key)
    nz = sample_noise(m, TimeGrid.uniform(0, 3, 60), 1)
    tr = simulate_path(m, [0.4], nz)
    for j, k in enumerate(tr.jump_nodes):
        pre = tr.left_limits[j]
        assert np.array_equal(tr.states[k], pre + m.g(tr.nodes[k], pre, nz.jump_marks[j]))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_names_the_step():
    m = JumpDiffusionModel(n=1, m=1, drift=lambda t, x: x ** 3,
                           diffusion=lambda t, x: np.zeros(np.shape(x) + (1,)))
    with pytest.raises(DivergenceError, match="step"):
        simulate_path(m, [10.0], sample_noise(m, TimeGrid.uniform(0, 1, 100), 0))


# -- inverse jump map and determinants ---------------------------------------------------


def test_inverse_of_constant_shift():
    m = make_model("additive", marks=((0.7, 1.0),))
    y = np.array([[0.1], [2.5]])
    x = inverse_jump_map(m, 0.0, y, m.marks.marks[0])
    assert np.all(np.abs(x - (y - 0.7)) <= 1e-12 * (1 + np.abs(y)))


def test_inverse_of_linear_jump():
    m = make_model("geometric", marks=((0.5, 1.0),))
    assert inverse_jump_map(m, 0.0, [3.0], m.marks.marks[0])[0] == pytest.approx(2.0, abs=1e-12)


def test_inverse_of_sine_jump_meets_residual_tolerance():
    m = sine_jump_model(0.1)
    x = inverse_jump_map(m, 0.0, [1.0], m.marks.marks[0])[0]
    assert abs(x + 0.1 * np.sin(x) - 1.0) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(z=st.floats(-5, 5), c=st.floats(-0.8, 2.0))
def test_inverse_map_identity_linear(z, c):
    m = make_model("geometric", marks=((c, 1.0),))
    mark = m.marks.marks[0]
    y = np.array([z]) + m.g(0.0, np.array([z]), mark)
    assert abs(inverse_jump_map(m, 0.0, y, mark)[0] - z) <= 1e-10 * (1 + abs(z))


@settings(max_examples=200, deadline=None)
@given(z=st.floats(-10, 10), eps=st.floats(-0.9, 0.9))
def test_inverse_map_identity_sine(z, eps):
    m = sine_jump_model(eps)
    mark = m.marks.marks[0]
    y = np.array([z + eps * np.sin(z)])
    assert abs(inverse_jump_map(m, 0.3, y, mark)[0] - z) <= 1e-10 * (1 + abs(z))


def test_singular_jump_map_raises():
    m = linear_jump_model([[-1.0]])
    with pytest.raises(SingularMapError):
        inverse_jump_map(m, 0.0, [1.0], m.marks.marks[0])


@pytest.mark.parametrize("C, det", [
    ([[0.5]], 1.5),
    ([[0.0]], 1.0),
    ([[0.1, 0.2], [0.0, 0.3]], 1.43),
])
def test_jump_determinant(C, det):
    m = linear_jump_model(C)
    x = np.ones(m.n)
    assert jump_jacobian_det(m, 0.0, x, m.marks.marks[0]) == pytest.approx(det, rel=1e-14)
    _, d_bar = inverse_map_det(m, 0.0, x, m.marks.marks[0])
    assert d_bar * det == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("model, expected", [
    (make_model("additive", a=0.4, b=0.7), 0.0),
    (make_model("geometric", alpha=0.5, sigma=0.0, marks=None), 0.5),
    (make_model("geometric", alpha=0.0, sigma=0.8, marks=None), 0.0),
])
def test_k_coefficient(model, expected):
    x = np.array([[0.3], [1.7], [-2.0]])
    np.testing.assert_allclose(k_coefficient(model, 0.0, x), expected, atol=1e-14)


@pytest.mark.parametrize("key", sorted(REGISTRY))
def test_registry_derivatives_match_finite_differences(key):
    make_model(key).check_derivatives(seed=3)


# -- Jacobian ----------------------------------------------------------------------


@pytest.mark.parametrize("key", sorted(REGISTRY))
@pytest.mark.parametrize("seed", [0, 1])
def test_jacobian_methods_agree_and_stay_positive(key, seed):
    m = make_model(key)
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 200), seed)
    tr = simulate_path(m, [0.6] * m.n, nz)
    a, b = evolve_jacobian(m, tr, nz)
    assert a.values[0] == 1.0 and b.values[0] == 1.0
    np.testing.assert_allclose(a.values, b.values, rtol=1e-8)
    assert np.all(a.values > 0) and np.all(b.values > 0)


def test_constant_coefficients_have_unit_jacobian():
    m = make_model("additive")
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 100), 0)
    a, b = evolve_jacobian(m, simulate_path(m, [0.0], nz), nz)
    assert np.all(a.values == 1.0) and np.all(b.values == 1.0)


def test_linear_flow_jacobian():
    m = make_model("geometric", alpha=0.5, sigma=0.0, marks=None)
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 1000), 0)
    a, _ = evolve_jacobian(m, simulate_path(m, [0.2], nz), nz)
    assert abs(a.values[-1] - math.exp(0.5)) <= 1e-3


def test_single_multiplicative_jump_jacobian_is_exact():
    m = make_model("pure_jump", marks=((0.5, 1.0),), multiplicative=True)
    nz = one_jump(m)
    a, b = evolve_jacobian(m, simulate_path(m, [1.0], nz), nz)
    assert a.values[-1] == 1.5 and b.values[-1] == 1.5


def test_non_positive_jump_determinant_is_reported():
    m = linear_jump_model([[-2.0]])
    nz = one_jump(m)
    with pytest.raises(InvariantViolationError):
        evolve_jacobian(m, simulate_path(m, [1.0], nz), nz)


def test_trajectory_csv(tmp_path):
    m = make_model("additive")
    nz = sample_noise(m, TimeGrid.uniform(0, 1, 20), 0)
    tr = simulate_path(m, [0.0], nz)
    a, _ = evolve_jacobian(m, tr, nz)
    path = tmp_path / "tr.csv"
    tr.to_csv(path, jacobian=a)
    rows = path.read_text().splitlines()
    assert rows[0] == "t,x_1,J,jump_flag"
    assert len(rows) == nz.grid.nodes.size + 1
    assert all(r.split(",")[2] == "1.0" for r in rows[1:])
