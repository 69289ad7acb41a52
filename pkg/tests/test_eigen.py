import numpy as np
import pytest

from ptw.components.builtin import builtin_model
from ptw.disc import PeriodicGrid, assemble_weighted
from ptw.eigen import (
    dirichlet_principal_eigenpair,
    dispersion_curve,
    generalized_principal_eigenvalue,
    k_of,
    maxmin_bracket,
    parabola_bound,
    periodic_principal_eigenpair,
)
from ptw.errors import GridTooCoarse, NotCooperative, SignFailure


@pytest.fixture
def grid():
    return PeriodicGrid(1, 16)


@pytest.mark.parametrize("r, lam", [(1.0, 0.0), (1.0, 0.5), (2.0, 1.5)])
def test_kpp_dispersion_is_exact(grid, r, lam):
    pair = k_of(builtin_model("scalar_kpp", r=r), [1.0], lam, grid)
    assert pair.value == pytest.approx(-lam**2 - r, abs=1e-9)
    np.testing.assert_allclose(pair.eigenfunction, 1.0, atol=1e-9)
    assert pair.eigenfunction.max() == pytest.approx(1.0)
    assert pair.residual < 1e-9
    lower, upper = pair.bracket
    assert lower <= pair.value + 1e-9
    assert upper >= pair.value - 1e-9


def test_constant_coop2_eigenvalue(grid):
    pair = k_of(builtin_model("constant_coop2"), [1.0], 0.0, grid)
    assert pair.value == pytest.approx(-1.0, abs=1e-9)
    assert pair.components == 2


def test_feedback_loop_perron_root(grid):
    pair = k_of(builtin_model("feedback_loop", p=1.0), [1.0], 0.0, grid)
    # (s + 0.5)(s + 1)^2 = 1
    roots = np.roots([1.0, 2.5, 2.0, -0.5])
    perron = max(root.real for root in roots if abs(root.imag) < 1e-12)
    assert pair.value == pytest.approx(-perron, abs=1e-8)
    assert pair.min_value > 0


@pytest.mark.parametrize("mu", [0.25, 0.5])
def test_stable_model_positive_eigenvalue(grid, mu):
    assert k_of(builtin_model("saturating_decay", mu=mu), [1.0], 0.0, grid).value == (
        pytest.approx(mu, abs=1e-9)
    )


def test_periodic_medium_eigenfunction_positive(grid):
    model = builtin_model("periodic_scalar", amplitude=0.5, diffusion_amplitude=0.2)
    pair = k_of(model, [1.0], 0.8, grid)
    assert pair.min_value > 0
    assert pair.residual < 1e-9
    assert pair.bracket[0] <= pair.value <= pair.bracket[1]
    assert pair.value <= parabola_bound(model, [1.0], 0.8)
    phi = pair.interpolator()
    np.testing.assert_allclose(phi(grid.nodes), pair.eigenfunction.T, atol=1e-9)


def test_k_of_refines_grid():
    model = builtin_model("scalar_kpp")
    with pytest.warns(UserWarning, match="Refining"):
        pair = k_of(model, [1.0], 20.0, PeriodicGrid(1, 8))
    assert pair.grid.points_per_axis == (32,)
    assert pair.value == pytest.approx(-401.0, rel=1e-9)


def test_k_of_refinement_cap():
    with pytest.warns(UserWarning):
        with pytest.raises(GridTooCoarse):
            k_of(builtin_model("scalar_kpp"), [1.0], 20.0, PeriodicGrid(1, 8),
                 max_refinements=1)


def test_maxmin_bracket(grid):
    model = builtin_model("periodic_scalar")
    op = assemble_weighted(model, grid, 0.5, [1.0], model.linearization(grid.nodes))
    lower, upper = maxmin_bracket(op, np.ones(16))
    pair = periodic_principal_eigenpair(op)
    assert lower <= pair.value <= upper
    with pytest.raises(SignFailure):
        maxmin_bracket(op, np.zeros(16))


def test_not_cooperative(grid):
    model = builtin_model("constant_coop2")
    H = np.broadcast_to(np.array([[-1.0, -0.5], [-0.5, -1.0]]), (16, 2, 2))
    op = assemble_weighted(model, grid, 0.0, [1.0], H)
    with pytest.raises(NotCooperative):
        periodic_principal_eigenpair(op)


def test_initial_vector_must_be_positive(grid):
    model = builtin_model("scalar_kpp")
    op = assemble_weighted(model, grid, 0.0, [1.0], model.linearization(grid.nodes))
    with pytest.raises(SignFailure):
        periodic_principal_eigenpair(op, initial=-np.ones(16))


def test_dirichlet_eigenvalue():
    pair = dirichlet_principal_eigenpair(builtin_model("scalar_kpp"), 2.0, resolution=8)
    expected = 128 * (1 - np.cos(np.pi / 32)) - 1
    assert pair.value == pytest.approx(expected, rel=1e-7)
    assert pair.eigenfunction.shape == (1, 33)
    assert pair.eigenfunction[0, 0] == 0.0
    assert pair.eigenfunction[0, 16] == pytest.approx(1.0)


def test_dirichlet_eigenvalue_decreases_with_radius():
    model = builtin_model("scalar_kpp")
    values = [dirichlet_principal_eigenpair(model, R).value for R in (1.0, 2.0, 4.0)]
    assert values[0] > values[1] > values[2] > -1.0


def test_parabola_bound():
    model = builtin_model("scalar_kpp", r=2.0)
    assert parabola_bound(model, [1.0], 1.0) == pytest.approx(1.0)


def test_generalized_principal_eigenvalue(grid):
    lambda_1, lambda_bar = generalized_principal_eigenvalue(
        builtin_model("scalar_kpp"), [1.0], grid
    )
    assert lambda_1 == pytest.approx(-1.0, abs=1e-8)
    assert lambda_bar == pytest.approx(0.0, abs=1e-3)


def test_generalized_principal_eigenvalue_with_drift(grid):
    model = builtin_model("periodic_scalar", amplitude=0.0, advection=0.4)
    lambda_1, lambda_bar = generalized_principal_eigenvalue(model, [1.0], grid)
    # k(lambda) = -lambda^2 - 0.4 lambda - 1
    assert lambda_bar == pytest.approx(-0.2, abs=1e-3)
    assert lambda_1 == pytest.approx(-0.96, abs=1e-6)


def test_dispersion_curve(grid):
    lambdas = np.linspace(0.0, 2.0, 5)
    curve = dispersion_curve(builtin_model("scalar_kpp"), [1.0], lambdas, grid)
    assert len(curve) == 5
    np.testing.assert_allclose(curve.values, -lambdas**2 - 1, atol=1e-9)
    assert curve.provenance["points_per_axis"] == [16]
    assert curve.as_dict()["lambda"] == lambdas.tolist()


def test_dispersion_curve_needs_increasing_samples(grid):
    with pytest.raises(ValueError):
        dispersion_curve(builtin_model("scalar_kpp"), [1.0], [1.0, 1.0], grid)


def test_dispersion_midpoint_concavity():
    model = builtin_model("periodic_scalar", amplitude=0.5, diffusion_amplitude=0.2)
    grid = PeriodicGrid(1, 32)
    rng = np.random.default_rng(7)
    for lam_1, lam_2 in rng.uniform(0.0, 2.0, size=(20, 2)):
        midpoint = k_of(model, [1.0], 0.5 * (lam_1 + lam_2), grid).value
        chord = 0.5 * (k_of(model, [1.0], lam_1, grid).value
                       + k_of(model, [1.0], lam_2, grid).value)
        assert midpoint >= chord - 1e-7


def test_eigenvalue_grid_convergence():
    model = builtin_model("periodic_scalar", amplitude=0.5, diffusion_amplitude=0.2)
    values = [
        k_of(model, [1.0], 0.5, PeriodicGrid(1, points), max_refinements=0).value
        for points in (16, 32, 64)
    ]
    assert abs(values[0] - values[1]) >= 3.5 * abs(values[1] - values[2])
