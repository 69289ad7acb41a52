import numpy as np
import pytest

from ptw.components.builtin import builtin_model
from ptw.components.model import (
    ModelSpec,
    Regularity,
    SamplePlan,
    check_structure,
    lipschitz_bound,
)
from ptw.errors import EmptySamplePlan, InvalidParameter


def _logistic_fields(diffusion_matrix):
    matrix = np.asarray(diffusion_matrix, dtype=float)
    dim = matrix.shape[0]

    def diffusion(x):
        return np.broadcast_to(matrix, (len(x), 1, dim, dim))

    def advection(x):
        return np.zeros((len(x), 1, dim))

    def reaction(x, u):
        return u * (1 - u)

    def jacobian(x, u):
        return (1 - 2 * u)[:, :, None]

    return dim, diffusion, advection, reaction, jacobian


def test_custom_model():
    dim, *fields = _logistic_fields([[1.0]])
    model = ModelSpec(dim, 1, *fields, eta_hat=1.0, name="logistic")
    assert model.components == 1
    assert model.homogeneous
    np.testing.assert_allclose(model.reaction([[0.25]], [[0.5]]), [[0.25]])
    np.testing.assert_allclose(model.linearization([[0.1], [0.7]]), [[[1.0]], [[1.0]]])
    assert model.gamma_lower == pytest.approx(1.0)


def test_eta_hat_bisection():
    dim, *fields = _logistic_fields([[1.0]])
    model = ModelSpec(dim, 1, *fields)
    assert model.eta_hat == pytest.approx(1.0, rel=1e-9)


def test_positions_are_wrapped():
    model = builtin_model("periodic_scalar", amplitude=0.5)
    x = np.array([[0.3], [0.55]])
    u = np.full((2, 1), 0.5)
    np.testing.assert_allclose(model.reaction(x + 2.0, u), model.reaction(x, u))


@pytest.mark.parametrize("matrix", [
    [[1.0, 0.5], [0.0, 1.0]],
    [[1.0, 0.0], [0.0, -1.0]],
    [[0.0]],
])
def test_diffusion_rejected(matrix):
    dim, *fields = _logistic_fields(matrix)
    with pytest.raises(InvalidParameter):
        ModelSpec(dim, 1, *fields, eta_hat=1.0)


def test_reaction_must_vanish_at_zero():
    dim, diffusion, advection, _, jacobian = _logistic_fields([[1.0]])

    def reaction(x, u):
        return u * (1 - u) + 0.1

    with pytest.raises(InvalidParameter):
        ModelSpec(dim, 1, diffusion, advection, reaction, jacobian, eta_hat=2.0,
                  regularity=Regularity(0.1, 1.0, 10.0))


def test_upper_state_required():
    dim, *fields = _logistic_fields([[1.0]])
    with pytest.raises(InvalidParameter):
        ModelSpec(dim, 1, *fields, eta_hat=0.5)


def test_regularity_violation():
    dim, *fields = _logistic_fields([[1.0]])
    with pytest.raises(InvalidParameter):
        ModelSpec(dim, 1, *fields, eta_hat=1.0, regularity=Regularity(0.5, 1.0, 0.0))


def test_fitted_regularity():
    model = builtin_model("scalar_kpp")
    reg = model.regularity
    assert reg.beta == 1.0
    assert reg.sigma == pytest.approx(0.1)
    assert reg.M >= 1.0


@pytest.mark.parametrize("name, params", [
    ("scalar_kpp", {}),
    ("constant_coop2", {}),
    ("feedback_loop", {"p": 1.0}),
    ("rabies_sir", {}),
    ("patch_logistic", {}),
    ("periodic_scalar", {}),
    ("saturating_decay", {}),
])
def test_builtin_structure(name, params):
    report = check_structure(builtin_model(name, **params))
    assert report.cooperative
    assert report.fully_coupled
    assert report.upper_bound_ok
    assert report.sublinear
    assert report.subhomogeneous
    assert report.witness == {}


def test_structure_not_sublinear():
    report = check_structure(builtin_model("feedback_loop", p=2.0))
    assert report.cooperative
    assert not report.sublinear
    assert not report.strictly_sublinear
    assert not report.subhomogeneous
    assert "sublinear" in report.witness


def test_structure_not_cooperative():
    dim = 1

    def diffusion(x):
        return np.broadcast_to(np.eye(1), (len(x), 2, 1, 1))

    def advection(x):
        return np.zeros((len(x), 2, 1))

    H = np.array([[-1.0, -0.5], [0.5, -1.0]])

    def reaction(x, u):
        return u @ H.T

    def jacobian(x, u):
        return np.broadcast_to(H, (len(u), 2, 2)).copy()

    model = ModelSpec(dim, 2, diffusion, advection, reaction, jacobian, eta_hat=1.0,
                      regularity=Regularity(0.1, 1.0, 0.0))
    report = check_structure(model)
    assert not report.cooperative
    np.testing.assert_array_equal(report.witness["cooperative"]["indices"], [0, 1])
    flags = report.as_dict()
    assert flags["cooperative"] is False
    assert "cooperative" in flags["witness"]


def test_structure_not_fully_coupled():
    report = check_structure(builtin_model("patch_logistic", r=(1.0, 1.0, 1.0),
                                           K=(1.0, 1.0, 1.0), eps=1.0))
    assert report.fully_coupled
    dim = 1

    def diffusion(x):
        return np.broadcast_to(np.eye(1), (len(x), 2, 1, 1))

    def advection(x):
        return np.zeros((len(x), 2, 1))

    def reaction(x, u):
        return u * (1 - u)

    def jacobian(x, u):
        return np.einsum("pi,ij->pij", 1 - 2 * u, np.eye(2))

    model = ModelSpec(dim, 2, diffusion, advection, reaction, jacobian, eta_hat=1.0)
    report = check_structure(model)
    assert not report.fully_coupled
    assert report.cooperative


def test_strictly_sublinear():
    assert check_structure(builtin_model("scalar_kpp")).strictly_sublinear
    assert check_structure(builtin_model("saturating_decay")).strictly_sublinear


def test_empty_sample_plan():
    model = builtin_model("scalar_kpp")
    with pytest.raises(EmptySamplePlan):
        check_structure(model, SamplePlan(x_per_axis=0, x_random=0))
    with pytest.raises(EmptySamplePlan):
        check_structure(model, SamplePlan(u_samples=0))


def test_sample_plan_deterministic():
    plan = SamplePlan(seed=3)
    np.testing.assert_array_equal(plan.x_points(2), SamplePlan(seed=3).x_points(2))
    np.testing.assert_array_equal(plan.u_points(2, 1.0), SamplePlan(seed=3).u_points(2, 1.0))
    assert plan.u_points(2, 1.0).max() <= 1.0
    assert plan.u_points(2, 1.0).min() >= 0.0


@pytest.mark.parametrize("r", [1.0, 2.5])
def test_lipschitz_bound(r):
    assert lipschitz_bound(builtin_model("scalar_kpp", r=r)) == pytest.approx(r)


def test_homogeneous_flag():
    assert builtin_model("scalar_kpp").homogeneous
    assert not builtin_model("periodic_scalar", diffusion_amplitude=0.3).homogeneous
    assert not builtin_model("periodic_scalar", amplitude=0.0, diffusion_amplitude=0.3,
                             advection=0.2).homogeneous
