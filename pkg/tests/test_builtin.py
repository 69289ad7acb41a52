import numpy as np
import pytest

from ptw.components.builtin import BUILTIN_MODELS, builtin_model, with_tables
from ptw.errors import InvalidParameter


@pytest.mark.parametrize("name", sorted(BUILTIN_MODELS))
def test_builtin_defaults(name):
    model = builtin_model(name)
    assert model.name == name
    assert model.dim == 1
    x = np.array([[0.0], [0.5]])
    assert model.reaction(x, np.zeros((2, model.components))).shape == (2, model.components)
    np.testing.assert_allclose(model.reaction(x, np.zeros((2, model.components))), 0.0)
    assert model.reaction(x, np.full((2, model.components), model.eta_hat)).max() <= 1e-12


@pytest.mark.parametrize("name, eta_hat", [
    ("scalar_kpp", 1.0),
    ("constant_coop2", 1.0),
    ("feedback_loop", 2.0),
    ("rabies_sir", 2.0),
    ("patch_logistic", 1.0),
    ("periodic_scalar", 1.0),
    ("saturating_decay", 1.0),
])
def test_builtin_eta_hat(name, eta_hat):
    assert builtin_model(name).eta_hat == pytest.approx(eta_hat)


def test_constant_coop2_linearization():
    model = builtin_model("constant_coop2")
    H = model.linearization([[0.3]])[0]
    np.testing.assert_allclose(H, [[-1.0, 2.0], [2.0, -1.0]])
    assert np.linalg.eigvalsh(H).max() == pytest.approx(1.0)


def test_scalar_kpp_anisotropic():
    model = builtin_model("scalar_kpp", dim=2, diffusion_matrix=[[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(model.diffusion([[0.1, 0.2]])[0, 0], [[2.0, 0.5], [0.5, 1.0]])
    assert model.gamma_lower == pytest.approx(1.5 - np.sqrt(0.5))


def test_feedback_loop_jacobian():
    model = builtin_model("feedback_loop", p=1.0)
    J = model.linearization([[0.0]])[0]
    np.testing.assert_allclose(J, [[-0.5, 0.0, 1.0], [1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])


def test_rabies_modulation():
    model = builtin_model("rabies_sir", modulation=0.5)
    u = np.full((2, 2), 0.1)
    f0, f_half = model.reaction([[0.0], [0.5]], u)
    assert np.all(f0 > f_half)
    assert model.eta_hat == pytest.approx(3.0)


def test_saturating_decay_stable():
    model = builtin_model("saturating_decay", mu=0.5)
    np.testing.assert_allclose(model.linearization([[0.2]]), [[[-0.5]]])


@pytest.mark.parametrize("name, params", [
    ("scalar_kpp", {"r": -1.0}),
    ("scalar_kpp", {"diffusivity": 0.0}),
    ("feedback_loop", {"p": 0.5}),
    ("feedback_loop", {"alpha": (1.0,)}),
    ("rabies_sir", {"modulation": 1.0}),
    ("periodic_scalar", {"amplitude": 1.0}),
    ("saturating_decay", {"mu": 0.0}),
    ("scalar_kpp", {"rate": 1.0}),
    ("no_such_model", {}),
])
def test_builtin_invalid(name, params):
    with pytest.raises(InvalidParameter):
        builtin_model(name, **params)


def test_with_tables():
    model = builtin_model("scalar_kpp")
    diffusion = np.full((4, 1), 2.0)
    advection = np.full((4, 1, 1), 0.5)
    tabulated = with_tables(model, diffusion_table=diffusion, advection_table=advection)
    assert tabulated.name == "scalar_kpp+tables"
    np.testing.assert_allclose(tabulated.diffusion([[0.3]]), [[[[2.0]]]])
    np.testing.assert_allclose(tabulated.advection([[0.3]]), [[[0.5]]])
    np.testing.assert_allclose(tabulated.reaction([[0.3]], [[0.5]]), [[0.25]])


def test_with_tables_varying():
    model = builtin_model("scalar_kpp")
    diffusion = np.array([1.0, 2.0, 3.0, 2.0])[:, None]
    tabulated = with_tables(model, diffusion_table=diffusion)
    assert not tabulated.homogeneous
    np.testing.assert_allclose(tabulated.diffusion([[0.125]])[0, 0, 0, 0], 1.5)


def test_with_tables_shape_mismatch():
    model = builtin_model("scalar_kpp")
    with pytest.raises(InvalidParameter):
        with_tables(model, advection_table=np.zeros((4, 2, 1)))
