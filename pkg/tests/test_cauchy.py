import numpy as np
import pytest

from ptw.cauchy import (
    SimulationState,
    Trajectory,
    bump,
    cross_validate_speed,
    extinction_test,
    hair_trigger_test,
    simulate,
    spreading_speed,
    step,
    strip_grid,
)
from ptw.components.builtin import builtin_model
from ptw.disc import PeriodicGrid
from ptw.errors import CFLViolation, FrontHitWall, HypothesisUnmet, NegativeOvershoot

SPREADING_OPTIONS = {"T": 10.0, "length": 60.0, "resolution": 5}


def test_state_rejects_large_step():
    model = builtin_model("scalar_kpp")
    with pytest.raises(CFLViolation):
        SimulationState(model, PeriodicGrid(1, 8), np.zeros(8), dt=0.5, lipschitz=1.0)


def test_state_rejects_negative_data():
    model = builtin_model("scalar_kpp")
    with pytest.raises(NegativeOvershoot):
        SimulationState(model, PeriodicGrid(1, 8), -np.ones(8), dt=0.1, lipschitz=1.0)


def test_uniform_state_follows_logistic_ode():
    model = builtin_model("scalar_kpp")
    state = SimulationState(model, PeriodicGrid(1, 16), np.full(16, 0.1), dt=0.01,
                            lipschitz=1.0)
    state, trajectory = simulate(state, 2.0)
    assert trajectory is None
    assert state.t == pytest.approx(2.0)
    np.testing.assert_allclose(state.u, state.u[0, 0], atol=1e-12)
    assert state.u[0, 0] == pytest.approx(1 / (1 + 9 * np.exp(-2.0)), abs=5e-3)


def test_step_preserves_equilibria():
    model = builtin_model("constant_coop2")
    state = SimulationState(model, PeriodicGrid(1, 8), np.ones((2, 8)), dt=0.05)
    advanced = step(state)
    assert advanced.t == pytest.approx(0.05)
    np.testing.assert_allclose(advanced.u, 1.0, atol=1e-12)


def test_simulate_snapshots(tmp_path):
    model = builtin_model("scalar_kpp")
    grid = PeriodicGrid(1, 8)
    state = SimulationState(model, grid, np.full(8, 0.5), dt=0.05)
    state, trajectory = simulate(state, 1.0, snapshot_every=10)
    assert isinstance(trajectory, Trajectory)
    assert len(trajectory) == 3
    assert trajectory.times[0] == 0.0
    path = tmp_path / "trajectory.csv"
    trajectory.save_as(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,x_1,u_1"
    assert len(lines) == 1 + 3 * 8


def test_bump():
    grid = PeriodicGrid(1, 40, 4.0)
    u = bump(grid, 2, center=[2.0], radius=1.0, amplitude=0.5, component=1)
    assert u.shape == (2, 40)
    assert np.all(u[0] == 0.0)
    assert u[1].max() == pytest.approx(0.5)
    assert u[1, 0] == 0.0


def test_strip_grid():
    grid = strip_grid(builtin_model("scalar_kpp", dim=2), 10.0, resolution=4)
    assert grid.shape == (81, 5)
    assert grid.boundary == "neumann"
    np.testing.assert_allclose(grid.lower, [-10.0, 0.0])


def test_spreading_speed_kpp():
    result = spreading_speed(builtin_model("scalar_kpp"), **SPREADING_OPTIONS)
    for key in ("+e1", "-e1"):
        assert 1.6 < result.speeds[key] < 2.1
    assert result.speeds["+e1"] == pytest.approx(result.speeds["-e1"], rel=1e-6)
    assert result.as_dict()["level"] == 0.5


def test_spreading_front_hits_wall():
    with pytest.raises(FrontHitWall):
        spreading_speed(builtin_model("scalar_kpp"), T=10.0, length=5.0, resolution=5)


def test_cross_validate_speed():
    result = cross_validate_speed(builtin_model("scalar_kpp"),
                                  cell_grid=PeriodicGrid(1, 16), **SPREADING_OPTIONS)
    assert result["c_star"]["+e1"] == pytest.approx(2.0, rel=1e-8)
    assert result["relative_error"]["+e1"] < 0.2


def test_hair_trigger_persists():
    result = hair_trigger_test(builtin_model("scalar_kpp"), T=20.0,
                               cell_grid=PeriodicGrid(1, 16), snapshot_every=100)
    assert result.persisted
    assert result.floor.min() > 0.5
    assert result.lambda_1 == pytest.approx(-1.0, abs=1e-8)
    assert len(result.trajectory) == 5


def test_hair_trigger_coupled_system():
    result = hair_trigger_test(builtin_model("constant_coop2"), T=20.0,
                               cell_grid=PeriodicGrid(1, 16))
    assert result.persisted
    assert np.all(result.floor >= 1e-6)


def test_hair_trigger_needs_unstable_zero():
    with pytest.raises(HypothesisUnmet):
        hair_trigger_test(builtin_model("saturating_decay"), cell_grid=PeriodicGrid(1, 16))


def test_extinction():
    result = extinction_test(builtin_model("saturating_decay"), grid=PeriodicGrid(1, 16))
    assert result.extinct
    assert result.nonincreasing
    assert result.sup_trace[0] == 1.0
    assert result.sup_trace[-1] < 1e-4
    assert result.lambda_p == pytest.approx(0.5, abs=1e-9)
    assert result.as_dict()["extinct"] is True


def test_extinction_needs_stable_zero():
    with pytest.raises(HypothesisUnmet):
        extinction_test(builtin_model("scalar_kpp"), grid=PeriodicGrid(1, 16))
