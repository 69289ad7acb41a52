import numpy as np
import pytest

from ptw.components.builtin import builtin_model
from ptw.disc import CylinderGrid, PeriodicGrid
from ptw.errors import (
    CFLViolation,
    HypothesisUnmet,
    NoConvergence,
    SpeedBelowMinimal,
    UnstableZeroState,
)
from ptw.speed import minimal_speed
from ptw.wave import (
    MAX_ITER,
    MovingBoundarySolver,
    _default_h_r,
    _tail_slope,
    construct_pulsating_wave,
    fixed_point_map,
    rational_frame,
    refine_left_boundary,
    solve_moving_boundary,
    speed_dichotomy,
    verify_wave,
)

# shortened cylinder; the tail still decays below 1e-6 at r_max
WAVE_OPTIONS = {"a": -20.0, "r_max": 40.0, "h_r": 0.25, "tol": 1e-6, "max_iter": 400,
                "cell_grid": PeriodicGrid(1, 16)}


@pytest.fixture(scope="module")
def kpp_wave():
    model = builtin_model("scalar_kpp")
    return model, construct_pulsating_wave(model, rational_frame([1]), 2.5, **WAVE_OPTIONS)


def test_frame_one_dimensional():
    frame = rational_frame([2])
    np.testing.assert_array_equal(frame.p, [1])
    assert frame.tau1 == 1.0
    assert len(frame.cross_lengths) == 0


def test_frame_axis_direction():
    frame = rational_frame([2, 0])
    np.testing.assert_array_equal(frame.p, [1, 0])
    assert frame.tau1 == pytest.approx(1.0)
    np.testing.assert_allclose(frame.cross_lengths, [1.0])
    assert frame.spans_lattice


def test_frame_rational_direction():
    frame = rational_frame([3, 4])
    assert frame.tau1 == pytest.approx(0.2)
    np.testing.assert_allclose(frame.e, [0.6, 0.8])
    np.testing.assert_array_equal(frame.basis[1], [4, -3])
    np.testing.assert_allclose(frame.cross_lengths, [5.0])
    assert int(frame.k0 @ frame.p) == 1
    np.testing.assert_allclose(frame.twist, [-1.4])
    assert frame.twist_denominators() == [25]
    assert frame.spans_lattice


def test_frame_coordinates_roundtrip():
    frame = rational_frame([1, 2])
    x = np.array([[0.3, -1.2], [2.0, 0.5]])
    np.testing.assert_allclose(frame.to_lab(frame.to_frame(x)), x, atol=1e-12)
    np.testing.assert_allclose(frame.to_frame(x)[:, 0], x @ frame.e)


def test_frame_sublattice_warning():
    with pytest.warns(UserWarning, match="sublattice"):
        frame = rational_frame([1, 1, 1])
    assert not frame.spans_lattice


def test_frame_zero_direction():
    with pytest.raises(ValueError):
        rational_frame([0, 0])


def test_default_h_r():
    assert _default_h_r(1.0, 0.5) == pytest.approx(0.125)
    assert _default_h_r(0.2, 2.0) == pytest.approx(0.05)


def test_moving_boundary_keeps_equilibria():
    model = builtin_model("scalar_kpp")
    frame = rational_frame([1])
    grid = CylinderGrid(-5.0, 5.0, 0.25)
    ones = np.ones((1, grid.size))
    np.testing.assert_allclose(solve_moving_boundary(model, frame, 2.0, grid, ones, 1.0),
                               ones, atol=1e-12)
    zeros = np.zeros((1, grid.size))
    np.testing.assert_array_equal(
        fixed_point_map(model, frame, 2.0, grid, zeros), zeros
    )


def test_moving_boundary_cfl():
    model = builtin_model("scalar_kpp")
    grid = CylinderGrid(-5.0, 5.0, 0.25)
    with pytest.raises(CFLViolation):
        MovingBoundarySolver(model, rational_frame([1]), 2.0, grid, horizon=1.0, steps=1)


def test_kpp_wave_converges(kpp_wave):
    model, profile = kpp_wave
    assert not profile.critical
    assert profile.residual < 1e-6
    assert len(profile.trace) <= 400
    assert profile.c_star == pytest.approx(2.0, rel=1e-8)
    assert profile.period == pytest.approx(0.4)
    assert profile.diagnostics["decay_rate"] == pytest.approx(0.5, abs=1e-8)
    assert profile.diagnostics["left_plateau_min"] > 0.9
    assert profile.diagnostics["tail_value"] < 1e-6


def test_kpp_wave_profile_shape(kpp_wave):
    _, profile = kpp_wave
    u = profile.values[0]
    assert np.all(u >= 0)
    assert np.all(u <= 1 + 1e-12)
    assert np.all(np.diff(u) <= 1e-8)
    assert profile.diagnostics["right_tail_slope"] == pytest.approx(0.5, rel=0.05)


def test_kpp_wave_verifies(kpp_wave):
    model, profile = kpp_wave
    report = verify_wave(model, profile)
    assert report["pulsating"]["passed"]
    assert report["limits"]["passed"]
    assert report["speed"]["passed"]
    assert report["monotone"]["passed"]
    assert report["passed"]


def test_kpp_wave_evaluation(kpp_wave):
    _, profile = kpp_wave
    x = np.array([[-10.0], [0.0], [10.0]])
    now = profile(0.0, x)
    later = profile(5 * profile.period, x + 5 * profile.frame.tau1)
    np.testing.assert_allclose(later, now, atol=1e-12)
    assert now.shape == (3, 1)
    assert now[0, 0] > now[1, 0] > now[2, 0]
    with pytest.raises(ValueError):
        profile(0.1, x)


def test_kpp_wave_outputs(tmp_path, kpp_wave):
    _, profile = kpp_wave
    path = tmp_path / "wave.csv"
    profile.save_as(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,u_1"
    assert len(lines) == profile.grid.n_r + 1
    summary = profile.as_dict()
    assert summary["direction"] == [1]
    assert summary["iterations"] == len(profile.trace)
    assert summary["a"] == -20.0


def test_wave_self_compare(kpp_wave):
    _, profile = kpp_wave
    compare = profile - profile
    assert compare.sup_norm == 0.0
    assert compare.common == profile.grid.n_r


def test_refine_left_boundary():
    model = builtin_model("scalar_kpp")
    options = dict(WAVE_OPTIONS, a=-10.0)
    result = refine_left_boundary(model, rational_frame([1]), 2.5, **options)
    assert result["a"] == -10.0
    assert result["a_doubled"] == -20.0
    assert result["difference"] < 1e-4


def test_wave_below_minimal_speed():
    model = builtin_model("scalar_kpp")
    with pytest.raises(SpeedBelowMinimal):
        construct_pulsating_wave(model, rational_frame([1]), 1.5,
                                 cell_grid=PeriodicGrid(1, 16))


def test_speed_dichotomy_below_minimal_speed():
    model = builtin_model("scalar_kpp")
    result = speed_dichotomy(model, rational_frame([1]), cell_grid=PeriodicGrid(1, 16))
    assert result["speed"] == pytest.approx(1.8, rel=1e-7)
    assert result["outcome"] in ("clamped", "vanished", "no_convergence")
    assert result["failed"]
    if result["outcome"] == "clamped":
        assert result["pulsating_residual"] >= 1e-5


def test_speed_dichotomy_above_minimal_speed():
    model = builtin_model("scalar_kpp")
    result = speed_dichotomy(model, rational_frame([1]), factor=1.25, **WAVE_OPTIONS)
    assert result["outcome"] == "converged"
    assert not result["failed"]
    assert result["pulsating_residual"] < 1e-5
    assert result["sup"] > 0.9


def test_speed_dichotomy_needs_sublinear_model():
    with pytest.raises(HypothesisUnmet):
        speed_dichotomy(builtin_model("feedback_loop", p=2.0), rational_frame([1]),
                        cell_grid=PeriodicGrid(1, 16))


def test_critical_wave():
    model = builtin_model("scalar_kpp")
    profile = construct_pulsating_wave(model, rational_frame([1]), 2.0,
                                       cell_grid=PeriodicGrid(1, 16))
    assert profile.critical
    assert profile.residual < 1e-6
    assert MAX_ITER < len(profile.trace) <= 10 * MAX_ITER
    assert profile.diagnostics["decay_rate"] == pytest.approx(1.0, abs=1e-6)
    assert verify_wave(model, profile)["passed"]


def test_critical_wave_iteration_cap():
    model = builtin_model("scalar_kpp")
    with pytest.raises(NoConvergence) as error:
        construct_pulsating_wave(model, rational_frame([1]), 2.0, max_iter=20,
                                 cell_grid=PeriodicGrid(1, 16))
    assert error.value.iterations == 20
    assert len(error.value.trace) == 20


def test_rational_direction_wave():
    model = builtin_model("constant_coop2", dim=2)
    frame = rational_frame([3, 4])
    assert frame.tau1 == pytest.approx(0.2, abs=1e-15)
    c = 1.2 * 2.0
    profile = construct_pulsating_wave(model, frame, c, max_iter=10000,
                                       cell_grid=PeriodicGrid(2, 8))
    assert profile.c_star == pytest.approx(2.0, rel=1e-6)
    assert profile.residual < 1e-6
    x = np.array([[0.3, 0.2], [1.0, -0.7], [-2.0, 1.5], [4.0, 2.5]])
    # k = (1, 0) advances the wave by k.e / c = 3 periods
    shifted = profile(3 * profile.period, x + np.array([1.0, 0.0]))
    np.testing.assert_allclose(shifted, profile(0.0, x), atol=1e-3)
    decay = profile.diagnostics["decay_rate"]
    assert decay == pytest.approx(1.2 - np.sqrt(1.2**2 - 1), rel=1e-6)
    assert profile.diagnostics["right_tail_slope"] == pytest.approx(decay, rel=0.08)


@pytest.mark.parametrize("name, params", [
    ("feedback_loop", {"p": 1.0}),
    ("rabies_sir", {}),
])
def test_subhomogeneous_wave_is_monotone(name, params):
    model = builtin_model(name, **params)
    grid = PeriodicGrid(1, 16)
    c = 1.2 * minimal_speed(model, [1.0], grid).c_star
    profile = construct_pulsating_wave(model, rational_frame([1]), c, max_iter=4000,
                                       cell_grid=grid)
    report = verify_wave(model, profile, checks={"monotone"})
    assert report["monotone"]["passed"] is True


def test_tail_slope_uses_slowest_component():
    grid = CylinderGrid(-10.0, 30.0, 0.25)
    values = np.zeros((2, grid.n_r))
    values[1] = 0.3 * np.exp(-0.5 * grid.r)
    assert _tail_slope(values, grid) == pytest.approx(0.5, rel=1e-9)
    values[0] = np.exp(-2.0 * grid.r)
    assert _tail_slope(values, grid) == pytest.approx(0.5, rel=1e-9)


def test_wave_refused_for_stable_zero_state():
    with pytest.raises(UnstableZeroState):
        construct_pulsating_wave(builtin_model("saturating_decay"), rational_frame([1]),
                                 1.0, cell_grid=PeriodicGrid(1, 16))


def test_wave_needs_sublinear_model():
    with pytest.raises(HypothesisUnmet):
        construct_pulsating_wave(builtin_model("feedback_loop", p=2.0),
                                 rational_frame([1]), 3.0)
