import numpy as np
import pytest

from ptw.components.builtin import builtin_model
from ptw.disc import PeriodicGrid
from ptw.errors import UnstableZeroState
from ptw.speed import characteristic_roots, minimal_speed, speed_polar


@pytest.fixture
def grid():
    return PeriodicGrid(1, 16)


@pytest.mark.parametrize("r", [1.0, 4.0, 0.25])
def test_kpp_minimal_speed(grid, r):
    result = minimal_speed(builtin_model("scalar_kpp", r=r), [1.0], grid)
    assert result.c_star == pytest.approx(2 * np.sqrt(r), rel=1e-8)
    assert result.lambda_star == pytest.approx(np.sqrt(r), abs=1e-5)
    assert result.identity_residual < 1e-8
    assert result.k_at_star == pytest.approx(-2 * r, rel=1e-6)
    a, b = result.bracket
    assert a <= result.lambda_star <= b


def test_minimal_speed_records_dispersion(grid):
    result = minimal_speed(builtin_model("scalar_kpp"), [1.0], grid)
    curve = result.curve
    assert len(curve) > 5
    assert curve.lambdas[0] == 0.0
    np.testing.assert_allclose(curve.values, -curve.lambdas**2 - 1, atol=1e-9)
    assert result.as_dict()["c_star"] == result.c_star


def test_coupled_minimal_speed(grid):
    # k(lambda) = -lambda^2 - 1
    result = minimal_speed(builtin_model("constant_coop2"), [1.0], grid)
    assert result.c_star == pytest.approx(2.0, rel=1e-8)


def test_stable_zero_state_has_no_speed(grid):
    with pytest.raises(UnstableZeroState):
        minimal_speed(builtin_model("saturating_decay"), [1.0], grid)


def test_periodic_medium_speed_bounds():
    result = minimal_speed(builtin_model("periodic_scalar", amplitude=0.5), [1.0],
                           PeriodicGrid(1, 32))
    assert 2.0 - 1e-3 <= result.c_star <= 2 * np.sqrt(1.5)


def test_characteristic_roots(grid):
    model = builtin_model("scalar_kpp")
    roots = characteristic_roots(model, [1.0], 2.5, grid)
    assert roots.kind == "two_roots"
    assert roots.lambda_minus == pytest.approx(0.5, abs=1e-8)
    assert roots.lambda_plus == pytest.approx(2.0, abs=1e-8)
    assert roots
    assert roots.double_root is None
    assert roots.c_star == pytest.approx(2.0)


def test_characteristic_roots_at_and_below_minimal_speed(grid):
    model = builtin_model("scalar_kpp")
    speed = minimal_speed(model, [1.0], grid)
    double = characteristic_roots(model, [1.0], speed.c_star, grid, speed=speed)
    assert double.kind == "double_root"
    assert double.double_root == pytest.approx(1.0, abs=1e-5)
    below = characteristic_roots(model, [1.0], 1.5, grid, speed=speed)
    assert below.kind == "no_root"
    assert not below
    assert below.as_dict()["lambda_minus"] is None


def test_anisotropic_speed_polar():
    model = builtin_model("scalar_kpp", dim=2, diffusion_matrix=[[2.0, 0.0], [0.0, 1.0]])
    polar = speed_polar(model, [[1.0, 0.0], [0.0, 1.0]], PeriodicGrid(2, 8))
    speeds = [result.c_star for result in polar]
    assert speeds[0] == pytest.approx(2 * np.sqrt(2), rel=1e-7)
    assert speeds[1] == pytest.approx(2.0, rel=1e-7)
    assert polar.max_jump == pytest.approx(2 * np.sqrt(2) - 2, rel=1e-6)
    assert len(polar) == 2


def test_speed_polar_needs_two_directions(grid):
    with pytest.raises(ValueError):
        speed_polar(builtin_model("scalar_kpp"), [[1.0]], grid)


def test_speed_polar_csv(tmp_path, grid):
    polar = speed_polar(builtin_model("scalar_kpp"), [[1.0], [-1.0]], grid)
    path = tmp_path / "speed.csv"
    polar.save_as(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "e_1,c_star,lambda_star"
    assert lines[1].startswith("1,2,")
    assert lines[2].startswith("-1,2,")
