import numpy as np
import pytest

from ptw.compare import FieldCompare, ProfileCompare
from ptw.disc import CylinderGrid
from ptw.wave import WaveProfile, rational_frame


def _profile(a, r_max=4.0, h_r=0.5, offset=0.0):
    grid = CylinderGrid(a, r_max, h_r)
    values = np.exp(-np.maximum(grid.r, 0.0))[None, :] + offset
    return WaveProfile(rational_frame([1]), 2.5, 2.0, grid, values, [1e-7], {}, 1e-6)


def test_field_self_difference():
    u = np.array([[0.0, 0.5, 1.0]])
    compare = FieldCompare(u, u)
    assert compare.sup_norm == 0.0
    assert compare.is_ordered
    assert len(compare.violations) == 0


def test_field_ordering():
    lower = np.array([[0.1, 0.2], [0.3, 0.4]])
    upper = lower + np.array([[0.0, 0.1], [-0.05, 0.2]])
    compare = FieldCompare(lower, upper)
    assert compare.sup_norm == pytest.approx(0.2)
    assert not compare.is_ordered
    np.testing.assert_array_equal(compare.violations, [[1, 0]])
    np.testing.assert_allclose(compare.component_norms, [0.1, 0.2])
    assert FieldCompare(lower, upper, tol=0.05).is_ordered


def test_field_shape_mismatch():
    with pytest.raises(ValueError):
        FieldCompare(np.zeros((1, 3)), np.zeros((1, 4)))


def test_profile_compare_common_nodes():
    short = _profile(-2.0)
    long = _profile(-4.0)
    compare = long - short
    assert isinstance(compare, ProfileCompare)
    assert compare.offset == 4
    assert compare.common == short.grid.n_r
    assert compare.sup_norm == 0.0


def test_profile_compare_difference():
    compare = _profile(-2.0, offset=0.25) - _profile(-2.0)
    assert compare.sup_norm == pytest.approx(0.25)
    assert compare.is_ordered


@pytest.mark.parametrize("other", [
    {"a": -2.0, "h_r": 0.25},
    {"a": -2.25},
])
def test_profile_compare_incompatible(other):
    with pytest.raises(ValueError):
        ProfileCompare(_profile(-2.0), _profile(**other))
