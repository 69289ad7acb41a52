import numpy as np
import pytest

from ptw.interp import FieldInterpolator


def _nodes(n):
    return np.arange(n) / n


@pytest.mark.parametrize("method", ["linear", "trig"])
def test_interpolation_at_nodes(method):
    values = np.sin(2 * np.pi * _nodes(8))[:, None]
    field = FieldInterpolator(values, dim=1, method=method)
    np.testing.assert_allclose(field(_nodes(8)[:, None]), values, atol=1e-12)


@pytest.mark.parametrize("method", ["linear", "trig"])
def test_interpolation_periodic(method):
    values = np.cos(2 * np.pi * _nodes(8))[:, None]
    field = FieldInterpolator(values, dim=1, method=method)
    x = np.array([[0.3], [0.61]])
    np.testing.assert_allclose(field(x + 1.0), field(x), atol=1e-12)
    np.testing.assert_allclose(field(x - 3.0), field(x), atol=1e-12)


def test_linear_weights():
    values = np.array([0.0, 1.0, 3.0, 2.0])
    field = FieldInterpolator(values, dim=1, method="linear")
    np.testing.assert_allclose(field([[0.3]]), [0.8 * 1.0 + 0.2 * 3.0])
    np.testing.assert_allclose(field([[0.875]]), [1.0])


def test_trig_reproduces_low_modes():
    values = np.cos(2 * np.pi * _nodes(16))
    field = FieldInterpolator(values, dim=1, method="trig")
    x = np.linspace(0, 1, 37)[:, None]
    np.testing.assert_allclose(field(x), np.cos(2 * np.pi * x[:, 0]), atol=1e-12)


def test_two_dimensional_tail_shape():
    n = 6
    X, Y = np.meshgrid(_nodes(n), _nodes(n), indexing="ij")
    values = np.stack([np.ones_like(X), X + 0 * Y], axis=-1)
    field = FieldInterpolator(values, dim=2, method="linear")
    result = field([[0.25, 0.5], [0.5, 0.1]])
    assert result.shape == (2, 2)
    np.testing.assert_allclose(result[:, 0], 1.0)


def test_interpolation_method_invalid():
    with pytest.raises(ValueError):
        FieldInterpolator(np.ones(4), dim=1, method="cubic")
