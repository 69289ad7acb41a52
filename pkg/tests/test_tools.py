import bz2
import gzip
import lzma

import numpy as np
import pytest

from ptw import tools
from ptw.errors import ZeroVector


def test_parse_integer():
    tools.parse_integer(1, None)
    tools.parse_integer(1.0, None)
    assert tools.parse_integer("3", None) == 3
    with pytest.raises(ValueError):
        tools.parse_integer(1.1, None)


def test_parse_float():
    assert tools.parse_float("2.5", None) == 2.5
    with pytest.raises(ValueError):
        tools.parse_float("inf", None)
    with pytest.raises(ValueError):
        tools.parse_float("abc", None)


@pytest.mark.parametrize("text, expected", [
    ("1,0", [1.0, 0.0]),
    ("0.6, 0.8", [0.6, 0.8]),
    ("-1", [-1.0]),
])
def test_parse_vector(text, expected):
    np.testing.assert_array_equal(tools.parse_vector(text, None), expected)


def test_parse_vector_invalid():
    with pytest.raises(ValueError):
        tools.parse_vector("", None)
    with pytest.raises(ValueError):
        tools.parse_int_vector("1.5,2", None)


@pytest.mark.parametrize("text, expected", [
    ("YES", True), ("true", True), ("1", True), ("no", False), ("False", False),
])
def test_parse_bool(text, expected):
    assert tools.parse_bool(text, None) is expected


def test_format_float():
    assert tools.format_float(2) == "2"
    assert tools.format_float(1 / 3) == "0.333333333"
    assert tools.format_vector([1, 0.5]) == "1,0.5"


def test_require():
    tools.require(True, "unused")
    with pytest.raises(ValueError, match="message"):
        tools.require(False, "message")
    with pytest.raises(ZeroVector):
        tools.require(False, "message", ZeroVector)


def test_unit_vector():
    np.testing.assert_allclose(tools.unit_vector([3, 4]), [0.6, 0.8])
    with pytest.raises(ZeroVector):
        tools.unit_vector([0, 0])


@pytest.mark.parametrize("vector, expected", [
    ([2, 0], [1, 0]),
    ([6, -9], [2, -3]),
    ([3, 4], [3, 4]),
    ([-4], [-1]),
])
def test_primitive_vector(vector, expected):
    np.testing.assert_array_equal(tools.primitive_vector(vector), expected)


def test_primitive_vector_invalid():
    with pytest.raises(ZeroVector):
        tools.primitive_vector([0, 0])
    with pytest.raises(ValueError):
        tools.primitive_vector([0.5, 1])


@pytest.mark.parametrize("p", [[3, 4], [1, 0], [0, 1], [2, 3, 5], [-3, 7], [6, 10, 15]])
def test_bezout_vector(p):
    k = tools.bezout_vector(np.array(p))
    assert int(np.dot(k, p)) == 1


def test_bezout_vector_known():
    np.testing.assert_array_equal(tools.bezout_vector(np.array([3, 4])), [-1, 1])


def test_nearest_rational_direction():
    np.testing.assert_array_equal(tools.nearest_rational_direction([0.6, 0.8]), [3, 4])
    np.testing.assert_array_equal(tools.nearest_rational_direction([1, 0]), [1, 0])
    p = tools.nearest_rational_direction([1, np.sqrt(2)], max_norm=20)
    assert np.linalg.norm(p) <= 20
    assert np.linalg.norm(tools.unit_vector(p) - tools.unit_vector([1, np.sqrt(2)])) < 0.05


def test_bounded_minimizer():
    x, (a, b) = tools.bounded_minimizer(lambda x: (x - 1.0) ** 2, 3.0, 0.0, tol=1e-8)
    assert x == pytest.approx(1.0, abs=1e-6)
    assert a <= x <= b
    assert b - a <= 2e-8


def test_bounded_minimizer_interval_clipped():
    x, (a, b) = tools.bounded_minimizer(lambda x: x, 0.0, 1.0, tol=1e-3)
    assert x < 1e-2
    assert a == max(0.0, x - 1e-3)
    assert b == pytest.approx(x + 1e-3)


@pytest.mark.parametrize("dim, count", [(1, 4), (2, 8), (3, 12)])
def test_sample_directions(dim, count):
    directions = tools.sample_directions(dim, count)
    assert directions.shape == (count, dim)
    np.testing.assert_allclose(np.linalg.norm(directions, axis=1), 1.0)


def test_sample_directions_planar():
    directions = tools.sample_directions(2, 4)
    np.testing.assert_allclose(directions, [[1, 0], [0, 1], [-1, 0], [0, -1]], atol=1e-15)


@pytest.mark.parametrize("opener, compression", [
    (gzip.open, "gzip"), (bz2.open, "bz2"), (lzma.open, "lzma"), (open, None),
])
def test_compression_detection(tmp_path, opener, compression):
    path = tmp_path / "config.cfg"
    with opener(path, "wt") as output_file:
        output_file.write("PTW_CONFIG_VERS = 1.0\n")
    assert tools._get_compression(path) == compression
    assert tools.is_kvn(path)
    with tools._open(path, "rt") as input_file:
        assert input_file.readline().startswith("PTW_CONFIG_VERS")


def test_is_kvn_xml(tmp_path):
    path = tmp_path / "config.xml"
    path.write_text('<?xml version="1.0" encoding="utf-8"?>\n<ptw version="1.0"/>\n')
    assert not tools.is_kvn(path)
