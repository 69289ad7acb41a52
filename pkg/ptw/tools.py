import bz2
import gzip
import lzma
import math
from functools import reduce

import numpy as np
from scipy.optimize import minimize_scalar

from ptw.errors import ZeroVector


def parse_str(input_string, section):
    """Parse string input.

    Args:
        input_string (str): String to parse.
        section (KeyValueSection): Section containing this value.

    Returns:
        parsed_str (str): Parsed string.
    """
    return str(input_string).strip()


def parse_float(input, section):
    """Parse a floating point value.

    Args:
        input: Any input value that can be cast as a float.
        section (KeyValueSection): Section containing this value.

    Returns:
        value (float): Parsed value.

    Raises:
        ValueError: Invalid or non-finite number.
    """
    value = float(input)
    if not math.isfinite(value):
        raise ValueError(f"Invalid number: '{input}'")
    return value


def parse_integer(input, section):
    """Parse integer value.

    Args:
        input: Any input value that can be cast as a number.
        section (KeyValueSection): Section containing this value.

    Returns:
        integer (int): Integer equivalent of input.

    Raises:
        ValueError: Invalid integer.
    """
    if float(input).is_integer():
        return int(float(input))
    else:
        raise ValueError(f"Invalid integer: '{input}'")


def parse_vector(input, section):
    """Parse a comma separated vector of floats.

    Args:
        input (str or sequence): '1,0' style string or sequence of numbers.
        section (KeyValueSection): Section containing this value.

    Returns:
        vector (ndarray): Parsed 1-D array.
    """
    if isinstance(input, str):
        entries = [entry for entry in input.replace(" ", "").split(",") if entry]
    else:
        entries = list(np.atleast_1d(input))
    if len(entries) == 0:
        raise ValueError("Empty vector")
    return np.array([parse_float(entry, section) for entry in entries])


def parse_int_vector(input, section):
    """Parse a comma separated vector of integers."""
    return np.array(
        [parse_integer(entry, section) for entry in parse_vector(input, section)],
        dtype=int,
    )


def parse_bool(input, section):
    """Parse a YES/NO style flag."""
    value = str(input).strip().lower()
    if value in ("yes", "true", "1"):
        return True
    elif value in ("no", "false", "0"):
        return False
    raise ValueError(f"Invalid flag: '{input}'")


def format_float(value):
    """Convert float to a common string format.

    Args:
        value: Any input that can be cast as a float.

    Returns:
        formatted_value (str): Float with 9 significant digits.
    """
    return f"{float(value):.9g}"


def format_vector(values):
    """Format a vector as a comma separated list of floats."""
    return ",".join(format_float(value) for value in np.atleast_1d(values))


def require(boolean, message, error=ValueError):
    """Require a boolean condition.

    Args:
        boolean (bool): Condition boolean.
        message (str): Error message.
        error (type, optional): Exception type raised on failure. Default
            is ValueError.

    Raises:
        error: message
    """
    if not boolean:
        raise error(message)


def unit_vector(vector):
    """Normalize a direction vector.

    Args:
        vector (array_like): Nonzero vector.

    Returns:
        e (ndarray): Vector scaled to unit length.

    Raises:
        ZeroVector: Input has zero length.
    """
    vector = np.asarray(vector, dtype=float)
    norm = np.linalg.norm(vector)
    require(norm > 0 and np.isfinite(norm), "Direction vector is zero", ZeroVector)
    return vector / norm


def primitive_vector(vector):
    """Reduce an integer vector by the gcd of its entries.

    Args:
        vector (array_like): Nonzero integer vector.

    Returns:
        p (ndarray): Integer vector with gcd of entries equal to 1.
    """
    p = np.asarray(vector)
    require(
        np.allclose(p, np.round(p)), f"Not an integer vector: {vector}", ValueError
    )
    p = np.round(p).astype(int)
    require(np.any(p != 0), "Direction vector is zero", ZeroVector)
    divisor = reduce(math.gcd, (abs(int(entry)) for entry in p))
    return p // divisor


def bezout_vector(p):
    """Find an integer vector k with k.p = gcd(p).

    Args:
        p (ndarray): Integer vector.

    Returns:
        k (ndarray): Integer coefficients of the extended Euclid recursion.
    """
    coefficients = [0] * len(p)
    current = 0
    for idx, entry in enumerate(p):
        entry = int(entry)
        if current == 0:
            if entry != 0:
                current = abs(entry)
                coefficients[idx] = 1 if entry > 0 else -1
            continue
        g, s, t = _extended_gcd(current, entry)
        coefficients = [s * value for value in coefficients]
        coefficients[idx] = t
        current = g
    return np.array(coefficients, dtype=int)


def _extended_gcd(a, b):
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        quotient = old_r // r
        old_r, r = r, old_r - quotient * r
        old_s, s = s, old_s - quotient * s
        old_t, t = t, old_t - quotient * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def nearest_rational_direction(e, max_norm=50):
    """Approximate a unit direction by a primitive integer vector.

    Args:
        e (array_like): Direction vector.
        max_norm (float, optional): Bound on |p|. Default is 50.

    Returns:
        p (ndarray): Primitive integer vector with |p| <= max_norm whose
            direction is closest to e.
    """
    e = unit_vector(e)
    best, best_error = None, np.inf
    for scale in np.arange(1, max_norm + 1):
        candidate = np.round(e * scale).astype(int)
        if not np.any(candidate):
            continue
        candidate = primitive_vector(candidate)
        if np.linalg.norm(candidate) > max_norm:
            continue
        error = np.linalg.norm(unit_vector(candidate) - e)
        if error < best_error - 1e-15:
            best, best_error = candidate, error
    return best


def bounded_minimizer(func, a, b, tol=1e-5):
    """Minimize a unimodal function on [a, b] with bounded Brent.

    Args:
        func (callable): Scalar function of one variable.
        a (float): Interval start.
        b (float): Interval end.
        tol (float, optional): Absolute tolerance on the minimizer.

    Returns:
        x (float): Minimizer.
        interval (tuple): (x - tol, x + tol) clipped to [a, b].
    """
    a, b = min(a, b), max(a, b)
    result = minimize_scalar(func, bounds=(a, b), method="bounded",
                             options={"xatol": tol})
    x = float(result.x)
    return x, (max(a, x - tol), min(b, x + tol))


def sample_directions(dim, count):
    """Evenly spread unit directions.

    In 1-D only the two directions +1 and -1 exist; they are repeated to
    fill the requested count. In 2-D directions are equally spaced in angle;
    in higher dimensions a Fibonacci lattice on the sphere spanned by the
    first three axes is used.

    Args:
        dim (int): Spatial dimension.
        count (int): Number of directions.

    Returns:
        directions (ndarray): Array of shape (count, dim).
    """
    if dim == 1:
        return np.array([[1.0 if idx % 2 == 0 else -1.0] for idx in range(count)])
    if dim == 2:
        angles = 2 * np.pi * np.arange(count) / count
        return np.column_stack((np.cos(angles), np.sin(angles)))
    directions = np.zeros((count, dim))
    golden = np.pi * (3 - np.sqrt(5))
    for idx in range(count):
        z = 1 - 2 * (idx + 0.5) / count
        radius = np.sqrt(1 - z**2)
        directions[idx, :3] = (
            radius * np.cos(golden * idx),
            radius * np.sin(golden * idx),
            z,
        )
    return directions / np.linalg.norm(directions, axis=1)[:, None]


def is_kvn(file_path):
    """Determine if a config file is KVN or XML.

    Args:
        file_path (str or Path): Path of file to check.

    returns:
        result (bool): True if file is KVN, false if XML.
    """
    with _open(file_path, "rt") as target_file:
        if "<?xml" in target_file.readline():
            result = False
        else:
            result = True
    return result


def _get_compression(path):
    headers = {
        b"\x1F\x8b": "gzip",
        b"\x42\x5A\x68": "bz2",
        b"\x5d\x00\x00": "lzma",
        b"\xFD\x37\x7A\x58\x5A\x00": "lzma",
    }
    compression = None
    with open(path, "rb") as fid:
        header = fid.read(6)
        for key, value in headers.items():
            if header.startswith(key):
                compression = value
                break
    return compression


def _open(path, mode, compression=None):
    if mode == "rt":
        compression = _get_compression(path)
    openers = {"gzip": gzip.open, "bz2": bz2.open, "lzma": lzma.open, None: open}
    return openers[compression](path, mode)
