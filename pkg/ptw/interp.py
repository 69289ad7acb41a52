import itertools

import numpy as np


def _node_counts(values, dim):
    return np.array(values.shape[:dim])


class PeriodicInterpolator(object):
    """Base interpolator for nodal values on the periodic unit cell.

    Node j on axis a sits at j / n_a. Trailing value axes (components,
    matrix entries, ...) are carried through unchanged.
    """

    def __init__(self, values, dim):
        self.dim = int(dim)
        self.values = np.asarray(values)
        self.counts = _node_counts(self.values, self.dim)
        self._setup()

    def __call__(self, x):
        x = np.mod(np.asarray(x, dtype=float).reshape(-1, self.dim), 1.0)
        return self._evaluate(x)

    @property
    def tail_shape(self):
        return self.values.shape[self.dim :]

    def _setup(self):
        pass


class PeriodicLinearInterpolator(PeriodicInterpolator):
    """Multilinear interpolation with wrap-around."""

    def _evaluate(self, x):
        scaled = x * self.counts
        base = np.floor(scaled).astype(int)
        frac = scaled - base
        result = np.zeros((len(x),) + self.tail_shape, dtype=self.values.dtype)
        for corner in itertools.product((0, 1), repeat=self.dim):
            corner = np.array(corner)
            index = tuple(
                np.mod(base[:, axis] + corner[axis], self.counts[axis])
                for axis in range(self.dim)
            )
            weight = np.prod(np.where(corner == 1, frac, 1 - frac), axis=1)
            result = result + weight.reshape((-1,) + (1,) * len(self.tail_shape)) * (
                self.values[index]
            )
        return result


class PeriodicTrigInterpolator(PeriodicInterpolator):
    """Trigonometric interpolation through the nodal values.

    The interpolant is smooth, so finite differences of it approximate the
    derivatives of smooth nodal data.
    """

    def _setup(self):
        axes = tuple(range(self.dim))
        self._coefficients = np.fft.fftn(self.values, axes=axes) / np.prod(self.counts)
        self._frequencies = [np.fft.fftfreq(n, d=1.0 / n) for n in self.counts]

    def _evaluate(self, x):
        waves = [
            np.exp(2j * np.pi * np.outer(x[:, axis], self._frequencies[axis]))
            for axis in range(self.dim)
        ]
        result = np.tensordot(waves[0], self._coefficients, axes=(1, 0))
        for axis in range(1, self.dim):
            result = np.einsum("pa,pa...->p...", waves[axis], result)
        return result.real


class FieldInterpolator(object):
    """Interpolated periodic field.

    Examples:
        Interpolate a tabulated scalar diffusion coefficient on an 8-node
        1-D cell:

        >>> field = FieldInterpolator(values, dim=1, method="linear")
        >>> field([[0.3], [1.3]])
    """

    method_map = {
        "linear": PeriodicLinearInterpolator,
        "trig": PeriodicTrigInterpolator,
    }

    def __init__(self, values, dim, method="linear"):
        try:
            base_interpolator = self.method_map[method.lower()]
        except KeyError:
            raise ValueError(f"Unrecognized interpolation method: '{method}'")
        self._interpolator = base_interpolator(values, dim)
        self.method = method.lower()

    def __call__(self, x):
        return self._interpolator(x)

    @property
    def dim(self):
        return self._interpolator.dim

    @property
    def counts(self):
        return self._interpolator.counts
