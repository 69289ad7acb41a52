import csv

import numpy as np

from ptw.base import Constraint, ConstraintSpecification
from ptw.interp import FieldInterpolator
from ptw.tools import format_float, require


class ConstrainEigenfunctionShape(Constraint):
    def func(self, pair):
        require(pair.eigenfunction.ndim == 2, "Eigenfunction must have shape (d, M)")
        require(
            np.all(np.isfinite(pair.eigenfunction)), "Eigenfunction is not finite"
        )


class ConstrainEigenfunctionNormalization(Constraint):
    def func(self, pair):
        require(
            abs(np.abs(pair.eigenfunction).max() - 1.0) <= 1e-12,
            "Eigenfunction is not sup-normalized",
        )


class EigenPair(object):
    """Principal eigenvalue with its positive eigenfunction.

    Attributes:
        value (float): Principal eigenvalue k.
        eigenfunction (ndarray): Nodal values with shape (d, M), sup-norm 1.
        grid: Grid the eigenfunction lives on.
        residual (float): Sup-norm of (Op - k) phi.
        iterations (int): Power-iteration count.
        lam (float): Exponential weight the operator was assembled with.
        direction (ndarray): Unit direction, None for Dirichlet problems.
        bracket (tuple): Max-min / min-max bounds (lower, upper) for value.
    """

    _constraint_spec = ConstraintSpecification(
        ConstrainEigenfunctionShape, ConstrainEigenfunctionNormalization
    )

    def __init__(
        self,
        value,
        eigenfunction,
        grid,
        residual,
        iterations,
        lam=0.0,
        direction=None,
        bracket=None,
    ):
        self.value = float(value)
        self.eigenfunction = np.asarray(eigenfunction, dtype=float)
        self.grid = grid
        self.residual = float(residual)
        self.iterations = int(iterations)
        self.lam = float(lam)
        self.direction = direction
        self.bracket = bracket
        self._constraint_spec.apply(self)

    def __repr__(self):
        return f"EigenPair(k={self.value:.9g}, lambda={self.lam:.6g})"

    @property
    def components(self):
        return self.eigenfunction.shape[0]

    @property
    def min_value(self):
        """Smallest nodal value of the eigenfunction."""
        return float(self.eigenfunction.min())

    def nodal(self):
        """Eigenfunction reshaped to (n_1, ..., n_N, d)."""
        return np.moveaxis(
            self.eigenfunction.reshape((self.components,) + tuple(self.grid.shape)),
            0,
            -1,
        )

    def interpolator(self, method="trig"):
        """Periodic interpolant of the eigenfunction on the unit cell.

        Args:
            method (str, optional): 'trig' (default) or 'linear'.

        Returns:
            interpolator (FieldInterpolator): Maps (P, N) points to (P, d).
        """
        return FieldInterpolator(self.nodal(), self.grid.dim, method=method)

    def save_as(self, file_path):
        """Write the eigenfunction as CSV with columns x_1..x_N, phi_1..phi_d."""
        nodes = self.grid.nodes
        with open(file_path, "w", newline="") as output_file:
            writer = csv.writer(output_file)
            writer.writerow(
                [f"x_{idx + 1}" for idx in range(nodes.shape[1])]
                + [f"phi_{idx + 1}" for idx in range(self.components)]
            )
            for node, values in zip(nodes, self.eigenfunction.T):
                writer.writerow(
                    [format_float(value) for value in node]
                    + [format_float(value) for value in values]
                )

    def copy(self):
        """Create an independent copy of this instance."""
        return EigenPair(
            self.value,
            self.eigenfunction.copy(),
            self.grid,
            self.residual,
            self.iterations,
            lam=self.lam,
            direction=self.direction,
            bracket=self.bracket,
        )


class ConstrainIncreasingSamples(Constraint):
    def func(self, curve):
        require(
            np.all(np.diff(curve.lambdas) > 0),
            "Dispersion samples must have strictly increasing lambda",
        )


class DispersionCurve(object):
    """Samples of lambda -> k(lambda, e).

    Attributes:
        direction (ndarray): Unit direction e.
        lambdas (ndarray): Increasing lambda samples.
        values (ndarray): k(lambda, e) at each sample.
        residuals (ndarray): Eigen residual of each sample.
        iterations (ndarray): Power iterations used by each sample.
        provenance (dict): Grid and tolerances used.

    Examples:
        >>> curve = dispersion_curve(model, [1.0], np.linspace(0, 3, 31), grid)
        >>> curve.save_as("dispersion.csv")
    """

    _constraint_spec = ConstraintSpecification(ConstrainIncreasingSamples)

    def __init__(self, direction, lambdas, values, residuals, iterations,
                 provenance=None):
        self.direction = np.asarray(direction, dtype=float)
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.residuals = np.asarray(residuals, dtype=float)
        self.iterations = np.asarray(iterations, dtype=int)
        self.provenance = dict(provenance or {})
        self._constraint_spec.apply(self)

    def __repr__(self):
        return f"DispersionCurve(samples: {len(self)})"

    def __len__(self):
        return len(self.lambdas)

    def __iter__(self):
        return iter(self.samples)

    @classmethod
    def _from_pairs(cls, direction, pairs, provenance=None):
        pairs = sorted(pairs, key=lambda pair: pair.lam)
        return cls(
            direction,
            [pair.lam for pair in pairs],
            [pair.value for pair in pairs],
            [pair.residual for pair in pairs],
            [pair.iterations for pair in pairs],
            provenance=provenance,
        )

    @property
    def samples(self):
        return list(zip(self.lambdas.tolist(), self.values.tolist()))

    def rows(self):
        return [
            [format_float(lam), format_float(k), format_float(res), str(count)]
            for lam, k, res, count in zip(
                self.lambdas, self.values, self.residuals, self.iterations
            )
        ]

    def save_as(self, file_path):
        """Write the curve as CSV with columns lambda,k,residual,iterations.

        Args:
            file_path (str or Path): Desired path for output CSV.
        """
        with open(file_path, "w", newline="") as output_file:
            writer = csv.writer(output_file)
            writer.writerow(["lambda", "k", "residual", "iterations"])
            writer.writerows(self.rows())

    def as_dict(self):
        return {
            "direction": self.direction.tolist(),
            "lambda": self.lambdas.tolist(),
            "k": self.values.tolist(),
            "residual": self.residuals.tolist(),
            "iterations": self.iterations.tolist(),
            "provenance": self.provenance,
        }


class SpeedResult(object):
    """Minimal speed in one direction.

    Attributes:
        direction (ndarray): Unit direction e.
        c_star (float): Minimal speed c*(e).
        lambda_star (float): Minimizer of -k(lambda, e) / lambda.
        k_at_star (float): k(lambda_star, e).
        bracket (tuple): Interval around lambda_star of the search tolerance.
        curve (DispersionCurve): Every k evaluation made by the search.
    """

    def __init__(self, direction, c_star, lambda_star, k_at_star, bracket, curve):
        self.direction = np.asarray(direction, dtype=float)
        self.c_star = float(c_star)
        self.lambda_star = float(lambda_star)
        self.k_at_star = float(k_at_star)
        self.bracket = tuple(float(value) for value in bracket)
        self.curve = curve

    def __repr__(self):
        return f"SpeedResult(c_star={self.c_star:.9g}, lambda_star={self.lambda_star:.9g})"

    @property
    def identity_residual(self):
        """|k(lambda*) + c* lambda*|, zero at an exact minimizer."""
        return abs(self.k_at_star + self.c_star * self.lambda_star)

    def as_dict(self):
        return {
            "direction": self.direction.tolist(),
            "c_star": self.c_star,
            "lambda_star": self.lambda_star,
            "k_at_star": self.k_at_star,
            "bracket": list(self.bracket),
        }


class SpeedPolar(object):
    """Minimal speeds over a set of directions.

    Attributes:
        results (list): SpeedResult per direction, in input order.
        max_jump (float): Largest |c*| difference between adjacent
            directions, cyclically.
    """

    def __init__(self, results):
        self.results = list(results)
        speeds = np.array([result.c_star for result in self.results])
        self.max_jump = float(np.abs(speeds - np.roll(speeds, 1)).max())

    def __repr__(self):
        return f"SpeedPolar(directions: {len(self.results)})"

    def __iter__(self):
        return iter(self.results)

    def __len__(self):
        return len(self.results)

    def save_as(self, file_path):
        """Write CSV with columns e_1..e_N,c_star,lambda_star."""
        dim = self.results[0].direction.size
        with open(file_path, "w", newline="") as output_file:
            writer = csv.writer(output_file)
            writer.writerow([f"e_{idx + 1}" for idx in range(dim)]
                            + ["c_star", "lambda_star"])
            for result in self.results:
                writer.writerow(
                    [format_float(value) for value in result.direction]
                    + [format_float(result.c_star), format_float(result.lambda_star)]
                )


class CharacteristicRoots(object):
    """Classification of the roots of k(lambda, e) + c lambda = 0.

    Attributes:
        kind (str): 'two_roots', 'double_root' or 'no_root'.
        speed (float): Tested speed c.
        c_star (float): Minimal speed it was compared with.
        lambda_minus (float): Smaller root (decay rate), None if no root.
        lambda_plus (float): Larger root, None if no root.
    """

    kinds = ("two_roots", "double_root", "no_root")

    def __init__(self, kind, speed, c_star, lambda_minus=None, lambda_plus=None):
        require(kind in self.kinds, f"Unknown root kind '{kind}'")
        self.kind = kind
        self.speed = float(speed)
        self.c_star = float(c_star)
        self.lambda_minus = lambda_minus
        self.lambda_plus = lambda_plus

    def __repr__(self):
        if self.kind == "no_root":
            return f"CharacteristicRoots(no_root, c={self.speed:.6g})"
        return (
            f"CharacteristicRoots({self.kind}, {self.lambda_minus:.9g}, "
            f"{self.lambda_plus:.9g})"
        )

    def __bool__(self):
        return self.kind != "no_root"

    @property
    def double_root(self):
        return self.lambda_minus if self.kind == "double_root" else None

    def as_dict(self):
        return {
            "kind": self.kind,
            "speed": self.speed,
            "c_star": self.c_star,
            "lambda_minus": self.lambda_minus,
            "lambda_plus": self.lambda_plus,
        }
