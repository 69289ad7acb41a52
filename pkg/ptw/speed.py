import logging

import numpy as np
from scipy.optimize import brentq

from ptw.components.types import (
    CharacteristicRoots,
    DispersionCurve,
    SpeedPolar,
    SpeedResult,
)
from ptw.eigen import k_of
from ptw.errors import BracketFailure, UnstableZeroState
from ptw.tools import bounded_minimizer, require, unit_vector

logger = logging.getLogger(__name__)

LAMBDA_FLOOR = 1e-6
LAMBDA_CAP = 1e4


class _Dispersion(object):
    """Memoized lambda -> k(lambda, e) for one model, direction and grid."""

    def __init__(self, model, e, grid, **solver_options):
        self.model = model
        self.e = unit_vector(e)
        self.grid = grid
        self.solver_options = solver_options
        self.pairs = {}

    def pair(self, lam):
        lam = float(lam)
        if lam not in self.pairs:
            self.pairs[lam] = k_of(self.model, self.e, lam, self.grid,
                                   **self.solver_options)
        return self.pairs[lam]

    def __call__(self, lam):
        return self.pair(lam).value

    def curve(self):
        provenance = {"points_per_axis": list(self.grid.points_per_axis)}
        return DispersionCurve._from_pairs(self.e, self.pairs.values(), provenance)


def _speed_bracket(g):
    lo, mid, hi = 0.5, 1.0, 2.0
    while g(hi) < g(mid):
        lo, mid, hi = mid, hi, 2 * hi
        require(hi <= LAMBDA_CAP, "Minimizer of -k/lambda not bracketed above",
                BracketFailure)
    while g(lo) < g(mid):
        lo, mid, hi = lo / 2, lo, mid
        require(lo >= LAMBDA_FLOOR, "Minimizer of -k/lambda not bracketed below",
                BracketFailure)
    return lo, hi


def minimal_speed(model, e, grid, tol=1e-8, dispersion=None, **solver_options):
    """Minimal speed c*(e) = min over lambda > 0 of -k(lambda, e) / lambda.

    Args:
        model (ModelSpec): Model with k(0, e) < 0.
        e (array_like): Direction.
        grid (PeriodicGrid): Discrete unit cell.
        tol (float, optional): Relative tolerance on lambda.
        **solver_options: Passed to the eigen solver.

    Returns:
        result (SpeedResult): c*, the minimizer and every sampled k.

    Raises:
        UnstableZeroState: k(0, e) >= 0; no front exists.
        BracketFailure: The minimizer could not be bracketed.

    Examples:
        >>> minimal_speed(builtin_model("scalar_kpp", r=4), [1.0], grid)
        SpeedResult(c_star=4, lambda_star=2)
    """
    k = dispersion or _Dispersion(model, e, grid, **solver_options)
    k0 = k(0.0)
    require(
        k0 < 0,
        f"k(0, e) = {k0:.9g} >= 0: the zero state is stable",
        UnstableZeroState,
    )

    def g(lam):
        return -k(lam) / lam

    lo, hi = _speed_bracket(g)
    lambda_star, (a, b) = bounded_minimizer(g, lo, hi, tol=tol * (1 + 0.5 * (lo + hi)))
    c_star = g(lambda_star)
    logger.debug("c* = %.12g at lambda* = %.12g, bracket [%.6g, %.6g]",
                 c_star, lambda_star, a, b)
    return SpeedResult(k.e, c_star, lambda_star, k(lambda_star), (a, b), k.curve())


def characteristic_roots(model, e, c, grid, tol=1e-10, speed=None, **solver_options):
    """Roots of k(lambda, e) + c lambda = 0 for lambda > 0.

    Args:
        model (ModelSpec): Model with k(0, e) < 0.
        e (array_like): Direction.
        c (float): Speed.
        grid (PeriodicGrid): Discrete unit cell.
        tol (float, optional): Root tolerance.
        speed (SpeedResult, optional): Precomputed minimal speed.

    Returns:
        roots (CharacteristicRoots): Two roots for c > c*, a double root at
            c = c* (within 1e-6 (1 + c*)) and no root for c < c*.
    """
    k = _Dispersion(model, e, grid, **solver_options)
    if speed is None:
        speed = minimal_speed(model, e, grid, dispersion=k)
    c_star, lambda_star = speed.c_star, speed.lambda_star
    window = 1e-6 * (1 + c_star)
    if abs(c - c_star) <= window:
        return CharacteristicRoots("double_root", c, c_star, lambda_star, lambda_star)
    if c < c_star:
        return CharacteristicRoots("no_root", c, c_star)

    def F(lam):
        return k(lam) + c * lam

    lambda_minus = brentq(F, 0.0, lambda_star, xtol=tol, rtol=4 * np.finfo(float).eps)
    upper = 2 * lambda_star
    while F(upper) >= 0:
        upper *= 2
        require(upper <= LAMBDA_CAP, "Larger characteristic root not bracketed",
                BracketFailure)
    lambda_plus = brentq(F, lambda_star, upper, xtol=tol,
                         rtol=4 * np.finfo(float).eps)
    logger.debug("roots at c=%.9g: %.12g, %.12g", c, lambda_minus, lambda_plus)
    return CharacteristicRoots("two_roots", c, c_star, lambda_minus, lambda_plus)


def speed_polar(model, directions, grid, **solver_options):
    """Minimal speeds over several directions.

    Args:
        model (ModelSpec): Model.
        directions (array_like): At least two directions, shape (n, N).
        grid (PeriodicGrid): Discrete unit cell.

    Returns:
        polar (SpeedPolar): Per-direction results with the largest jump
            between adjacent directions.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    require(len(directions) >= 2, "speed_polar needs at least two directions")
    return SpeedPolar(
        [minimal_speed(model, e, grid, **solver_options) for e in directions]
    )
