"""Principal eigenvalues of cooperative elliptic systems.

Eigenpairs are computed by inverse power iteration on (Op + s I)^-1. For a
cooperative operator with a monotone stencil, Op + s I is a nonsingular
M-matrix whenever s exceeds the largest row excess of the off-diagonal sum
over the diagonal; its inverse is entrywise nonnegative and the iteration
converges to the positive (Perron) eigenvector.
"""

import logging
import warnings

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ptw.components.types import DispersionCurve, EigenPair
from ptw.disc import (
    BoxGrid,
    assemble_dirichlet,
    assemble_weighted,
    drift_monotone,
)
from ptw.errors import (
    BracketFailure,
    GridTooCoarse,
    LinearSolveFailure,
    NoConvergence,
    NotCooperative,
    SignFailure,
)
from ptw.tools import bounded_minimizer, require, unit_vector

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-9
STALL_TOL = 1e-11
MAX_ITER = 20000
MAX_REFINEMENTS = 3


def _row_dominance(matrix):
    diagonal = matrix.diagonal()
    off_sum = np.asarray(abs(matrix).sum(axis=1)).ravel() - np.abs(diagonal)
    return float(np.max(off_sum - diagonal))


def _factorize(matrix):
    try:
        return splu(sparse.csc_matrix(matrix))
    except RuntimeError as exc:
        raise LinearSolveFailure(f"Sparse LU failed: {exc}") from exc


def maxmin_bracket(op, phi):
    """Collatz-Wielandt bounds on the principal eigenvalue.

    For a positive vector phi, min (Op phi)_j / phi_j <= k <= max of the same
    ratios.

    Args:
        op (DiscreteOperator): Cooperative operator.
        phi (ndarray): Strictly positive vector, shape (d, M) or flat.

    Returns:
        bracket (tuple): (lower, upper).
    """
    phi = np.asarray(phi, dtype=float).reshape(-1)
    require(np.all(phi > 0), "Certificate vector must be strictly positive", SignFailure)
    ratios = (op.matrix @ phi) / phi
    return float(ratios.min()), float(ratios.max())


def periodic_principal_eigenpair(
    op,
    tol=RESIDUAL_TOL,
    stall_tol=STALL_TOL,
    max_iter=MAX_ITER,
    initial=None,
):
    """Principal eigenpair of a cooperative discrete operator.

    Args:
        op (DiscreteOperator): Operator L_{lambda e} - H, or any operator
            whose off-diagonal entries are nonpositive.
        tol (float, optional): Required sup-norm residual. Default is 1e-9.
        stall_tol (float, optional): Required eigenvalue change between
            iterates. Default is 1e-11.
        max_iter (int, optional): Iteration cap.
        initial (ndarray, optional): Positive starting vector. Default is
            the constant vector.

    Returns:
        pair (EigenPair): Eigenvalue with sup-normalized positive
            eigenfunction of shape (d, M).

    Raises:
        NotCooperative: A coupling block has a positive entry.
        SignFailure: The iterate lost positivity.
        NoConvergence: Tolerances not met within max_iter iterations.

    Examples:
        >>> op = assemble_weighted(model, PeriodicGrid(1, 32), 1.0, [1.0], H)
        >>> periodic_principal_eigenpair(op).value
        -2.0
    """
    coupling = op.coupling_blocks()
    if coupling.nnz and coupling.data.max() > 1e-14:
        raise NotCooperative(
            f"Coupling block has positive entry {coupling.data.max():.3e}"
        )
    matrix = op.matrix
    size = matrix.shape[0]
    shift = 1.0 + max(0.0, _row_dominance(matrix))
    lu = _factorize(matrix + shift * sparse.identity(size, format="csr"))

    x = np.ones(size) if initial is None else np.asarray(initial, dtype=float).ravel()
    require(np.all(x > 0), "Initial vector must be strictly positive", SignFailure)
    x = x / x.max()
    value_prev = np.inf
    residual = np.inf
    for iteration in range(1, max_iter + 1):
        y = lu.solve(x)
        if not np.all(y > 0):
            raise SignFailure(
                f"Iterate lost positivity at iteration {iteration} "
                f"(min {y.min():.3e}); the grid is too coarse for lambda * h"
            )
        top = y.max()
        value = 1.0 / top - shift
        x = y / top
        residual = float(np.abs(matrix @ x - value * x).max())
        stall = abs(value - value_prev)
        value_prev = value
        if stall < stall_tol and residual < tol:
            break
    else:
        raise NoConvergence(
            "Power iteration did not converge", iterations=max_iter, residual=residual
        )

    bracket = maxmin_bracket(op, x)
    if bracket[1] - bracket[0] > 10 * tol * max(1.0, 1.0 / x.min()):
        warnings.warn(
            f"Max-min certificate [{bracket[0]:.12g}, {bracket[1]:.12g}] is wider "
            f"than the residual tolerance suggests",
            UserWarning,
        )
    logger.debug(
        "eigenpair %s: k=%.12g iterations=%d residual=%.3e shift=%.6g",
        op.kind, value, iteration, residual, shift,
    )
    return EigenPair(
        value,
        x.reshape(op.components, -1),
        op.grid,
        residual,
        iteration,
        lam=op.lam,
        direction=op.direction,
        bracket=bracket,
    )


def k_of(model, e, lam, grid, max_refinements=MAX_REFINEMENTS, **solver_options):
    """Principal eigenpair of L_{lambda e} - D_uf(x, 0) on the unit cell.

    The grid is doubled (with a warning) while the central drift is not
    dominated by diffusion, up to `max_refinements` times.

    Args:
        model (ModelSpec): Model.
        e (array_like): Direction, normalized internally.
        lam (float): Weight lambda.
        grid (PeriodicGrid): Discrete unit cell.
        max_refinements (int, optional): Refinement cap.
        **solver_options: Passed to periodic_principal_eigenpair.

    Returns:
        pair (EigenPair): Eigenpair with value k(lambda, e).

    Raises:
        GridTooCoarse: Still not monotone after the allowed refinements.
    """
    e = unit_vector(e)
    for _ in range(max_refinements + 1):
        if drift_monotone(model, grid, lam, e):
            break
        refined = grid.refine()
        warnings.warn(
            f"Refining {grid} to {refined} for lambda = {lam:.6g}", UserWarning
        )
        grid = refined
    else:
        raise GridTooCoarse(
            f"No monotone discretization for lambda = {lam} after "
            f"{max_refinements} refinements"
        )
    H = model.linearization(grid.nodes)
    op = assemble_weighted(model, grid, lam, e, H)
    return periodic_principal_eigenpair(op, **solver_options)


def dirichlet_principal_eigenpair(model, R, resolution=8, **solver_options):
    """Principal Dirichlet eigenpair on the ball B_R.

    Args:
        model (ModelSpec): Model.
        R (float): Ball radius.
        resolution (int, optional): Grid points per unit length.
        **solver_options: Passed to periodic_principal_eigenpair.

    Returns:
        pair (EigenPair): Eigenpair on the box grid [-R, R]^N; the
            eigenfunction vanishes outside the discrete ball.
    """
    require(R > 0, "Radius must be positive")
    points = int(round(2 * R * resolution)) + 1
    grid = BoxGrid(-R * np.ones(model.dim), R * np.ones(model.dim), points,
                   boundary="dirichlet")
    op = assemble_dirichlet(model, grid, R)
    pair = periodic_principal_eigenpair(op, **solver_options)
    full = np.zeros((model.components, grid.size))
    full[:, op.mask] = pair.eigenfunction
    return EigenPair(
        pair.value,
        full,
        grid,
        pair.residual,
        pair.iterations,
        bracket=pair.bracket,
    )


def parabola_bound(model, e, lam):
    """Quadratic upper estimate of k(lambda, e).

    k(lambda, e) <= -gamma_lower lambda^2 + max|q| |lambda| + max_i ||h_ii||,
    obtained from the max-min characterization with the constant test
    function.
    """
    H = model.linearization(model._audit_x)
    h_max = float(np.abs(np.diagonal(H, axis1=1, axis2=2)).max())
    return -model.gamma_lower * lam**2 + model.max_advection * abs(lam) + h_max


def generalized_principal_eigenvalue(model, e, grid, tol=1e-6, step=0.5):
    """Maximize lambda -> k(lambda, e).

    The maximizer is bracketed by expanding from lambda = 0 (k is strictly
    concave), located by bounded Brent search and polished with one
    parabolic vertex step.

    Args:
        model (ModelSpec): Model.
        e (array_like): Direction.
        grid (PeriodicGrid): Discrete unit cell.
        tol (float, optional): Golden-section interval width.
        step (float, optional): Initial expansion step.

    Returns:
        result (tuple): (lambda_1, lambda_bar).

    Raises:
        BracketFailure: k exceeds its parabola bound during expansion.
    """
    e = unit_vector(e)
    cache = {}

    def k(lam):
        if lam not in cache:
            value = k_of(model, e, lam, grid).value
            bound = parabola_bound(model, e, lam)
            if value > bound + 1e-8 * (1 + abs(bound)):
                raise BracketFailure(
                    f"k({lam:.6g}) = {value:.9g} exceeds the parabola bound "
                    f"{bound:.9g}"
                )
            cache[lam] = value
        return cache[lam]

    k0 = k(0.0)
    reach = (model.max_advection + np.sqrt(
        model.max_advection**2 + 4 * model.gamma_lower * max(0.0, parabola_bound(
            model, e, 0.0) - k0))) / (2 * model.gamma_lower)
    lo, hi = -step, step
    if k(hi) > k0:
        lo = 0.0
        while k(2 * hi) > k(hi):
            lo, hi = hi, 2 * hi
            require(hi <= 2 * reach + step, "Bracket expansion escaped", BracketFailure)
        hi = 2 * hi
    elif k(lo) > k0:
        hi = 0.0
        while k(2 * lo) > k(lo):
            hi, lo = lo, 2 * lo
            require(-lo <= 2 * reach + step, "Bracket expansion escaped",
                    BracketFailure)
        lo = 2 * lo
    logger.debug("lambda_1 bracket [%.6g, %.6g]", lo, hi)

    center, _ = bounded_minimizer(lambda lam: -k(lam), lo, hi, tol=tol)
    eta = 1e-3
    k_minus, k_center, k_plus = k(center - eta), k(center), k(center + eta)
    curvature = k_plus - 2 * k_center + k_minus
    if curvature < 0:
        center = center - eta * (k_plus - k_minus) / (2 * curvature)
    return k(center), center


def dispersion_curve(model, e, lambdas, grid, **solver_options):
    """Sample k(lambda, e) at the given lambda values.

    Args:
        model (ModelSpec): Model.
        e (array_like): Direction.
        lambdas (array_like): Strictly increasing samples.
        grid (PeriodicGrid): Discrete unit cell.

    Returns:
        curve (DispersionCurve): Samples with residuals and iteration counts.
    """
    e = unit_vector(e)
    pairs = [k_of(model, e, lam, grid, **solver_options) for lam in lambdas]
    provenance = {
        "points_per_axis": list(grid.points_per_axis),
        "tol": solver_options.get("tol", RESIDUAL_TOL),
        "stall_tol": solver_options.get("stall_tol", STALL_TOL),
    }
    return DispersionCurve._from_pairs(e, pairs, provenance)
