"""Finite-difference grids and operator assembly.

All operators are in nondivergence form,

    (L u)_i = -tr(A^i D^2 u_i) + b^i . grad u_i + c^i u_i - sum_j H_ij u_j,

discretized with second-order central differences (symmetric 4-point
stencils for mixed derivatives). Unknowns are ordered component-major:
index i * M + p for component i at node p.
"""

import itertools
import logging
import warnings

import numpy as np
from scipy import sparse

from ptw.errors import GridTooCoarse
from ptw.tools import require

logger = logging.getLogger(__name__)

ANISOTROPY_WARNING = 20.0


class PeriodicGrid(object):
    """Uniform grid on the periodic box [0, L_1) x ... x [0, L_N).

    With the default unit lengths this is the discrete unit cell.

    Attributes:
        dim (int): Spatial dimension.
        points_per_axis (tuple): Node counts n_j.
        lengths (ndarray): Period along each axis.
        spacing (ndarray): h_j = L_j / n_j.
    """

    modes = "wrap"

    def __init__(self, dim, points_per_axis, lengths=1.0):
        points = np.broadcast_to(np.atleast_1d(points_per_axis), (dim,))
        require(
            np.all(points >= 4),
            f"Grid needs at least 4 points per axis, got {tuple(points)}",
            GridTooCoarse,
        )
        self.dim = int(dim)
        self.points_per_axis = tuple(int(n) for n in points)
        self.lengths = np.broadcast_to(np.asarray(lengths, dtype=float), (dim,)).copy()
        self.spacing = self.lengths / np.array(self.points_per_axis)

    def __repr__(self):
        return f"PeriodicGrid({self.points_per_axis})"

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.points_per_axis == other.points_per_axis
            and np.array_equal(self.lengths, other.lengths)
        )

    @property
    def shape(self):
        return self.points_per_axis

    @property
    def size(self):
        return int(np.prod(self.points_per_axis))

    @property
    def nodes(self):
        """Node coordinates with shape (M, N)."""
        return self.multi_indices() * self.spacing

    def multi_indices(self):
        return np.indices(self.shape).reshape(self.dim, -1).T

    def index(self, multi_index):
        """Flat node index of a (wrapped) multi-index."""
        return np.ravel_multi_index(
            tuple(np.mod(np.asarray(multi_index).T, np.array(self.shape)[:, None])),
            self.shape,
        )

    def refine(self, factor=2):
        return PeriodicGrid(
            self.dim,
            tuple(n * factor for n in self.points_per_axis),
            self.lengths,
        )

    def axis_modes(self):
        return ("wrap",) * self.dim


class BoxGrid(object):
    """Uniform grid on a box including its end points.

    Attributes:
        lower (ndarray): Lower corner.
        upper (ndarray): Upper corner.
        points_per_axis (tuple): Node counts including both ends.
        boundary (str): 'dirichlet' (zero outside) or 'neumann' (reflecting).
    """

    def __init__(self, lower, upper, points_per_axis, boundary="neumann"):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        self.dim = self.lower.size
        points = np.broadcast_to(np.atleast_1d(points_per_axis), (self.dim,))
        require(np.all(points >= 4), "Box grid needs at least 4 points per axis",
                GridTooCoarse)
        require(np.all(self.upper > self.lower), "Empty box")
        require(boundary in ("dirichlet", "neumann"), f"Bad boundary '{boundary}'")
        self.points_per_axis = tuple(int(n) for n in points)
        self.boundary = boundary
        self.spacing = (self.upper - self.lower) / (np.array(self.points_per_axis) - 1)

    def __repr__(self):
        return f"BoxGrid({self.lower}, {self.upper}, {self.points_per_axis})"

    @property
    def shape(self):
        return self.points_per_axis

    @property
    def size(self):
        return int(np.prod(self.points_per_axis))

    @property
    def nodes(self):
        multi = np.indices(self.shape).reshape(self.dim, -1).T
        return self.lower + multi * self.spacing

    def axis_modes(self):
        mode = "drop" if self.boundary == "dirichlet" else "reflect"
        return (mode,) * self.dim


class CylinderGrid(object):
    """Grid on the truncated cylinder [a, r_max] x T^{N-1}.

    The axial coordinate is co-moving: node j sits at r' = a + j h_r for
    every time, and lab-frame positions are r = r' + c t.

    Attributes:
        a (float): Left (Neumann) boundary.
        r_max (float): Right truncation.
        h_r (float): Axial spacing.
        cross_lengths (ndarray): Periods of the cross-section torus.
        cross_points (tuple): Node counts on the cross-section.
        dt (float): Time step.
    """

    def __init__(self, a, r_max, h_r, cross_lengths=(), cross_points=(), dt=None):
        require(r_max > a, "r_max must exceed a")
        require(h_r > 0, "h_r must be positive")
        self.a = float(a)
        self.h_r = float(h_r)
        self.n_r = int(round((r_max - a) / h_r)) + 1
        require(self.n_r >= 4, "Cylinder grid too short", GridTooCoarse)
        self.r_max = self.a + (self.n_r - 1) * self.h_r
        self.cross_lengths = np.asarray(cross_lengths, dtype=float).reshape(-1)
        self.cross_points = tuple(int(n) for n in np.atleast_1d(cross_points)) if (
            len(self.cross_lengths)
        ) else ()
        require(
            len(self.cross_points) == len(self.cross_lengths),
            "Cross-section lengths and points differ in size",
        )
        require(all(n >= 4 for n in self.cross_points),
                "Cross-section needs at least 4 points per axis", GridTooCoarse)
        self.dt = dt

    def __repr__(self):
        return f"CylinderGrid([{self.a}, {self.r_max}], h_r={self.h_r})"

    @property
    def dim(self):
        return 1 + len(self.cross_lengths)

    @property
    def shape(self):
        return (self.n_r,) + self.cross_points

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def spacing(self):
        cross = self.cross_lengths / np.array(self.cross_points) if self.cross_points else []
        return np.concatenate(([self.h_r], cross))

    @property
    def r(self):
        return self.a + self.h_r * np.arange(self.n_r)

    @property
    def y_axes(self):
        return [
            length * np.arange(n) / n
            for length, n in zip(self.cross_lengths, self.cross_points)
        ]

    @property
    def nodes(self):
        """Co-moving (r', y) coordinates with shape (M, N)."""
        multi = np.indices(self.shape).reshape(self.dim, -1).T
        return np.concatenate(([self.a], np.zeros(self.dim - 1))) + multi * self.spacing

    def axis_modes(self):
        return ("reflect",) + ("wrap",) * (self.dim - 1)

    def with_left(self, a):
        """Same spacing with a different left boundary."""
        return CylinderGrid(a, self.r_max, self.h_r, self.cross_lengths,
                            self.cross_points, self.dt)


class DiscreteOperator(object):
    """Assembled finite-difference operator.

    Attributes:
        matrix (csr_matrix): (d M) x (d M) matrix.
        grid: Grid the operator lives on.
        lam (float): Exponential weight lambda.
        direction (ndarray): Unit direction e, None for plain operators.
        kind (str): 'plain_L', 'weighted_L_lambda' or 'weighted_minus_H'.
        components (int): Number of components d.
    """

    def __init__(self, matrix, grid, components, lam=0.0, direction=None,
                 kind="plain_L", mask=None):
        self.matrix = matrix.tocsr()
        self.grid = grid
        self.components = components
        self.lam = lam
        self.direction = direction
        self.kind = kind
        self.mask = mask

    def __repr__(self):
        return f"DiscreteOperator({self.kind}, lambda={self.lam}, {self.grid})"

    def __call__(self, u):
        """Apply to a field of shape (d, M) or a flat vector."""
        u = np.asarray(u, dtype=float)
        return (self.matrix @ u.reshape(-1)).reshape(u.shape)

    @property
    def nodes_per_component(self):
        return self.matrix.shape[0] // self.components

    def coupling_blocks(self):
        """Off-diagonal component blocks as a sparse matrix."""
        M = self.nodes_per_component
        coo = self.matrix.tocoo()
        keep = (coo.row // M) != (coo.col // M)
        return sparse.coo_matrix(
            (coo.data[keep], (coo.row[keep], coo.col[keep])), shape=coo.shape
        )


def _neighbor(multi, shape, axis, step, mode):
    """Shift multi-indices along an axis; returns (indices, valid mask)."""
    shifted = multi.copy()
    n = shape[axis]
    target = multi[:, axis] + step
    valid = np.ones(len(multi), dtype=bool)
    if mode == "wrap":
        target = np.mod(target, n)
    elif mode == "reflect":
        target = np.where(target < 0, -target, target)
        target = np.where(target > n - 1, 2 * (n - 1) - target, target)
    else:
        valid = (target >= 0) & (target <= n - 1)
        target = np.clip(target, 0, n - 1)
    shifted[:, axis] = target
    return shifted, valid


def stencil_matrix(shape, spacing, modes, A, b, c, upwind=None):
    """Assemble -tr(A D^2) + b . grad + c for one scalar field.

    Args:
        shape (tuple): Node counts per axis.
        spacing (array_like): Grid spacing per axis.
        modes (tuple): Boundary handling per axis: 'wrap' (periodic),
            'reflect' (homogeneous Neumann by even reflection) or 'drop'
            (zero Dirichlet data outside the grid).
        A (ndarray): Diffusion matrices at nodes, shape (M, N, N).
        b (ndarray): Central-difference drift at nodes, shape (M, N).
        c (ndarray): Zero-order coefficient at nodes, shape (M,).
        upwind (ndarray, optional): Drift at nodes, shape (M, N),
            discretized by one-sided differences taken against its sign.

    Returns:
        matrix (csr_matrix): M x M matrix.
    """
    dim = len(shape)
    h = np.asarray(spacing, dtype=float)
    multi = np.indices(shape).reshape(dim, -1).T
    M = len(multi)
    rows, cols, vals = [], [], []
    center = np.arange(M)
    diagonal = np.zeros(M)

    def add(shifts, weight):
        target = multi
        valid = np.ones(M, dtype=bool)
        for axis, step in shifts:
            target, ok = _neighbor(target, shape, axis, step, modes[axis])
            valid &= ok
        index = np.ravel_multi_index(tuple(target.T), shape)
        keep = valid & (weight != 0)
        rows.append(center[keep])
        cols.append(index[keep])
        vals.append(weight[keep])

    for axis in range(dim):
        second = A[:, axis, axis] / h[axis] ** 2
        diagonal += 2 * second
        first = b[:, axis] / (2 * h[axis])
        add(((axis, 1),), -second + first)
        add(((axis, -1),), -second - first)
        if upwind is not None:
            v = upwind[:, axis] / h[axis]
            forward = np.where(v < 0, v, 0.0)
            backward = np.where(v > 0, v, 0.0)
            diagonal += backward - forward
            add(((axis, 1),), forward)
            add(((axis, -1),), -backward)

    for first_axis, second_axis in itertools.combinations(range(dim), 2):
        mixed = A[:, first_axis, second_axis] / (2 * h[first_axis] * h[second_axis])
        add(((first_axis, 1), (second_axis, 1)), -mixed)
        add(((first_axis, -1), (second_axis, -1)), -mixed)
        add(((first_axis, 1), (second_axis, -1)), mixed)
        add(((first_axis, -1), (second_axis, 1)), mixed)

    diagonal = diagonal + c
    rows.append(center)
    cols.append(center)
    vals.append(diagonal)
    matrix = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(M, M),
    ).tocsr()
    matrix.sum_duplicates()
    return matrix


def block_operator(stencils, H=None):
    """Combine per-component stencils with zero-order coupling -H.

    Args:
        stencils (list): d sparse M x M matrices.
        H (ndarray, optional): Coupling matrices at nodes, shape (M, d, d).

    Returns:
        matrix (csr_matrix): (d M) x (d M) matrix.
    """
    d = len(stencils)
    M = stencils[0].shape[0]
    blocks = [[None] * d for _ in range(d)]
    for i in range(d):
        block = stencils[i]
        if H is not None:
            block = block - sparse.diags(H[:, i, i])
        blocks[i][i] = block
        for j in range(d):
            if i != j and H is not None and np.any(H[:, i, j] != 0):
                blocks[i][j] = sparse.diags(-H[:, i, j])
    matrix = sparse.bmat(blocks, format="csr")
    matrix.eliminate_zeros()
    if matrix.shape != (d * M, d * M):
        raise ValueError("Inconsistent block sizes")
    return matrix


def _check_anisotropy(A):
    eigenvalues = np.linalg.eigvalsh(A)
    ratio = eigenvalues.max() / eigenvalues.min()
    if ratio > ANISOTROPY_WARNING:
        warnings.warn(
            f"Strongly anisotropic diffusion (ratio {ratio:.1f}); the mixed "
            f"derivative stencil may lose monotonicity.",
            UserWarning,
        )


def _assemble(model, grid, lam, e, H, kind):
    require(model.dim == grid.dim, "Model and grid dimensions differ")
    nodes = grid.nodes
    A = model.diffusion(nodes)
    q = model.advection(nodes)
    _check_anisotropy(A)
    stencils = []
    for i in range(model.components):
        b = q[:, i]
        c = np.zeros(len(nodes))
        if e is not None:
            Ae = A[:, i] @ e
            b = b + 2 * lam * Ae
            c = c - (lam**2 * (Ae @ e) + lam * (q[:, i] @ e))
        stencils.append(
            stencil_matrix(grid.shape, grid.spacing, grid.axis_modes(), A[:, i], b, c)
        )
    matrix = block_operator(stencils, H)
    logger.debug("assembled %s on %s: nnz=%d", kind, grid, matrix.nnz)
    return DiscreteOperator(matrix, grid, model.components, lam=lam, direction=e,
                            kind=kind)


def assemble_plain(model, grid):
    """Assemble the plain operator L on a periodic grid.

    Args:
        model (ModelSpec): Model supplying A^i and q^i.
        grid (PeriodicGrid): Discrete unit cell.

    Returns:
        DiscreteOperator: Operator with kind 'plain_L'.

    Examples:
        >>> op = assemble_plain(model, PeriodicGrid(1, 16))
        >>> op(np.ones(16))  # zero at every node
    """
    return _assemble(model, grid, 0.0, None, None, "plain_L")


def assemble_weighted(model, grid, lam, e, H=None):
    """Assemble L_{lambda e} - H on a periodic grid.

    L_{lambda e} psi = -tr(A D^2 psi) + 2 lambda e A grad psi + q . grad psi
    - (lambda^2 e A e + lambda q . e) psi.

    Args:
        model (ModelSpec): Model supplying A^i and q^i.
        grid (PeriodicGrid): Discrete unit cell.
        lam (float): Weight lambda.
        e (array_like): Unit direction.
        H (ndarray, optional): Coupling matrices at grid nodes, shape
            (M, d, d). Omitted means no coupling.

    Returns:
        DiscreteOperator: Operator with kind 'weighted_minus_H' when H is
            given, else 'weighted_L_lambda'.
    """
    e = np.atleast_1d(np.asarray(e, dtype=float))
    require(abs(np.linalg.norm(e) - 1) <= 1e-12, f"Direction {e} is not a unit vector")
    kind = "weighted_minus_H" if H is not None else "weighted_L_lambda"
    return _assemble(model, grid, float(lam), e, H, kind)


def drift_monotone(model, grid, lam, e):
    """Check that central drift is dominated by the diffusion diagonal.

    Returns True when |b_j| h_j <= 2 A_jj at every node, component and
    axis, where b = q + 2 lambda A e, which keeps the off-diagonal stencil
    entries nonpositive.
    """
    nodes = grid.nodes
    A = model.diffusion(nodes)
    q = model.advection(nodes)
    b = q + 2 * lam * np.einsum("pinm,m->pin", A, np.asarray(e, dtype=float))
    diagonal = np.diagonal(A, axis1=2, axis2=3)
    return bool(np.all(np.abs(b) * grid.spacing <= 2 * diagonal))


def assemble_dirichlet(model, grid, radius):
    """Assemble L - H on the discrete ball |x| < radius of a box grid.

    Nodes outside the ball carry zero Dirichlet data, so their couplings
    are dropped from the restricted matrix.

    Args:
        model (ModelSpec): Model supplying coefficients and H = D_uf(x, 0).
        grid (BoxGrid): Box grid containing the ball, 'dirichlet' boundary.
        radius (float): Ball radius R.

    Returns:
        DiscreteOperator: Operator on the ball nodes; `mask` flags which box
            nodes belong to the ball.
    """
    require(radius > 0, "Radius must be positive")
    nodes = grid.nodes
    mask = np.linalg.norm(nodes, axis=1) < radius * (1 - 1e-12)
    require(mask.sum() >= 1, "Discrete ball is empty", GridTooCoarse)
    full = _assemble(model, grid, 0.0, None, model.linearization(nodes),
                     "weighted_minus_H")
    keep = np.concatenate([mask] * model.components)
    matrix = full.matrix[keep][:, keep]
    return DiscreteOperator(matrix, grid, model.components, kind="weighted_minus_H",
                            mask=mask)
