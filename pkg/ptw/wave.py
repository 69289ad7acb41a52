"""Pulsating travelling waves in rational directions.

For a primitive integer direction p the problem is rotated into a frame
(r, y) with r = x.e, and solved on a truncated cylinder [a, r_max] x T^{N-1}
whose axial coordinate moves with the wave (r' = r - c t). A pulsating wave
is a fixed point of

    Q(phi)(r', y) = v(tau1 / c, r', y + sigma),

where v solves the co-moving problem from v(0) = phi with a homogeneous
Neumann condition at r' = a, tau1 = 1 / |p| and sigma is the cross-section
twist of the lattice vector k0 with k0.p = 1. Iterates are kept between a
lower and an upper barrier.
"""

import csv
import logging
import math
import warnings
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from ptw.barriers import (
    build_critical_pair,
    build_sub_omega,
    build_super_h,
)
from ptw.compare import ProfileCompare
from ptw.components.model import check_structure, lipschitz_bound
from ptw.disc import CylinderGrid, PeriodicGrid, stencil_matrix
from ptw.errors import (
    CFLViolation,
    EnvelopeCollapse,
    HypothesisUnmet,
    LinearSolveFailure,
    NoConvergence,
    NonpositiveIterate,
    SpeedBelowMinimal,
)
from ptw.speed import characteristic_roots, minimal_speed
from ptw.tools import bezout_vector, format_float, primitive_vector, require

logger = logging.getLogger(__name__)

TAIL_CELLS = 5
NEGATIVE_TOL = 1e-10
COLLAPSE_TOL = 1e-12
PLATEAU_WIDTH = 2.0
PLATEAU_FLOOR = 1e-3
TAIL_FLOOR = 1e-6
MAX_ITER = 400
CRITICAL_ITER_FACTOR = 10


def _lcm(a, b):
    return a * b // math.gcd(a, b)


def _integer_primitive(vector):
    """Scale a rational vector to a primitive integer vector."""
    denominator = reduce(_lcm, (entry.denominator for entry in vector), 1)
    integers = [int(entry * denominator) for entry in vector]
    divisor = reduce(math.gcd, (abs(entry) for entry in integers))
    return np.array([entry // divisor for entry in integers], dtype=int)


def _orthogonal_lattice_vectors(p):
    """Integer vectors w_1 = p, w_2, ..., w_N, mutually orthogonal."""
    dim = len(p)
    basis = [[Fraction(int(entry)) for entry in p]]
    for axis in range(dim):
        if len(basis) == dim:
            break
        candidate = [Fraction(int(axis == idx)) for idx in range(dim)]
        for w in basis:
            scale = sum(c * v for c, v in zip(candidate, w)) / sum(v * v for v in w)
            candidate = [c - scale * v for c, v in zip(candidate, w)]
        if any(candidate):
            basis.append([Fraction(int(v)) for v in _integer_primitive(candidate)])
    return [np.array([int(v) for v in w], dtype=int) for w in basis]


class RationalFrame(object):
    """Orthogonal frame adapted to a rational direction.

    Attributes:
        p (ndarray): Primitive integer direction.
        e (ndarray): Unit direction p / |p|.
        tau1 (float): Smallest positive value of k.e over k in Z^N.
        basis (list): Orthogonal integer vectors w_1 = p, w_2, ..., w_N.
        rotation (ndarray): Orthogonal matrix with columns e, w_2/|w_2|, ...
        cross_lengths (ndarray): Periods |w_i| of the cross-section torus.
        cross_periods (ndarray): Lattice spacings 1 / |w_i| along each
            cross axis.
        k0 (ndarray): Integer vector with k0.p = 1.
        twist (ndarray): Cross-section offset of k0 in frame coordinates.

    Examples:
        >>> frame = rational_frame([3, 4])
        >>> frame.tau1, frame.twist
        (0.2, array([-1.4]))
    """

    def __init__(self, p):
        self.p = primitive_vector(p)
        self.dim = len(self.p)
        norm = float(np.linalg.norm(self.p))
        self.e = self.p / norm
        self.tau1 = 1.0 / norm
        self.basis = _orthogonal_lattice_vectors(self.p)
        columns = [w / np.linalg.norm(w) for w in self.basis]
        self.rotation = np.column_stack(columns)
        lengths = np.array([np.linalg.norm(w) for w in self.basis[1:]])
        self.cross_lengths = lengths
        self.cross_periods = 1.0 / lengths if len(lengths) else lengths
        self.k0 = bezout_vector(self.p)
        self.twist = self.rotation[:, 1:].T @ self.k0
        require(
            np.abs(self.rotation.T @ self.rotation - np.eye(self.dim)).max() <= 1e-12,
            "Frame rotation is not orthogonal",
        )
        if not self.spans_lattice:
            warnings.warn(
                f"Frame of {self.p.tolist()} spans a sublattice of Z^{self.dim}; "
                f"the wave is pulsating with respect to that sublattice only",
                UserWarning,
            )

    def __repr__(self):
        return f"RationalFrame(p={self.p.tolist()})"

    def to_frame(self, x):
        """Lab positions (P, N) to frame coordinates (r, y)."""
        return np.asarray(x, dtype=float).reshape(-1, self.dim) @ self.rotation

    def to_lab(self, z):
        """Frame coordinates (P, N) to lab positions."""
        return np.asarray(z, dtype=float).reshape(-1, self.dim) @ self.rotation.T

    def lattice_coordinates(self, k):
        """Coordinates (n, m_2, ..., m_N) of k in the basis k0, w_2, ..., w_N."""
        k = np.asarray(k, dtype=int)
        n = int(k @ self.p)
        rest = k - n * self.k0
        m = [Fraction(int(rest @ w), int(w @ w)) for w in self.basis[1:]]
        return [n] + m

    @property
    def spans_lattice(self):
        for axis in range(self.dim):
            unit = np.eye(self.dim, dtype=int)[axis]
            if any(
                coordinate.denominator != 1
                for coordinate in self.lattice_coordinates(unit)[1:]
            ):
                return False
        return True

    def twist_denominators(self):
        """Smallest n_i with twist_i * n_i / L_i an integer, per cross axis."""
        return [
            Fraction(int(self.k0 @ w), int(w @ w)).denominator for w in self.basis[1:]
        ]


def rational_frame(p):
    """Build the frame of a nonzero integer direction.

    Args:
        p (array_like): Integer direction; reduced by the gcd of its entries.

    Returns:
        frame (RationalFrame): Frame with tau1 = 1 / |p|.

    Raises:
        ZeroVector: p is zero.
    """
    return RationalFrame(p)


def _rotated_coefficients(model, frame, lab):
    A = model.diffusion(lab)
    q = model.advection(lab)
    R = frame.rotation
    A_rot = np.einsum("ji,pdjk,kl->pdil", R, A, R)
    q_rot = np.einsum("pdj,ji->pdi", q, R)
    return A_rot, q_rot


def _cylinder_stencils(model, frame, grid, lab, c=0.0):
    """Per-component stencils of -tr(A D^2) + (q - c e_r) . grad on the cylinder.

    The axial drift is discretized centrally while diffusion dominates it on
    every node, otherwise by upwind differences.
    """
    A_rot, q_rot = _rotated_coefficients(model, frame, lab)
    h_r = grid.h_r
    stencils = []
    for i in range(model.components):
        b = q_rot[:, i].copy()
        b[:, 0] -= c
        upwind = None
        if np.any(np.abs(b[:, 0]) * h_r > 2 * A_rot[:, i, 0, 0]):
            upwind = np.zeros_like(b)
            upwind[:, 0] = b[:, 0]
            b[:, 0] = 0.0
        stencils.append(
            stencil_matrix(
                grid.shape,
                grid.spacing,
                grid.axis_modes(),
                A_rot[:, i],
                b,
                np.zeros(grid.size),
                upwind=upwind,
            )
        )
    return stencils


def _cross_shift(values, grid, twist):
    """Sample values (d, n_r, n_y...) at y + twist on the cross torus."""
    shifted = values
    for axis, (sigma, length, n) in enumerate(
        zip(twist, grid.cross_lengths, grid.cross_points)
    ):
        array_axis = axis + 2
        steps = sigma * n / length
        if abs(steps - round(steps)) <= 1e-9:
            shifted = np.roll(shifted, -int(round(steps)), axis=array_axis)
            continue
        wavenumbers = np.fft.fftfreq(n, d=1.0 / n)
        phase = np.exp(2j * np.pi * wavenumbers * sigma / length)
        shape = [1] * shifted.ndim
        shape[array_axis] = n
        spectrum = np.fft.fft(shifted, axis=array_axis) * phase.reshape(shape)
        shifted = np.fft.ifft(spectrum, axis=array_axis).real
    return shifted


class Envelope(object):
    """Barrier envelope [lower, upper] on the co-moving cylinder.

    The lower envelope is the largest lattice translate max(0, max_n
    omega(0, x + n k0)) over 0 <= n <= floor(-a / tau1); the upper envelope
    is min(eta_hat, gamma h). Without a lower barrier the lower envelope is 0.

    Attributes:
        lower (ndarray): Lower envelope at t = 0, shape (d, M).
        upper (ndarray): Upper envelope at t = 0, shape (d, M).
        critical (bool): Whether the critical pair was used.

    Raises:
        EnvelopeCollapse: upper < lower at some node.
    """

    def __init__(self, model, frame, grid, c, lower_barrier, upper_barrier,
                 gamma=1.0, critical=False):
        self.model = model
        self.frame = frame
        self.grid = grid
        self.c = float(c)
        self.lower_barrier = lower_barrier
        self.upper_barrier = upper_barrier
        self.gamma = float(gamma)
        self.critical = critical
        self.tail = np.indices(grid.shape).reshape(grid.dim, -1)[0] >= (
            grid.n_r - TAIL_CELLS
        )

        nodes = grid.nodes
        count = int(np.floor(-grid.a / frame.tau1 + 1e-9))
        offsets = frame.tau1 * np.arange(max(count, 0) + 1)
        if lower_barrier is None:
            self.lower = np.zeros((model.components, grid.size))
        else:
            lower = lower_barrier.lattice_max(nodes[:, 0], frame.to_lab(nodes), offsets)
            self.lower = np.maximum(lower, 0.0).T
        self.upper = self.upper_at(0.0)
        gap = float((self.upper - self.lower).min())
        if gap < -COLLAPSE_TOL:
            raise EnvelopeCollapse(
                f"Upper envelope lies below the lower one by {-gap:.3e}; "
                f"rebuild the barriers with larger constants"
            )
        logger.debug("envelope on %s: %d lattice translates, min gap %.3e",
                     grid, len(offsets), gap)

    def upper_at(self, t, mask=None):
        """Upper envelope at time t on all nodes (or the masked ones)."""
        nodes = self.grid.nodes if mask is None else self.grid.nodes[mask]
        lab = self.frame.to_lab(nodes + np.eye(self.grid.dim)[0] * self.c * t)
        value = self.gamma * self.upper_barrier.profile(nodes[:, 0], lab)
        return np.minimum(value, self.model.eta_hat).T

    def clamp(self, values):
        return np.minimum(np.maximum(values, self.lower), self.upper)


class MovingBoundarySolver(object):
    """IMEX integrator of the co-moving cylinder problem.

    Each step solves (I + dt Op_i) v_i^{n+1} = v_i^n + dt f_i(x, v^n) per
    component, with Op_i the rotated operator minus c d/dr'. Factorizations
    are reused across steps when the coefficients are constant.

    Attributes:
        horizon (float): Integration time T.
        steps (int): Number of steps.
        dt (float): Step size.
    """

    def __init__(self, model, frame, c, grid, horizon=None, steps=None,
                 lipschitz=None, envelope=None):
        require(c > 0, "Wave speed must be positive")
        self.model = model
        self.frame = frame
        self.c = float(c)
        self.grid = grid
        self.horizon = float(horizon) if horizon is not None else frame.tau1 / c
        self.envelope = envelope
        lip = float(lipschitz) if lipschitz is not None else lipschitz_bound(model)
        self.lipschitz = lip
        self.steps = int(steps) if steps else max(1, int(np.ceil(self.horizon * lip / 0.25)))
        self.dt = self.horizon / self.steps
        grid.dt = self.dt
        require(
            self.dt * lip < 0.5,
            f"dt * Lip = {self.dt * lip:.3g} >= 0.5",
            CFLViolation,
        )
        self._factors = None

    def lab_nodes(self, t):
        nodes = self.grid.nodes + np.eye(self.grid.dim)[0] * self.c * t
        return self.frame.to_lab(nodes)

    def _factorize(self, lab):
        identity = sparse.identity(self.grid.size, format="csc")
        factors = []
        for stencil in _cylinder_stencils(self.model, self.frame, self.grid, lab,
                                          self.c):
            try:
                factors.append(splu(sparse.csc_matrix(identity + self.dt * stencil)))
            except RuntimeError as exc:
                raise LinearSolveFailure(f"Cylinder LU failed: {exc}") from exc
        return factors

    def factors(self, t):
        if self.model.homogeneous:
            if self._factors is None:
                self._factors = self._factorize(self.lab_nodes(0.0))
            return self._factors
        return self._factorize(self.lab_nodes(t))

    def advance(self, values, t0=0.0):
        """Integrate from t0 to t0 + horizon.

        Args:
            values (ndarray): Nodal field, shape (d, M).
            t0 (float, optional): Start time.

        Returns:
            values (ndarray): Field at t0 + horizon.

        Raises:
            NonpositiveIterate: A component dropped below -1e-10.
        """
        v = np.array(values, dtype=float)
        for n in range(self.steps):
            t = t0 + n * self.dt
            lab = self.lab_nodes(t)
            rhs = v + self.dt * self.model.reaction(lab, v.T).T
            factors = self.factors(t)
            v = np.vstack([factors[i].solve(rhs[i]) for i in range(len(factors))])
            if v.min() < -NEGATIVE_TOL:
                raise NonpositiveIterate(
                    f"Iterate reached {v.min():.3e} at t = {t + self.dt:.6g}"
                )
            v = np.maximum(v, 0.0)
            if self.envelope is not None:
                tail = self.envelope.tail
                v[:, tail] = np.minimum(
                    v[:, tail], self.envelope.upper_at(t + self.dt, tail)
                )
        return v


def solve_moving_boundary(model, frame, c, grid, phi0, T, steps=None, envelope=None):
    """Evolve the co-moving cylinder problem from phi0 for time T.

    Args:
        model (ModelSpec): Model.
        frame (RationalFrame): Frame of the direction.
        c (float): Wave speed, positive.
        grid (CylinderGrid): Co-moving cylinder grid.
        phi0 (ndarray): Initial field, shape (d, M) or (d,) + grid.shape.
        T (float): Horizon.
        steps (int, optional): Number of time steps.
        envelope (Envelope, optional): Supplies the tail clamp.

    Returns:
        values (ndarray): Field at time T with the shape of phi0.
    """
    phi0 = np.asarray(phi0, dtype=float)
    solver = MovingBoundarySolver(model, frame, c, grid, horizon=T, steps=steps,
                                  envelope=envelope)
    result = solver.advance(phi0.reshape(model.components, -1))
    return result.reshape(phi0.shape)


def fixed_point_map(model, frame, c, grid, phi, envelope=None, solver=None):
    """Apply Q: evolve one period, twist the cross-section and clamp.

    Args:
        model (ModelSpec): Model.
        frame (RationalFrame): Frame of the direction.
        c (float): Wave speed.
        grid (CylinderGrid): Co-moving cylinder grid.
        phi (ndarray): Field, shape (d, M).
        envelope (Envelope, optional): Clamp into [lower, upper] when given.
        solver (MovingBoundarySolver, optional): Reused solver.

    Returns:
        values (ndarray): Q(phi), shape (d, M).
    """
    solver = solver or MovingBoundarySolver(model, frame, c, grid, envelope=envelope)
    d = model.components
    evolved = solver.advance(np.asarray(phi, dtype=float).reshape(d, -1))
    if grid.cross_points:
        evolved = _cross_shift(
            evolved.reshape((d,) + grid.shape), grid, frame.twist
        ).reshape(d, -1)
    if envelope is not None:
        evolved = envelope.clamp(evolved)
    return evolved


class WaveProfile(object):
    """Converged pulsating wave in a rational direction.

    Attributes:
        frame (RationalFrame): Frame of the direction.
        speed (float): Wave speed c.
        c_star (float): Minimal speed in the frame direction.
        grid (CylinderGrid): Co-moving cylinder grid.
        values (ndarray): Time-0 slice, shape (d,) + grid.shape.
        trace (list): Picard residual per iteration.
        diagnostics (dict): right_tail_slope, left_plateau_min,
            pulsating_residual, tail_value and decay_rate.
        tol (float): Picard tolerance.
        critical (bool): Whether the critical envelope was used.

    Examples:
        >>> profile = construct_pulsating_wave(model, rational_frame([1]), 2.5)
        >>> profile(0.0, [[0.0]])
    """

    def __init__(self, frame, speed, c_star, grid, values, trace, diagnostics,
                 tol, critical=False):
        self.frame = frame
        self.speed = float(speed)
        self.c_star = float(c_star)
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        self.trace = list(trace)
        self.diagnostics = dict(diagnostics)
        self.tol = float(tol)
        self.critical = critical
        axes = [grid.r] + [
            np.append(axis, length) for axis, length in zip(grid.y_axes, grid.cross_lengths)
        ]
        padded = self.values
        for axis in range(len(grid.cross_points)):
            array_axis = axis + 2
            first = np.take(padded, [0], axis=array_axis)
            padded = np.concatenate((padded, first), axis=array_axis)
        self._interpolator = RegularGridInterpolator(
            axes, np.moveaxis(padded, 0, -1), method="linear"
        )

    def __repr__(self):
        return f"WaveProfile(p={self.frame.p.tolist()}, c={self.speed:.6g})"

    def __sub__(self, other):
        return ProfileCompare(other, self)

    @property
    def components(self):
        return self.values.shape[0]

    @property
    def period(self):
        """Time tau1 / c after which the profile repeats, shifted by k0."""
        return self.frame.tau1 / self.speed

    @property
    def residual(self):
        return self.trace[-1] if self.trace else np.inf

    def __call__(self, t, x):
        """Evaluate u(t, x) at a time that is a multiple of tau1 / c.

        Args:
            t (float): Time, an integer multiple of the period.
            x (array_like): Lab positions, shape (P, N).

        Returns:
            values (ndarray): Shape (P, d).
        """
        j = int(round(t / self.period))
        require(
            abs(t - j * self.period) <= 1e-9 * max(1.0, abs(t)),
            f"t = {t} is not a multiple of the period {self.period:.9g}",
        )
        z = self.frame.to_frame(x)
        z[:, 0] = np.clip(z[:, 0] - j * self.frame.tau1, self.grid.a, self.grid.r_max)
        if self.grid.cross_points:
            z[:, 1:] = np.mod(z[:, 1:] - j * self.frame.twist, self.grid.cross_lengths)
        return self._interpolator(z)

    def nodal(self):
        """Values with shape grid.shape + (d,)."""
        return np.moveaxis(self.values, 0, -1)

    def rows(self):
        nodes = self.grid.nodes
        flat = self.values.reshape(self.components, -1).T
        return [
            [format_float(value) for value in node] + [format_float(u) for u in row]
            for node, row in zip(nodes, flat)
        ]

    def save_as(self, file_path):
        """Write CSV with columns r, y_2..y_N, u_1..u_d."""
        header = ["r"] + [f"y_{idx + 2}" for idx in range(len(self.grid.cross_points))]
        header += [f"u_{idx + 1}" for idx in range(self.components)]
        with open(file_path, "w", newline="") as output_file:
            writer = csv.writer(output_file)
            writer.writerow(header)
            writer.writerows(self.rows())

    def as_dict(self):
        return {
            "direction": self.frame.p.tolist(),
            "speed": self.speed,
            "c_star": self.c_star,
            "critical": bool(self.critical),
            "a": self.grid.a,
            "r_max": self.grid.r_max,
            "h_r": self.grid.h_r,
            "cross_points": list(self.grid.cross_points),
            "iterations": len(self.trace),
            "residual": float(self.residual),
            "diagnostics": {key: float(value) for key, value in self.diagnostics.items()},
        }


def _default_h_r(tau1, decay):
    m = int(np.ceil(tau1 / min(0.125, 0.1 / decay) - 1e-9))
    return tau1 / max(m, 1)


def _cross_points(model, frame, cross_points):
    if not len(frame.cross_lengths):
        return ()
    if cross_points is not None:
        return tuple(np.broadcast_to(np.atleast_1d(cross_points),
                                     (len(frame.cross_lengths),)).tolist())
    points = []
    for length, denominator in zip(frame.cross_lengths, frame.twist_denominators()):
        base = 4 if model.homogeneous else max(4, int(np.ceil(8 * length)))
        aligned = denominator * int(np.ceil(base / denominator))
        points.append(aligned if aligned <= 4 * base else base)
    return tuple(points)


def _tail_slope(values, grid):
    """Log-slope of the right tail, taking the slowest-decaying component.

    The max over components of the cross-section means is fitted over the
    last decade before the clamped tail cells.
    """
    d = values.shape[0]
    mean = values.reshape(d, grid.n_r, -1).mean(axis=2).max(axis=0)
    stop = grid.n_r - TAIL_CELLS - 1
    if mean[stop] <= 0:
        return np.nan
    start = stop
    while start > 0 and mean[start - 1] < 10 * mean[stop]:
        start -= 1
    start = max(start - 1, 0)
    if stop - start < 2 or np.any(mean[start:stop + 1] <= 0):
        return np.nan
    slope = np.polyfit(grid.r[start:stop + 1], np.log(mean[start:stop + 1]), 1)[0]
    return float(-slope)


def _diagnostics(model, frame, c, grid, values, solver):
    d = model.components
    flat = values.reshape(d, -1)
    r = grid.nodes[:, 0]
    plateau = flat[:, r <= grid.a + PLATEAU_WIDTH + 1e-12]
    fresh = fixed_point_map(model, frame, c, grid, flat, solver=solver)
    return {
        "right_tail_slope": _tail_slope(values, grid),
        "left_plateau_min": float(plateau.min()),
        "pulsating_residual": float(np.abs(fresh - flat).max()),
        "tail_value": float(flat[:, r >= grid.r_max - 1e-12].max()),
    }


def _cylinder(model, frame, decay, a=None, r_max=None, h_r=None, cross_points=None):
    h_r = h_r or _default_h_r(frame.tau1, decay)
    a = a if a is not None else -h_r * np.ceil(40.0 / (decay * h_r))
    r_max = r_max if r_max is not None else 20.0 / decay
    return CylinderGrid(a, r_max, h_r, frame.cross_lengths,
                        _cross_points(model, frame, cross_points))


def _picard(model, frame, c, grid, envelope, solver, tol, max_iter):
    """Iterate Q from the upper envelope until the sup-norm step is below tol."""
    phi = envelope.upper.copy()
    trace = []
    for iteration in range(1, max_iter + 1):
        updated = fixed_point_map(model, frame, c, grid, phi, envelope, solver)
        residual = float(np.abs(updated - phi).max())
        trace.append(residual)
        phi = updated
        if residual < tol:
            break
    else:
        raise NoConvergence(
            f"Wave at c = {c:.9g} did not converge",
            iterations=max_iter,
            residual=trace[-1],
            trace=trace,
        )
    logger.debug("picard at c=%.9g converged in %d iterations, residual %.3e",
                 c, iteration, residual)
    return phi.reshape((model.components,) + grid.shape), trace


def construct_pulsating_wave(
    model,
    frame,
    c,
    a=None,
    r_max=None,
    tol=1e-6,
    max_iter=None,
    cell_grid=None,
    h_r=None,
    cross_points=None,
    steps=None,
    speed=None,
):
    """Construct a pulsating travelling wave by Picard iteration of Q.

    The iteration starts from the upper envelope. Above 1.01 c* the envelope
    is built from sub_omega and super_h; between c* and 1.01 c* from the
    critical pair with gamma_hat.

    Args:
        model (ModelSpec): Sublinear model with an unstable zero state.
        frame (RationalFrame): Frame of the direction.
        c (float): Speed, c >= c*(e).
        a (float, optional): Left boundary. Default is about -40 / lambda_c,
            a multiple of h_r.
        r_max (float, optional): Right truncation. Default is 20 / lambda_c.
        tol (float, optional): Sup-norm Picard tolerance.
        max_iter (int, optional): Iteration cap. Default is MAX_ITER, times
            CRITICAL_ITER_FACTOR on the critical envelope.
        cell_grid (PeriodicGrid, optional): Unit-cell grid for the barrier
            eigenfunctions.
        h_r (float, optional): Axial spacing. Default is tau1 / m with
            h_r <= min(0.125, 0.1 / lambda_c).
        cross_points (int or tuple, optional): Cross-section node counts.
        steps (int, optional): Time steps per period.
        speed (SpeedResult, optional): Precomputed minimal speed.

    Returns:
        profile (WaveProfile): Converged profile with diagnostics.

    Raises:
        HypothesisUnmet: The model is not sublinear.
        SpeedBelowMinimal: c < c*(e).
        EnvelopeCollapse: The barriers cross.
        NoConvergence: tol not met within max_iter; carries the trace.
    """
    require(c > 0, "Wave speed must be positive")
    structure = check_structure(model)
    require(structure.sublinear, f"{model.name} is not sublinear", HypothesisUnmet)
    e = frame.e
    cell_grid = cell_grid or PeriodicGrid(model.dim, 32 if model.dim == 1 else 16)
    speed = speed or minimal_speed(model, e, cell_grid)
    c_star = speed.c_star
    window = 1e-6 * (1 + c_star)
    require(c >= c_star - window, f"Speed {c} is below c* = {c_star:.9g}",
            SpeedBelowMinimal)
    critical = c - c_star <= window or c < 1.01 * c_star
    if max_iter is None:
        max_iter = MAX_ITER * (CRITICAL_ITER_FACTOR if critical else 1)

    if critical:
        lower, upper = build_critical_pair(model, e, cell_grid, speed=speed,
                                           tau1=frame.tau1)
        gamma = upper.constants["gamma_hat"]
        decay = speed.lambda_star
    else:
        roots = characteristic_roots(model, e, c, cell_grid, speed=speed)
        upper = build_super_h(model, e, c, cell_grid, roots=roots, structure=structure)
        lower = build_sub_omega(model, e, c, cell_grid, roots=roots)
        gamma = 1.0
        decay = roots.lambda_minus

    grid = _cylinder(model, frame, decay, a, r_max, h_r, cross_points)
    envelope = Envelope(model, frame, grid, c, lower, upper, gamma=gamma,
                        critical=critical)
    solver = MovingBoundarySolver(model, frame, c, grid, steps=steps, envelope=envelope)
    logger.debug("constructing wave on %s: c=%.9g critical=%s dt=%.3g steps=%d",
                 grid, c, critical, solver.dt, solver.steps)

    values, trace = _picard(model, frame, c, grid, envelope, solver, tol, max_iter)
    diagnostics = _diagnostics(model, frame, c, grid, values, solver)
    diagnostics["decay_rate"] = decay
    return WaveProfile(frame, c, c_star, grid, values, trace, diagnostics, tol,
                       critical=critical)


def _lab_rate(model, frame, grid, values):
    """Discrete du/dt = f - L u at t = 0 in the lab frame."""
    d = model.components
    lab = frame.to_lab(grid.nodes)
    stencils = _cylinder_stencils(model, frame, grid, lab)
    flat = np.asarray(values, dtype=float).reshape(d, -1)
    applied = np.vstack([stencils[i] @ flat[i] for i in range(d)])
    return (model.reaction(lab, flat.T).T - applied).reshape((d,) + grid.shape)


def verify_wave(model, profile, checks=None, structure=None):
    """Post-hoc checks of a constructed wave.

    Args:
        model (ModelSpec): Model the wave was built for.
        profile (WaveProfile): Converged profile.
        checks (set, optional): Subset of {'pulsating', 'limits', 'speed',
            'monotone'}. Default is all.
        structure (StructureReport, optional): Precomputed model audit.

    Returns:
        report (dict): Per check a dict with 'value', 'threshold' and
            'passed' ('passed' is None for a check that does not apply),
            plus an overall 'passed'.
    """
    checks = set(checks or ("pulsating", "limits", "speed", "monotone"))
    report = {}
    diag = profile.diagnostics
    if "pulsating" in checks:
        threshold = 10 * profile.tol
        value = diag["pulsating_residual"]
        report["pulsating"] = {"value": value, "threshold": threshold,
                               "passed": value < threshold}
    if "limits" in checks:
        tail_threshold = TAIL_FLOOR * model.eta_hat
        report["limits"] = {
            "value": [diag["tail_value"], diag["left_plateau_min"]],
            "threshold": [tail_threshold, PLATEAU_FLOOR],
            "passed": diag["tail_value"] < tail_threshold
            and diag["left_plateau_min"] >= PLATEAU_FLOOR,
        }
    if "speed" in checks:
        report["speed"] = {
            "value": profile.speed,
            "threshold": profile.c_star - profile.tol,
            "passed": profile.speed >= profile.c_star - profile.tol,
        }
    if "monotone" in checks:
        structure = structure or check_structure(model)
        if not structure.subhomogeneous:
            report["monotone"] = {"value": None, "threshold": None, "passed": None}
        else:
            report["monotone"] = _monotone_check(model, profile)
    report["passed"] = all(
        entry["passed"] is not False for key, entry in report.items() if key != "passed"
    )
    logger.debug("verify_wave %s: %s", profile, report)
    return report


def _monotone_check(model, profile):
    fine = profile.grid
    rate = _lab_rate(model, profile.frame, fine, profile.values)
    inner = slice(TAIL_CELLS, fine.n_r - TAIL_CELLS)
    n_coarse = (fine.n_r - 1) // 2 + 1
    coarse = CylinderGrid(fine.a, fine.a + 2 * fine.h_r * (n_coarse - 1), 2 * fine.h_r,
                          fine.cross_lengths, fine.cross_points)
    rate_coarse = _lab_rate(model, profile.frame, coarse,
                            profile.values[:, : 2 * n_coarse - 1 : 2])
    common = rate[:, : 2 * n_coarse - 1 : 2]
    discrepancy = np.abs(common - rate_coarse)[:, TAIL_CELLS:n_coarse - TAIL_CELLS]
    tol_fd = (
        float(discrepancy.max()) if discrepancy.size else 0.0
    ) + 2 * profile.residual / profile.period + 1e-10
    minimum = float(rate[:, inner].min())
    return {"value": minimum, "threshold": -tol_fd, "passed": minimum > -tol_fd}


def refine_left_boundary(model, frame, c, a=None, **options):
    """Compare the wave built with left boundary a and with 2a.

    Args:
        model (ModelSpec): Model.
        frame (RationalFrame): Frame of the direction.
        c (float): Speed.
        a (float, optional): Left boundary; default as in
            construct_pulsating_wave.
        **options: Passed to construct_pulsating_wave.

    Returns:
        result (dict): a, doubled a, sup-norm difference on the common nodes
            and both profiles.
    """
    first = construct_pulsating_wave(model, frame, c, a=a, **options)
    a = first.grid.a
    options.setdefault("r_max", first.grid.r_max)
    options.setdefault("h_r", first.grid.h_r)
    second = construct_pulsating_wave(model, frame, c, a=2 * a, **options)
    compare = second - first
    return {
        "a": a,
        "a_doubled": second.grid.a,
        "difference": compare.sup_norm,
        "profiles": (first, second),
    }


def _below_minimal_trial(model, frame, c, speed, cell_grid, a=None, r_max=None,
                         tol=1e-6, max_iter=None, h_r=None, cross_points=None,
                         steps=None):
    """Picard iteration below c* from the critical upper barrier.

    No subsolution exists below c*, so the lower envelope is 0. The upper
    envelope is h* moving at speed c.
    """
    _, upper = build_critical_pair(model, frame.e, cell_grid, speed=speed,
                                   tau1=frame.tau1)
    grid = _cylinder(model, frame, speed.lambda_star, a, r_max, h_r, cross_points)
    envelope = Envelope(model, frame, grid, c, None, upper,
                        gamma=upper.constants["gamma_hat"], critical=True)
    solver = MovingBoundarySolver(model, frame, c, grid, steps=steps, envelope=envelope)
    values, trace = _picard(model, frame, c, grid, envelope, solver, tol,
                            max_iter or MAX_ITER)
    diagnostics = _diagnostics(model, frame, c, grid, values, solver)
    return WaveProfile(frame, c, speed.c_star, grid, values, trace, diagnostics, tol,
                       critical=True)


def speed_dichotomy(model, frame, factor=0.9, speed=None, **options):
    """Run the Picard iteration at factor * c* and classify the outcome.

    At or above c* this is construct_pulsating_wave. Below c* the iteration
    starts from the critical upper barrier moving at speed c with a zero
    lower envelope. A limit that vanishes, or that is a fixed point of the
    clamped map only (pulsating residual >= 10 tol), is not a wave.

    Args:
        model (ModelSpec): Sublinear model.
        frame (RationalFrame): Frame of the direction.
        factor (float, optional): Speed as a fraction of c*.
        speed (SpeedResult, optional): Precomputed minimal speed.
        **options: Passed to construct_pulsating_wave.

    Returns:
        result (dict): 'speed', 'c_star', 'outcome' (one of 'collapse',
            'no_convergence', 'vanished', 'clamped', 'converged'), 'failed'
            and, when the iteration ran, 'iterations', 'sup' and
            'pulsating_residual'.

    Raises:
        HypothesisUnmet: The model is not sublinear.
    """
    structure = check_structure(model)
    require(structure.sublinear, f"{model.name} is not sublinear", HypothesisUnmet)
    cell_grid = options.pop("cell_grid", None) or PeriodicGrid(
        model.dim, 32 if model.dim == 1 else 16
    )
    speed = speed or minimal_speed(model, frame.e, cell_grid)
    c = factor * speed.c_star
    result = {"speed": c, "c_star": speed.c_star}
    try:
        if c < speed.c_star - 1e-6 * (1 + speed.c_star):
            profile = _below_minimal_trial(model, frame, c, speed, cell_grid, **options)
        else:
            profile = construct_pulsating_wave(model, frame, c, cell_grid=cell_grid,
                                               speed=speed, **options)
    except EnvelopeCollapse:
        outcome = "collapse"
    except NoConvergence as exc:
        outcome = "no_convergence"
        result.update(iterations=exc.iterations, residual=exc.residual)
    else:
        pulsating = profile.diagnostics["pulsating_residual"]
        sup = float(profile.values.max())
        result.update(iterations=len(profile.trace), sup=sup,
                      pulsating_residual=pulsating)
        if sup < TAIL_FLOOR:
            outcome = "vanished"
        elif pulsating >= 10 * profile.tol:
            outcome = "clamped"
        else:
            outcome = "converged"
    logger.debug("speed dichotomy at %.6g c*: %s", factor, outcome)
    result.update(outcome=outcome, failed=outcome != "converged")
    return result
