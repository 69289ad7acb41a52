"""Direct simulation of the Cauchy problem du/dt + L u = f(x, u).

States live on a periodic torus of whole cells or on a truncated box with
Neumann walls. Time stepping is IMEX: backward Euler for diffusion and
advection (one sparse LU per component and step size), explicit Euler for
the reaction.
"""

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ptw.components.model import check_structure, lipschitz_bound
from ptw.disc import BoxGrid, PeriodicGrid, assemble_plain
from ptw.eigen import generalized_principal_eigenvalue, k_of
from ptw.errors import (
    CFLViolation,
    FrontHitWall,
    FrontNotFormed,
    HypothesisUnmet,
    LinearSolveFailure,
    NegativeOvershoot,
)
from ptw.speed import minimal_speed
from ptw.tools import format_float, require

logger = logging.getLogger(__name__)

OVERSHOOT_TOL = 1e-10
GROSS_OVERSHOOT = 1e-6
WALL_TOL = 1e-8
EXTINCTION_LEVEL = 1e-4
PERSISTENCE_FLOOR = 1e-6
DEFAULT_DT = 0.05


class SimulationState(object):
    """Nodal solution of the Cauchy problem at one time.

    Attributes:
        model (ModelSpec): Model being integrated.
        grid (PeriodicGrid or BoxGrid): Torus of whole cells or Neumann box.
        u (ndarray): Nodal field, shape (d, M).
        t (float): Current time.
        dt (float): Step size.
        lipschitz (float): Lipschitz bound of f on [0, eta_hat]^d.

    Raises:
        CFLViolation: dt * Lip >= 0.5.
        NegativeOvershoot: u has entries below -1e-10.

    Examples:
        >>> state = SimulationState(model, PeriodicGrid(1, 64, 8.0), u0, dt=1e-3)
        >>> state = simulate(state, 1.0)
    """

    def __init__(self, model, grid, u, t=0.0, dt=DEFAULT_DT, lipschitz=None,
                 _factors=None):
        require(model.dim == grid.dim, "Model and grid dimensions differ")
        self.model = model
        self.grid = grid
        self.u = np.array(u, dtype=float).reshape(model.components, grid.size)
        self.t = float(t)
        self.dt = float(dt)
        self.lipschitz = float(lipschitz) if lipschitz is not None else (
            lipschitz_bound(model)
        )
        require(self.dt > 0, "dt must be positive")
        require(
            self.dt * self.lipschitz < 0.5,
            f"dt * Lip = {self.dt * self.lipschitz:.3g} >= 0.5",
            CFLViolation,
        )
        require(
            self.u.min() >= -OVERSHOOT_TOL,
            f"State has negative entries ({self.u.min():.3e})",
            NegativeOvershoot,
        )
        self._factors = _factors if _factors is not None else {}

    def __repr__(self):
        return f"SimulationState(t={self.t:.6g}, {self.grid})"

    @property
    def sup_norm(self):
        return float(np.abs(self.u).max())

    def factors(self, dt):
        """Per-component LU factors of I + dt L_i, cached by dt."""
        if dt not in self._factors:
            op = assemble_plain(self.model, self.grid)
            M = self.grid.size
            identity = sparse.identity(M, format="csc")
            factors = []
            for i in range(self.model.components):
                block = op.matrix[i * M:(i + 1) * M, i * M:(i + 1) * M]
                try:
                    factors.append(splu(sparse.csc_matrix(identity + dt * block)))
                except RuntimeError as exc:
                    raise LinearSolveFailure(f"IMEX LU failed: {exc}") from exc
            self._factors[dt] = factors
        return self._factors[dt]

    def replace(self, u, t, dt=None):
        return SimulationState(
            self.model,
            self.grid,
            u,
            t=t,
            dt=self.dt if dt is None else dt,
            lipschitz=self.lipschitz,
            _factors=self._factors,
        )


def _imex(state, dt):
    model = state.model
    nodes = state.grid.nodes
    rhs = state.u + dt * model.reaction(nodes, state.u.T).T
    factors = state.factors(dt)
    return np.vstack([factors[i].solve(rhs[i]) for i in range(model.components)])


def step(state, dt=None):
    """Advance one IMEX step.

    Entries below -1e-10 are reported with a warning, clipped to zero, and
    the step size is halved for the following steps.

    Args:
        state (SimulationState): Current state.
        dt (float, optional): Step size for this step. Default is state.dt.

    Returns:
        state (SimulationState): State at t + dt.

    Raises:
        NegativeOvershoot: The step produced entries below -1e-6 (1 + |u|).
        LinearSolveFailure: A factorization failed.
    """
    dt = state.dt if dt is None else float(dt)
    u = _imex(state, dt)
    next_dt = state.dt
    low = float(u.min())
    if low < -GROSS_OVERSHOOT * (1 + state.sup_norm):
        raise NegativeOvershoot(f"Step to t = {state.t + dt:.6g} reached {low:.3e}")
    if low < -OVERSHOOT_TOL:
        warnings.warn(
            f"Negative overshoot {low:.3e} at t = {state.t + dt:.6g}; clipped, "
            f"halving dt to {state.dt / 2:.3g}",
            UserWarning,
        )
        next_dt = state.dt / 2
        logger.debug("dt halved to %.3g", next_dt)
    return state.replace(np.maximum(u, 0.0), state.t + dt, dt=next_dt)


class Trajectory(object):
    """Snapshots (t, u) of a simulation.

    Attributes:
        grid: Grid of the simulation.
        times (list): Snapshot times.
        fields (list): Nodal fields, each of shape (d, M).
    """

    def __init__(self, grid):
        self.grid = grid
        self.times = []
        self.fields = []

    def __len__(self):
        return len(self.times)

    def append(self, state):
        self.times.append(state.t)
        self.fields.append(state.u.copy())

    def save_as(self, file_path):
        """Write CSV with columns t, x_1..x_N, u_1..u_d, one row per node."""
        dim = self.grid.dim
        components = self.fields[0].shape[0] if self.fields else 0
        with open(file_path, "w", newline="") as output_file:
            writer = csv.writer(output_file)
            writer.writerow(
                ["t"] + [f"x_{idx + 1}" for idx in range(dim)]
                + [f"u_{idx + 1}" for idx in range(components)]
            )
            nodes = self.grid.nodes
            for t, u in zip(self.times, self.fields):
                for node, values in zip(nodes, u.T):
                    writer.writerow(
                        [format_float(t)]
                        + [format_float(value) for value in node]
                        + [format_float(value) for value in values]
                    )


def simulate(state, T, snapshot_every=None, callback=None):
    """Advance a state to time T.

    The last step is shortened to land on T.

    Args:
        state (SimulationState): Initial state.
        T (float): Final time.
        snapshot_every (int, optional): Record every k-th step.
        callback (callable, optional): Called with each new state.

    Returns:
        result (tuple): (final state, Trajectory or None).
    """
    trajectory = Trajectory(state.grid) if snapshot_every else None
    if trajectory is not None:
        trajectory.append(state)
    count = 0
    while state.t < T - 1e-12:
        state = step(state, min(state.dt, T - state.t))
        count += 1
        if trajectory is not None and count % snapshot_every == 0:
            trajectory.append(state)
        if callback is not None:
            callback(state)
    logger.debug("simulated to t=%.6g in %d steps", state.t, count)
    return state, trajectory


def bump(grid, components, center=None, radius=1.0, amplitude=1.0, component=None):
    """Nonnegative cosine bump of given radius.

    Args:
        grid: Simulation grid.
        components (int): Number of components d.
        center (array_like, optional): Bump center. Default is the grid
            center.
        radius (float, optional): Support radius.
        amplitude (float, optional): Peak value.
        component (int, optional): Only this component is nonzero. Default
            is all components.

    Returns:
        u (ndarray): Field of shape (d, M).
    """
    nodes = grid.nodes
    if center is None:
        center = nodes.min(axis=0) + 0.5 * (nodes.max(axis=0) - nodes.min(axis=0))
    distance = np.linalg.norm(nodes - np.asarray(center, dtype=float), axis=1)
    profile = amplitude * np.where(
        distance < radius, 0.5 * (1 + np.cos(np.pi * distance / radius)), 0.0
    )
    u = np.zeros((components, grid.size))
    if component is None:
        u[:] = profile
    else:
        u[component] = profile
    return u


def strip_grid(model, length, resolution=10):
    """Neumann box [-length, length] x [0, 1]^(N-1) for front tracking."""
    lower = np.concatenate(([-length], np.zeros(model.dim - 1)))
    upper = np.concatenate(([length], np.ones(model.dim - 1)))
    points = [int(round(2 * length * resolution)) + 1] + [
        max(4, resolution + 1)
    ] * (model.dim - 1)
    return BoxGrid(lower, upper, points, boundary="neumann")


def _front_positions(u1, x_axis, level):
    """Interpolated rightmost and leftmost crossings of level, or None."""
    above = np.nonzero(u1 >= level)[0]
    if not len(above):
        return None, None
    h = x_axis[1] - x_axis[0]
    j = above[-1]
    right = x_axis[j]
    if j + 1 < len(u1):
        right = x_axis[j] + h * (u1[j] - level) / (u1[j] - u1[j + 1])
    i = above[0]
    left = x_axis[i]
    if i > 0:
        left = x_axis[i] - h * (u1[i] - level) / (u1[i] - u1[i - 1])
    return right, left


@dataclass
class SpreadingResult:
    """Outcome of spreading_speed.

    Attributes:
        speeds (dict): Measured speed along '+e1' and '-e1'.
        level (float): Tracked level theta.
        times (ndarray): Sample times.
        right (ndarray): Rightmost level crossing per sample.
        left (ndarray): Leftmost level crossing per sample.
    """

    speeds: dict
    level: float
    times: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)
    trajectory: object = field(default=None, repr=False)

    def as_dict(self):
        return {
            "speeds": {key: float(value) for key, value in self.speeds.items()},
            "level": float(self.level),
        }


def spreading_speed(model, u0=None, T=40.0, level=0.5, length=100.0, resolution=10,
                    dt=DEFAULT_DT, snapshot_every=None):
    """Measure the spreading speed of a compactly supported bump.

    The level crossings x_theta(t) of u_1 (maximized over the cross-section)
    are tracked in both directions of the first axis; each speed is the
    least-squares slope over the last half of [0, T].

    Args:
        model (ModelSpec): Model.
        u0 (ndarray, optional): Initial field on strip_grid(model, length).
            Default is an eta_hat bump of radius 2 at the origin.
        T (float, optional): Horizon.
        level (float, optional): Tracked level theta of u_1.
        length (float, optional): Half width of the box.
        resolution (int, optional): Grid points per unit length.
        dt (float, optional): Step size.
        snapshot_every (int, optional): Keep a Trajectory of every k-th step.

    Returns:
        result (SpreadingResult): Speeds along +e1 and -e1.

    Raises:
        FrontHitWall: Wall values exceeded 1e-8.
        FrontNotFormed: No level crossing at some time past T / 2.
    """
    grid = strip_grid(model, length, resolution)
    if u0 is None:
        u0 = bump(grid, model.components, center=np.zeros(model.dim), radius=2.0,
                  amplitude=model.eta_hat)
    lip = lipschitz_bound(model)
    state = SimulationState(model, grid, u0, dt=min(dt, 0.25 / max(lip, 1e-12)),
                            lipschitz=lip)
    shape = grid.shape
    x_axis = grid.lower[0] + grid.spacing[0] * np.arange(shape[0])
    times, right, left = [], [], []

    def track(current):
        fields = current.u.reshape((model.components,) + shape)
        walls = np.concatenate(
            (fields[:, 0].ravel(), fields[:, -1].ravel())
        )
        if walls.max() > WALL_TOL:
            raise FrontHitWall(
                f"Wall value {walls.max():.3e} at t = {current.t:.6g}; enlarge the box"
            )
        u1 = fields[0].reshape(shape[0], -1).max(axis=1)
        front, back = _front_positions(u1, x_axis, level)
        if front is None:
            if current.t > T / 2:
                raise FrontNotFormed(
                    f"No crossing of level {level} at t = {current.t:.6g}"
                )
            return
        times.append(current.t)
        right.append(front)
        left.append(back)

    _, trajectory = simulate(state, T, snapshot_every=snapshot_every, callback=track)
    times, right, left = np.array(times), np.array(right), np.array(left)
    late = times >= T / 2
    require(late.sum() >= 2, "Too few samples in the last half", FrontNotFormed)
    speeds = {
        "+e1": float(np.polyfit(times[late], right[late], 1)[0]),
        "-e1": float(-np.polyfit(times[late], left[late], 1)[0]),
    }
    logger.debug("spreading speeds at level %.3g: %s", level, speeds)
    return SpreadingResult(speeds, level, times, right, left, trajectory)


def cross_validate_speed(model, T=40.0, level=0.5, cell_grid=None, **options):
    """Compare the measured spreading speed along e1 with c*(e1).

    Returns:
        result (dict): c_star, measured and relative error per direction.
    """
    cell_grid = cell_grid or PeriodicGrid(model.dim, 32 if model.dim == 1 else 16)
    e1 = np.eye(model.dim)[0]
    forward = minimal_speed(model, e1, cell_grid).c_star
    backward = minimal_speed(model, -e1, cell_grid).c_star
    measured = spreading_speed(model, T=T, level=level, **options)
    c_star = {"+e1": forward, "-e1": backward}
    return {
        "c_star": c_star,
        "measured": measured.speeds,
        "relative_error": {
            key: abs(measured.speeds[key] - c_star[key]) / c_star[key] for key in c_star
        },
    }


@dataclass
class HairTriggerResult:
    """Outcome of hair_trigger_test.

    Attributes:
        persisted (bool): Every component's floor is at least 1e-6.
        floor (ndarray): Per-component minimum over |x - center| <= radius
            at t = T.
        lambda_1 (float): Generalized principal eigenvalue that was checked.
    """

    persisted: bool
    floor: np.ndarray
    lambda_1: float
    trajectory: object = field(default=None, repr=False)

    def as_dict(self):
        return {
            "persisted": bool(self.persisted),
            "floor": np.asarray(self.floor).tolist(),
            "lambda_1": float(self.lambda_1),
        }


def hair_trigger_test(model, u0=None, T=30.0, radius=1.0, cells=20, resolution=8,
                      cell_grid=None, dt=DEFAULT_DT, snapshot_every=None):
    """Check that a small nonnegative perturbation of zero persists.

    Args:
        model (ModelSpec): Model with lambda_1 < 0.
        u0 (ndarray, optional): Initial field on the torus of `cells` cells
            per axis. Default is a 1e-3 bump in the first component.
        T (float, optional): Horizon.
        radius (float, optional): Radius of the floor region around the
            torus center.
        cells (int, optional): Torus size in cells per axis.
        resolution (int, optional): Grid points per cell.
        cell_grid (PeriodicGrid, optional): Unit-cell grid for lambda_1.
        dt (float, optional): Step size.

    Returns:
        result (HairTriggerResult): Floor of every component.

    Raises:
        HypothesisUnmet: lambda_1 >= 0.
    """
    cell_grid = cell_grid or PeriodicGrid(model.dim, 32 if model.dim == 1 else 16)
    lambda_1, _ = generalized_principal_eigenvalue(model, np.eye(model.dim)[0],
                                                   cell_grid)
    require(lambda_1 < 0, f"lambda_1 = {lambda_1:.6g} is not negative", HypothesisUnmet)
    grid = PeriodicGrid(model.dim, cells * resolution, float(cells))
    center = np.full(model.dim, cells / 2.0)
    if u0 is None:
        u0 = bump(grid, model.components, center=center, radius=1.0,
                  amplitude=1e-3, component=0)
    u0 = np.asarray(u0, dtype=float).reshape(model.components, grid.size)
    require(u0.min() >= 0, "Initial data must be nonnegative")
    require(u0.max() > 0, "Initial data must not vanish identically")
    lip = lipschitz_bound(model)
    state = SimulationState(model, grid, u0, dt=min(dt, 0.25 / max(lip, 1e-12)),
                            lipschitz=lip)
    state, trajectory = simulate(state, T, snapshot_every=snapshot_every)
    inside = np.linalg.norm(grid.nodes - center, axis=1) <= radius
    floor = state.u[:, inside].min(axis=1)
    logger.debug("hair trigger floor at T=%.6g: %s", T, floor)
    return HairTriggerResult(bool(floor.min() >= PERSISTENCE_FLOOR), floor, lambda_1,
                             trajectory)


@dataclass
class ExtinctionResult:
    """Outcome of extinction_test.

    Attributes:
        extinct (bool): ||u(T)||_inf < 1e-4.
        times (ndarray): Sample times.
        sup_trace (ndarray): ||u(t)||_inf per sample.
        nonincreasing (bool): Whether the trace never increased.
        lambda_p (float): Periodic principal eigenvalue that was checked.
    """

    extinct: bool
    times: np.ndarray
    sup_trace: np.ndarray
    nonincreasing: bool
    lambda_p: float
    trajectory: object = field(default=None, repr=False)

    def as_dict(self):
        return {
            "extinct": bool(self.extinct),
            "nonincreasing": bool(self.nonincreasing),
            "lambda_p": float(self.lambda_p),
            "final_sup": float(self.sup_trace[-1]),
        }


def extinction_test(model, u0=None, T=30.0, grid=None, dt=DEFAULT_DT,
                    snapshot_every=None):
    """Check decay to zero for a stable, strictly sublinear model.

    Args:
        model (ModelSpec): Model with lambda_1^p >= 0.
        u0 (ndarray, optional): Initial field. Default is eta_hat 1.
        T (float, optional): Horizon.
        grid (PeriodicGrid, optional): Torus; default is the unit cell.
        dt (float, optional): Step size.

    Returns:
        result (ExtinctionResult): Decision with the sup-norm trace.

    Raises:
        HypothesisUnmet: lambda_1^p < 0 or f is not strictly sublinear.
    """
    grid = grid or PeriodicGrid(model.dim, 32 if model.dim == 1 else 16)
    lambda_p = k_of(model, np.eye(model.dim)[0], 0.0, grid).value
    require(lambda_p >= 0, f"lambda_1^p = {lambda_p:.6g} is negative", HypothesisUnmet)
    structure = check_structure(model)
    require(structure.strictly_sublinear, f"{model.name} is not strictly sublinear",
            HypothesisUnmet)
    if u0 is None:
        u0 = np.full((model.components, grid.size), model.eta_hat)
    lip = lipschitz_bound(model)
    state = SimulationState(model, grid, u0, dt=min(dt, 0.25 / max(lip, 1e-12)),
                            lipschitz=lip)
    times, trace = [state.t], [state.sup_norm]

    def record(current):
        times.append(current.t)
        trace.append(current.sup_norm)

    _, trajectory = simulate(state, T, snapshot_every=snapshot_every, callback=record)
    trace = np.array(trace)
    nonincreasing = bool(np.all(np.diff(trace) <= 1e-12 * (1 + trace[:-1])))
    return ExtinctionResult(
        bool(trace[-1] < EXTINCTION_LEVEL), np.array(times), trace, nonincreasing,
        lambda_p, trajectory,
    )
