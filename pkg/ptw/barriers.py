"""Explicit sub- and supersolutions built from principal eigenfunctions.

With s = x.e - c t, every function v(lambda) = exp(-lambda s) phi_lambda(x)
solves the linearized problem up to the factor c lambda + k(lambda, e):

    (d/dt + L - H) v(lambda) = (c lambda + k(lambda, e)) v(lambda).

The four barriers combine such exponentials (and, at c = c*, their
lambda-derivative) with constants chosen so that the nonlinear remainder
|f(x, u) - H u| <= M |u|^(1 + beta) is dominated where it matters.
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from ptw.components.model import check_structure
from ptw.errors import (
    DegenerateDelta,
    EigenDerivativeUnstable,
    HypothesisUnmet,
    NoConvergence,
    SpeedBelowMinimal,
    SpeedNotSupercritical,
    WindowOutsideValidity,
)
from ptw.eigen import k_of
from ptw.interp import FieldInterpolator
from ptw.speed import characteristic_roots, minimal_speed
from ptw.tools import require, unit_vector

logger = logging.getLogger(__name__)

MAX_DOUBLINGS = 8


class BarrierFunction(object):
    """Explicit barrier w(t, x) for the reaction-diffusion system.

    Attributes:
        kind (str): 'super_h', 'sub_omega', 'sub_omega_star' or
            'super_h_star'.
        model (ModelSpec): Model the barrier was built for.
        direction (ndarray): Unit direction e.
        speed (float): Speed c.
        constants (dict): Constants of the construction.
        pairs (dict): Eigenpairs used, by role.

    Examples:
        >>> h = build_super_h(model, [1.0], 2.5, grid)
        >>> h(np.zeros(1), np.zeros((1, 1)))
        array([[1.]])
    """

    kinds = ("super_h", "sub_omega", "sub_omega_star", "super_h_star")

    def __init__(self, kind, model, direction, speed, constants, fields, combine,
                 pairs=None):
        require(kind in self.kinds, f"Unknown barrier kind '{kind}'")
        self.kind = kind
        self.model = model
        self.direction = unit_vector(direction)
        self.speed = float(speed)
        self.constants = dict(constants)
        self.pairs = dict(pairs or {})
        self._fields = fields
        self._combine = combine

    def __repr__(self):
        return f"BarrierFunction({self.kind}, c={self.speed:.6g})"

    def __call__(self, t, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.model.dim)
        t = np.broadcast_to(np.asarray(t, dtype=float), (len(x),))
        return self._combine(self.coordinate(t, x), self._fields(x))

    @property
    def is_sub(self):
        return self.kind.startswith("sub")

    def coordinate(self, t, x):
        """Travelling coordinate s = x.e - c t."""
        x = np.asarray(x, dtype=float).reshape(-1, self.model.dim)
        return x @ self.direction - self.speed * np.asarray(t, dtype=float)

    def profile(self, s, x):
        """Evaluate at given travelling coordinates s and positions x."""
        x = np.asarray(x, dtype=float).reshape(-1, self.model.dim)
        s = np.broadcast_to(np.asarray(s, dtype=float), (len(x),))
        return self._combine(s, self._fields(x))

    def lattice_max(self, s, x, offsets):
        """Max over offsets o of the barrier at (s + o, x).

        Shifting x by a lattice vector k changes only s (by k.e), so this is
        the maximum over lattice translates with k.e in offsets.
        """
        x = np.asarray(x, dtype=float).reshape(-1, self.model.dim)
        s = np.broadcast_to(np.asarray(s, dtype=float), (len(x),))
        fields = self._fields(x)
        result = None
        for offset in offsets:
            value = self._combine(s + offset, fields)
            result = value if result is None else np.maximum(result, value)
        return result

    def as_dict(self):
        return {
            "kind": self.kind,
            "speed": self.speed,
            "direction": self.direction.tolist(),
            "constants": {key: float(value) for key, value in self.constants.items()},
        }


def _structure_sublinear(model, structure):
    report = structure if structure is not None else check_structure(model)
    require(
        report.sublinear,
        f"{model.name} is not sublinear; exponential supersolutions do not apply",
        HypothesisUnmet,
    )


def _exponential(rate, phi):
    def fields(x):
        return (phi(x),)

    def combine(s, F):
        return np.exp(-rate * s)[:, None] * F[0]

    return fields, combine


def build_super_h(model, e, c, grid, roots=None, structure=None):
    """Supersolution h(t, x) = exp(-lambda_c s) phi_{lambda_c}(x).

    Args:
        model (ModelSpec): Sublinear model.
        e (array_like): Direction.
        c (float): Speed, c >= c*(e).
        grid (PeriodicGrid): Discrete unit cell for the eigenfunction.
        roots (CharacteristicRoots, optional): Precomputed roots at c.
        structure (StructureReport, optional): Precomputed model audit.

    Returns:
        barrier (BarrierFunction): Kind 'super_h'.

    Raises:
        SpeedBelowMinimal: c < c*(e).
    """
    e = unit_vector(e)
    _structure_sublinear(model, structure)
    roots = roots or characteristic_roots(model, e, c, grid)
    require(bool(roots), f"Speed {c} is below c* = {roots.c_star:.9g}",
            SpeedBelowMinimal)
    lam = roots.lambda_minus
    pair = k_of(model, e, lam, grid)
    constants = {"lambda_c": lam, "k": pair.value}
    return BarrierFunction("super_h", model, e, c, constants,
                           *_exponential(lam, pair.interpolator()),
                           pairs={"phi": pair})


def _sub_omega_constants(model, roots, pair, shifted, delta, K_scale):
    c = roots.speed
    lam, reg = roots.lambda_minus, model.regularity
    a0 = pair.min_value
    b0 = shifted.min_value
    r_delta = c * lam + c * delta + shifted.value
    require(r_delta > 0, f"r_delta = {r_delta:.3e} is not positive", DegenerateDelta)
    ratio = lam / (lam + delta)
    bracket = ratio ** (lam / delta) - ratio ** ((lam + delta) / delta)
    K1 = (1 / b0) * (1 / reg.sigma) ** (delta / lam) * bracket ** (delta / lam)
    K2 = (max(0.0, 1 - a0 * b0) / (reg.sigma * b0)) ** (delta / lam)
    K = 1.01 * max(K1, K2, 1 / b0, reg.M / (b0 * r_delta)) * K_scale
    return {
        "lambda_c": lam,
        "lambda_plus": roots.lambda_plus,
        "delta": delta,
        "a0": a0,
        "b0": b0,
        "r_delta": r_delta,
        "K1": K1,
        "K2": K2,
        "K": K,
    }


def build_sub_omega(model, e, c, grid, roots=None, window=None):
    """Subsolution omega = exp(-lambda_c s) phi_1 - K exp(-(lambda_c + delta) s) phi_2.

    Args:
        model (ModelSpec): Model with regularity constants.
        e (array_like): Direction.
        c (float): Speed, c > c*(e).
        grid (PeriodicGrid): Discrete unit cell.
        roots (CharacteristicRoots, optional): Precomputed roots at c.
        window (Window, optional): When given, the barrier is checked with
            verify_barrier and K is doubled until it passes.

    Returns:
        barrier (BarrierFunction): Kind 'sub_omega'.

    Raises:
        SpeedNotSupercritical: c <= c*(e).
        DegenerateDelta: lambda_c^+ - lambda_c < 1e-8.
    """
    e = unit_vector(e)
    roots = roots or characteristic_roots(model, e, c, grid)
    require(
        roots.kind == "two_roots",
        f"Speed {c} is not above c* = {roots.c_star:.9g}",
        SpeedNotSupercritical,
    )
    lam = roots.lambda_minus
    gap = roots.lambda_plus - lam
    require(gap >= 1e-8, f"lambda_c^+ - lambda_c = {gap:.3e}", DegenerateDelta)
    delta = 0.5 * min(model.regularity.beta * lam, gap)
    pair = k_of(model, e, lam, grid)
    shifted = k_of(model, e, lam + delta, grid)
    phi1, phi2 = pair.interpolator(), shifted.interpolator()

    def fields(x):
        return phi1(x), phi2(x)

    def build(K_scale):
        constants = _sub_omega_constants(model, roots, pair, shifted, delta, K_scale)
        K = constants["K"]

        def combine(s, F):
            return (
                np.exp(-lam * s)[:, None] * F[0]
                - K * np.exp(-(lam + delta) * s)[:, None] * F[1]
            )

        return BarrierFunction("sub_omega", model, e, c, constants, fields, combine,
                               {"phi": pair, "phi_delta": shifted})

    return _validated(model, build, window)


def _eigen_derivative(model, e, lam, star):
    eta = 1e-4 * (1 + lam)
    plus = k_of(model, e, lam + eta, star.grid, max_refinements=0)
    minus = k_of(model, e, lam - eta, star.grid, max_refinements=0)
    base = star.eigenfunction
    pin = np.unravel_index(np.argmax(base), base.shape)
    fields = []
    for pair in (plus, minus):
        field = pair.eigenfunction * (base[pin] / pair.eigenfunction[pin])
        if np.abs(field / base - 1).max() > 0.5:
            raise EigenDerivativeUnstable(
                f"Eigenfunctions at lambda* +- {eta:.3e} are not aligned"
            )
        fields.append(field)
    return (fields[0] - fields[1]) / (2 * eta)


def _leading_edge_start(phi, dphi, K, lam, delta):
    s0 = 1.0
    for _ in range(60):
        s = s0 + np.linspace(0.0, 10 * s0 + 40.0 / lam, 2001)
        core = s[:, None] * phi.ravel() - dphi.ravel() - K * phi.ravel()
        lower = np.exp(-delta * s)[:, None]
        if np.all(core >= lower) and np.all(core <= 2 * s[:, None]):
            return s0
        s0 *= 2
    raise DegenerateDelta("No leading-edge start s0 found for the critical pair")


def _critical_constants(model, speed, star, shifted, dphi, K_scale, s0_scale):
    reg = model.regularity
    lam, c = speed.lambda_star, speed.c_star
    delta = 0.5 * reg.beta * lam
    r_star = (lam + delta) * c + shifted.value
    require(r_star < 0, f"r*_delta = {r_star:.3e} is not negative", DegenerateDelta)
    phi, phi_d = star.eigenfunction, shifted.eigenfunction
    K = (1.1 * max(phi_d.max() - dphi.min(), 0.0) + 0.1) / phi.min() * K_scale
    s0 = _leading_edge_start(phi, dphi, K, lam, delta) * s0_scale

    s = np.linspace(0.0, s0 + 40.0 / lam, 4001)
    core = s[:, None] * phi.ravel() - dphi.ravel() - K * phi.ravel()
    W_bar = float(np.abs(np.exp(-lam * s)[:, None] * core).max())

    beta, M = reg.beta, reg.M
    tail = s0 + np.linspace(0.0, 200.0 / (beta * lam), 4001)
    C1 = float(
        (
            (-1 / r_star) * 4 ** (1 + beta) * M * tail ** (1 + beta)
            * np.exp(delta * tail) / np.exp(beta * lam * tail)
        ).max()
        / phi_d.min()
    )
    C2 = (-1 / r_star) * M * (1 + W_bar) ** (1 + beta) * np.exp(
        (lam + delta) * s0
    ) / phi_d.min()
    C = max(C1, C2)
    kappa2 = min(reg.sigma / (1 + W_bar), (1 / C) ** (1 / beta))
    kappa1 = max(C * kappa2 ** (1 + beta), 0.5 * kappa2)

    M1 = max(0.0, kappa1 * phi_d.max() / phi.min() - kappa2 * K)
    M2 = max(0.0, kappa2 * dphi.max() / phi.min())
    return {
        "lambda_star": lam,
        "c_star": c,
        "delta": delta,
        "r_star_delta": r_star,
        "K": K,
        "s0": s0,
        "W_bar": W_bar,
        "C1": C1,
        "C2": C2,
        "kappa1": kappa1,
        "kappa2": kappa2,
        "M_crit": max(M1, M2) + 1.0,
    }


def build_critical_pair(model, e, grid, speed=None, tau1=None, window=None):
    """Subsolution omega* and supersolution h* at the minimal speed.

    With W = (s phi* - d_lambda phi - K phi*) exp(-lambda* s),

        omega* = kappa1 exp(-(lambda* + delta) s) phi_{lambda* + delta} + kappa2 W
                 for s >= 0, and 0 for s < 0;
        h*     = exp(-lambda* s) (M phi* + kappa2 (s phi* - d_lambda phi))
                 for s > 0, and eta_hat for s <= 0.

    Args:
        model (ModelSpec): Sublinear model with regularity constants.
        e (array_like): Direction.
        grid (PeriodicGrid): Discrete unit cell.
        speed (SpeedResult, optional): Precomputed minimal speed.
        tau1 (float, optional): Axial period of a rational frame; when given
            the envelope factor gamma_hat is added to h*'s constants.
        window (Window, optional): When given, omega* is checked with
            verify_barrier and K, s0 are doubled until it passes.

    Returns:
        pair (tuple): (omega*, h*) barrier functions.

    Raises:
        EigenDerivativeUnstable: Eigenfunctions near lambda* disagree.
        DegenerateDelta: r*_delta is not negative.
    """
    e = unit_vector(e)
    speed = speed or minimal_speed(model, e, grid)
    lam, c = speed.lambda_star, speed.c_star
    delta = 0.5 * model.regularity.beta * lam
    star = k_of(model, e, lam, grid)
    shifted = k_of(model, e, lam + delta, star.grid, max_refinements=0)
    dphi = _eigen_derivative(model, e, lam, star)
    dim = model.dim
    nodal = np.moveaxis(dphi.reshape((star.components,) + star.grid.shape), 0, -1)
    dphi_field = FieldInterpolator(nodal, dim, method="trig")
    phi_star, phi_delta = star.interpolator(), shifted.interpolator()
    pairs = {"phi": star, "phi_delta": shifted}

    def fields(x):
        return phi_star(x), dphi_field(x), phi_delta(x)

    def build_sub(scale):
        constants = _critical_constants(model, speed, star, shifted, dphi, scale, scale)
        K, k1, k2 = constants["K"], constants["kappa1"], constants["kappa2"]

        def combine(s, F):
            phi, d_phi, phi_d = F
            W = np.exp(-lam * s)[:, None] * (s[:, None] * phi - d_phi - K * phi)
            value = k1 * np.exp(-(lam + delta) * s)[:, None] * phi_d + k2 * W
            return np.where((s >= 0)[:, None], value, 0.0)

        return BarrierFunction("sub_omega_star", model, e, c, constants, fields,
                               combine, pairs)

    sub = _validated(model, build_sub, window)
    constants = dict(sub.constants)
    M, k2 = constants["M_crit"], constants["kappa2"]
    eta_hat = model.eta_hat

    def combine_super(s, F):
        phi, d_phi = F[0], F[1]
        value = np.exp(-lam * s)[:, None] * (M * phi + k2 * (s[:, None] * phi - d_phi))
        return np.where((s > 0)[:, None], value, eta_hat)

    if tau1 is not None:
        constants["gamma_hat"] = critical_gamma_hat(
            lam, k2, M, star.eigenfunction, dphi, tau1
        )
        constants["tau1"] = tau1
    super_h_star = BarrierFunction("super_h_star", model, e, c, constants,
                                   fields, combine_super, pairs)
    return sub, super_h_star


def critical_gamma_hat(lam, kappa2, M, phi, dphi, tau1):
    """Envelope factor gamma_hat >= 1 for the critical upper barrier.

    gamma_hat = max(1, max over n >= 1 of exp(-n tau1 lambda*)
    + kappa2 n tau1 exp(-lambda* n tau1) max phi* / min(M phi* - kappa2 d_lambda phi)).
    """
    denominator = (M * phi - kappa2 * dphi).min()
    require(denominator > 0, "M phi* - kappa2 d_lambda phi is not positive",
            DegenerateDelta)
    count = int(np.ceil(60.0 / (tau1 * lam))) + 1
    n = np.arange(1, count + 1)
    terms = np.exp(-n * tau1 * lam) + kappa2 * n * tau1 * np.exp(
        -lam * n * tau1
    ) * phi.max() / denominator
    return float(max(1.0, terms.max()))


@dataclass(frozen=True)
class Window:
    """Tensor sample window for verify_barrier.

    Attributes:
        t_range (tuple): (t_start, t_stop).
        x_lower (tuple): Lower corner of the x box.
        x_upper (tuple): Upper corner of the x box.
        t_points (int): Time samples.
        x_points (int): Samples per spatial axis.
        step (float): Finite-difference step in t and x.
    """

    t_range: tuple = (0.0, 1.0)
    x_lower: tuple = (-5.0,)
    x_upper: tuple = (15.0,)
    t_points: int = 5
    x_points: int = 81
    step: float = 0.05

    def points(self, dim):
        require(
            len(self.x_lower) == dim and len(self.x_upper) == dim,
            f"Window box does not have dimension {dim}",
            WindowOutsideValidity,
        )
        axes = [np.linspace(*self.t_range, self.t_points)] + [
            np.linspace(lo, hi, self.x_points)
            for lo, hi in zip(self.x_lower, self.x_upper)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        flat = np.column_stack([entry.ravel() for entry in mesh])
        return flat[:, 0], flat[:, 1:]


@dataclass
class BarrierReport:
    """Outcome of verify_barrier.

    Attributes:
        kind (str): Barrier kind.
        constants (dict): Barrier constants.
        max_violation (float): Worst violation of the barrier inequality on
            the validity region (0 when the inequality holds everywhere).
        tol_fd (float): Finite-difference tolerance from step halving.
        points (list): (t, x) of points violating by more than tol_fd.
        checked (int): Number of points inside the validity region.
        step (float): Finite-difference step.
    """

    kind: str
    constants: dict
    max_violation: float
    tol_fd: float
    points: list
    checked: int
    step: float

    @property
    def passed(self):
        return self.max_violation <= self.tol_fd

    def as_dict(self):
        return {
            "kind": self.kind,
            "constants": {key: float(value) for key, value in self.constants.items()},
            "max_violation": float(self.max_violation),
            "tol_fd": float(self.tol_fd),
            "passed": bool(self.passed),
            "checked": int(self.checked),
            "step": float(self.step),
            "points": [[float(t)] + [float(v) for v in x] for t, x in self.points],
        }


def _residual(model, barrier, t, x, step):
    """Centered differences of dw/dt + L w; the reaction is left out."""
    dim = model.dim
    w0 = barrier(t, x)
    samples = [w0, barrier(t + step, x), barrier(t - step, x)]
    residual = (samples[1] - samples[2]) / (2 * step)
    A = model.diffusion(x)
    q = model.advection(x)
    offsets = np.eye(dim) * step
    for j in range(dim):
        wp, wm = barrier(t, x + offsets[j]), barrier(t, x - offsets[j])
        samples += [wp, wm]
        residual = residual - A[:, :, j, j] * (wp - 2 * w0 + wm) / step**2
        residual = residual + q[:, :, j] * (wp - wm) / (2 * step)
        for k in range(j + 1, dim):
            corners = [
                barrier(t, x + sj * offsets[j] + sk * offsets[k])
                for sj, sk in ((1, 1), (1, -1), (-1, 1), (-1, -1))
            ]
            samples += corners
            mixed = (corners[0] - corners[1] - corners[2] + corners[3]) / (4 * step**2)
            residual = residual - 2 * A[:, :, j, k] * mixed
    return residual, samples


def _valid(barrier, t, x, samples, step):
    if barrier.kind == "super_h":
        return np.ones(len(x), dtype=bool)
    if barrier.kind == "super_h_star":
        reach = step * (abs(barrier.speed) + np.sqrt(barrier.model.dim))
        return barrier.coordinate(t, x) > reach
    return np.all([sample.max(axis=1) > 0 for sample in samples], axis=0)


def support_start(barrier):
    """Travelling coordinate s beyond which the barrier is positive.

    For omega this is ln(K max phi_delta / min phi) / delta, for omega* the
    leading-edge start s0 and 0 for the supersolutions.
    """
    if barrier.kind == "sub_omega":
        phi = barrier.pairs["phi"].eigenfunction
        phi_delta = barrier.pairs["phi_delta"].eigenfunction
        ratio = barrier.constants["K"] * phi_delta.max() / phi.min()
        return max(0.0, float(np.log(ratio)) / barrier.constants["delta"])
    if barrier.kind == "sub_omega_star":
        return float(barrier.constants["s0"])
    return 0.0


def verify_barrier(model, barrier, window=None):
    """Check the barrier's differential inequality on a sample window.

    The residual R = dw/dt + L w - f(x, w) is evaluated with centered
    differences at steps h and h/2. Subsolutions need R <= 0 on
    {max_i w_i > 0} (all stencil points inside), h* needs R >= 0 on
    {x.e - c t > 0} and h needs R >= 0 everywhere. The reaction is only
    evaluated inside the validity region.

    Args:
        model (ModelSpec): Model.
        barrier (BarrierFunction): Barrier to check.
        window (Window, optional): Sample window. Default is Window().

    Returns:
        report (BarrierReport): Worst violation with tolerance and the
            violating points.

    Raises:
        WindowOutsideValidity: No window point lies in the validity region.
    """
    window = window or Window()
    t, x = window.points(model.dim)
    coarse, samples_coarse = _residual(model, barrier, t, x, window.step)
    fine, samples_fine = _residual(model, barrier, t, x, window.step / 2)
    valid = _valid(barrier, t, x, samples_coarse, window.step) & _valid(
        barrier, t, x, samples_fine, window.step / 2
    )
    require(
        valid.any(),
        f"No window point lies in the validity region of {barrier.kind}",
        WindowOutsideValidity,
    )
    inside = np.nonzero(valid)[0]
    reaction = model.reaction(x[inside], samples_fine[0][inside])
    coarse = coarse[inside] - reaction
    fine = fine[inside] - reaction
    signed = fine if barrier.is_sub else -fine
    violation = np.maximum(signed.max(axis=1), 0.0)
    tol_fd = float(
        4.0 / 3.0 * np.abs(coarse - fine).max(axis=1).max()
        + 1e-12 * (1 + np.abs(fine).max())
    )
    worst = int(np.argmax(violation))
    failing = inside[violation > tol_fd]
    report = BarrierReport(
        kind=barrier.kind,
        constants=barrier.constants,
        max_violation=float(violation[worst]),
        tol_fd=tol_fd,
        points=[(t[idx], x[idx]) for idx in failing[:100]],
        checked=int(inside.size),
        step=window.step,
    )
    logger.debug("verify %s: violation=%.3e tol=%.3e over %d points",
                 barrier.kind, report.max_violation, tol_fd, report.checked)
    return report


def _validated(model, build, window):
    scale = 1.0
    barrier = build(scale)
    if window is None:
        return barrier
    for _ in range(MAX_DOUBLINGS):
        report = verify_barrier(model, barrier, window)
        if report.passed:
            return barrier
        scale *= 2
        warnings.warn(
            f"{barrier.kind} failed validation (violation "
            f"{report.max_violation:.3e}); doubling constants",
            UserWarning,
        )
        barrier = build(scale)
    report = verify_barrier(model, barrier, window)
    if not report.passed:
        raise NoConvergence(
            f"{barrier.kind} still violates its inequality",
            iterations=MAX_DOUBLINGS,
            residual=report.max_violation,
        )
    return barrier
