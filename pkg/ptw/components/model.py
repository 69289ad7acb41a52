import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ptw.base import Constraint, ConstraintSpecification
from ptw.errors import EmptySamplePlan, InvalidParameter, NonFiniteEvaluation
from ptw.tools import require

logger = logging.getLogger(__name__)

TOLERANCE = 1e-12
THETAS = tuple(np.round(np.arange(0.1, 1.0, 0.1), 10))


@dataclass(frozen=True)
class Regularity:
    """Taylor remainder constants near the zero state.

    For |u| <= sigma, |f(x, u) - D_uf(x, 0) u| <= M |u|^(1 + beta).
    """

    sigma: float
    beta: float
    M: float


@dataclass(frozen=True)
class SamplePlan:
    """Sampling densities used to audit a model.

    Attributes:
        x_per_axis (int): Lattice points per axis of the unit cell.
        x_random (int): Additional uniformly random cell points.
        u_samples (int): Random states drawn from (0, eta_hat]^d.
        seed (int): Seed for numpy.random.default_rng.
        thetas (tuple): Scaling factors probed for subhomogeneity.
    """

    x_per_axis: int = 8
    x_random: int = 16
    u_samples: int = 64
    seed: int = 0
    thetas: tuple = THETAS

    def x_points(self, dim):
        require(
            self.x_per_axis > 0 or self.x_random > 0, "No x samples", EmptySamplePlan
        )
        rng = np.random.default_rng(self.seed)
        points = []
        if self.x_per_axis > 0:
            axis = np.arange(self.x_per_axis) / self.x_per_axis
            mesh = np.meshgrid(*([axis] * dim), indexing="ij")
            points.append(np.column_stack([entry.ravel() for entry in mesh]))
        if self.x_random > 0:
            # dyadic points keep x + k exact in floating point
            points.append(np.floor(rng.random((self.x_random, dim)) * 2**20) / 2**20)
        return np.vstack(points)

    def u_points(self, components, eta_hat):
        require(self.u_samples > 0, "No u samples", EmptySamplePlan)
        rng = np.random.default_rng(self.seed + 1)
        diagonal = np.outer(np.linspace(0.05, 1.0, 8), np.ones(components))
        axes = np.vstack([np.eye(components) * scale for scale in (0.1, 0.5, 1.0)])
        random = 1.0 - rng.random((self.u_samples, components))
        return eta_hat * np.vstack((diagonal, axes, random))


@dataclass
class StructureReport:
    """Outcome of check_structure.

    Every false flag has an entry in `witness` describing a sampled point
    (x, u and component indices) that violates the property.
    """

    cooperative: bool
    fully_coupled: bool
    upper_bound_ok: bool
    subhomogeneous: bool
    sublinear: bool
    strictly_sublinear: bool
    witness: dict = field(default_factory=dict)

    def as_dict(self):
        flags = {
            key: bool(getattr(self, key))
            for key in (
                "cooperative",
                "fully_coupled",
                "upper_bound_ok",
                "subhomogeneous",
                "sublinear",
                "strictly_sublinear",
            )
        }
        flags["witness"] = {
            key: {
                name: np.asarray(value).tolist() for name, value in entry.items()
            }
            for key, entry in self.witness.items()
        }
        return flags


def _wrap(x, dim):
    x = np.asarray(x, dtype=float)
    x = x.reshape(-1, dim) if x.ndim != 2 else x
    return np.mod(x, 1.0)


def _require_finite(values, what):
    if not np.all(np.isfinite(values)):
        raise NonFiniteEvaluation(f"{what} returned non-finite values")
    return values


class ConstrainModelShapes(Constraint):
    """Apply constraints to field output shapes"""

    def func(self, model):
        x = model._audit_x[:2]
        u = np.zeros((len(x), model.components))
        n, d = model.dim, model.components
        require(model.diffusion(x).shape == (2, d, n, n), "Bad diffusion shape")
        require(model.advection(x).shape == (2, d, n), "Bad advection shape")
        require(model.reaction(x, u).shape == (2, d), "Bad reaction shape")
        require(model.jacobian(x, u).shape == (2, d, d), "Bad jacobian shape")


class ConstrainEllipticity(Constraint):
    """Apply symmetry and uniform ellipticity constraints to A^i"""

    def func(self, model):
        A = model.diffusion(model._audit_x)
        require(
            np.allclose(A, np.swapaxes(A, -1, -2), atol=TOLERANCE, rtol=0),
            "Diffusion matrices are not symmetric",
            InvalidParameter,
        )
        eigenvalues = np.linalg.eigvalsh(A)
        model.gamma_lower = float(eigenvalues.min())
        model.gamma_upper = float(eigenvalues.max())
        require(
            model.gamma_lower > 0,
            f"Diffusion is not uniformly elliptic (min eigenvalue "
            f"{model.gamma_lower})",
            InvalidParameter,
        )


class ConstrainPeriodicity(Constraint):
    """Apply 1-periodicity constraint on wrap-around points"""

    def func(self, model):
        x = model._audit_x[:10]
        shifts = np.array(
            np.meshgrid(*([[-1, 0, 1]] * model.dim), indexing="ij")
        ).reshape(model.dim, -1).T
        for field in (model.diffusion, model.advection):
            reference = field(x)
            for shift in shifts:
                require(
                    np.array_equal(field(x + shift), reference),
                    "Coefficient field is not 1-periodic",
                    InvalidParameter,
                )


class ConstrainZeroState(Constraint):
    """Apply f(x, 0) = 0"""

    def func(self, model):
        x = model._audit_x
        values = model.reaction(x, np.zeros((len(x), model.components)))
        require(
            np.abs(values).max() <= TOLERANCE,
            "Reaction does not vanish at u = 0",
            InvalidParameter,
        )


class ConstrainUpperBound(Constraint):
    """Apply f(x, eta_hat 1) <= 0"""

    def func(self, model):
        x = model._audit_x
        u = np.full((len(x), model.components), model.eta_hat)
        require(model.eta_hat > 0, "eta_hat must be positive", InvalidParameter)
        require(
            model.reaction(x, u).max() <= TOLERANCE * (1 + model.eta_hat),
            f"f(x, eta_hat 1) is not <= 0 for eta_hat = {model.eta_hat}",
            InvalidParameter,
        )


class ConstrainRegularity(Constraint):
    """Apply the Taylor remainder bound near zero"""

    def func(self, model):
        reg = model.regularity
        require(
            reg.sigma > 0 and 0 < reg.beta <= 1 and reg.M >= 0,
            f"Invalid regularity constants {reg}",
            InvalidParameter,
        )
        x, u, norm, remainder = _remainder_samples(model, reg.sigma)
        bound = reg.M * norm ** (1 + reg.beta)
        violation = remainder - bound
        require(
            violation.max() <= TOLERANCE,
            f"Regularity bound violated (excess {violation.max():.3e})",
            InvalidParameter,
        )


def _remainder_samples(model, sigma):
    rng = np.random.default_rng(7)
    x = np.repeat(model._audit_x, 16, axis=0)
    scales = sigma * np.tile(np.geomspace(1e-3, 1.0, 16), len(model._audit_x))
    u = scales[:, None] * (1.0 - rng.random((len(x), model.components)))
    u = u / np.abs(u).max(axis=1, keepdims=True) * scales[:, None]
    linear = np.einsum("pij,pj->pi", model.jacobian(x, np.zeros_like(u)), u)
    remainder = np.abs(model.reaction(x, u) - linear).max(axis=1)
    return x, u, np.abs(u).max(axis=1), remainder


class ModelSpec(object):
    """Periodic cooperative reaction-diffusion model.

    Describes the system du/dt - tr(A^i D^2 u_i) + q^i . grad u_i = f_i(x, u)
    with 1-periodic coefficients. Field callables are vectorized: positions
    have shape (P, N) and states shape (P, d). Positions are wrapped into the
    unit cell before every evaluation, so periodicity is exact.

    Attributes:
        dim (int): Spatial dimension N.
        components (int): System size d.
        eta_hat (float): Constant upper state with f(x, eta_hat 1) <= 0.
        regularity (Regularity): Remainder constants (sigma, beta, M).
        gamma_lower (float): Smallest sampled diffusion eigenvalue.
        gamma_upper (float): Largest sampled diffusion eigenvalue.
        name (str): Model name.
        params (dict): Parameters the model was built from.

    Examples:
        >>> model = ModelSpec(1, 1, diffusion, advection, reaction, jacobian,
        ...                   eta_hat=1.0)
        >>> model.reaction([[0.25]], [[0.5]])
        array([[0.25]])
    """

    _constraint_spec = ConstraintSpecification(
        ConstrainModelShapes,
        ConstrainEllipticity,
        ConstrainPeriodicity,
        ConstrainZeroState,
        ConstrainUpperBound,
        ConstrainRegularity,
    )

    def __init__(
        self,
        dim,
        components,
        diffusion,
        advection,
        reaction,
        jacobian,
        eta_hat=None,
        regularity=None,
        name="custom",
        params=None,
        analytic_derivatives=True,
    ):
        require(int(dim) >= 1, "dim must be >= 1", InvalidParameter)
        require(int(components) >= 1, "components must be >= 1", InvalidParameter)
        self.dim = int(dim)
        self.components = int(components)
        self.name = name
        self.params = dict(params or {})
        self.analytic_derivatives = analytic_derivatives
        self._raw = (diffusion, advection, reaction, jacobian)
        self._audit_x = SamplePlan().x_points(self.dim)
        self.eta_hat = (
            float(eta_hat) if eta_hat is not None else self._bisect_eta_hat()
        )
        self.regularity = (
            regularity if regularity is not None else self._fit_regularity()
        )
        self._constraint_spec.apply(self)
        coefficients = np.concatenate(
            (
                self.diffusion(self._audit_x).reshape(len(self._audit_x), -1),
                self.advection(self._audit_x).reshape(len(self._audit_x), -1),
            ),
            axis=1,
        )
        self.homogeneous = bool(np.ptp(coefficients, axis=0).max() == 0)

    def __repr__(self):
        return f"ModelSpec({self.name}, N={self.dim}, d={self.components})"

    def diffusion(self, x):
        x = _wrap(x, self.dim)
        return _require_finite(
            np.asarray(self._raw[0](x), dtype=float), "diffusion"
        )

    def advection(self, x):
        x = _wrap(x, self.dim)
        return _require_finite(
            np.asarray(self._raw[1](x), dtype=float), "advection"
        )

    def reaction(self, x, u):
        x = _wrap(x, self.dim)
        u = np.asarray(u, dtype=float).reshape(len(x), self.components)
        return _require_finite(np.asarray(self._raw[2](x, u), dtype=float), "reaction")

    def jacobian(self, x, u):
        x = _wrap(x, self.dim)
        u = np.asarray(u, dtype=float).reshape(len(x), self.components)
        return _require_finite(np.asarray(self._raw[3](x, u), dtype=float), "jacobian")

    def linearization(self, x):
        """Return H(x) = D_uf(x, 0) with shape (P, d, d)."""
        x = _wrap(x, self.dim)
        return self.jacobian(x, np.zeros((len(x), self.components)))

    def with_fields(self, diffusion=None, advection=None, name=None):
        """Create a copy of this model with replaced coefficient fields.

        Args:
            diffusion (callable, optional): Replacement A^i(x) field.
            advection (callable, optional): Replacement q^i(x) field.
            name (str, optional): Name of the new model.

        Returns:
            ModelSpec: New validated model sharing the nonlinearity.
        """
        return ModelSpec(
            self.dim,
            self.components,
            diffusion if diffusion is not None else self._raw[0],
            advection if advection is not None else self._raw[1],
            self._raw[2],
            self._raw[3],
            eta_hat=self.eta_hat,
            regularity=self.regularity,
            name=name or self.name,
            params=self.params,
            analytic_derivatives=self.analytic_derivatives,
        )

    @property
    def max_advection(self):
        """Largest sampled |q^i(x)|."""
        q = self.advection(self._audit_x)
        return float(np.linalg.norm(q, axis=-1).max())

    def _bisect_eta_hat(self):
        x = self._audit_x
        ones = np.ones((len(x), self.components))

        def excess(s):
            return self.reaction(x, s * ones).max()

        hi = 1.0
        while excess(hi) > 0:
            hi *= 2
            require(hi < 2.0**60, "No constant upper state found", InvalidParameter)
        lo = hi / 2
        while excess(lo) <= 0 and lo > 1e-12:
            hi, lo = lo, lo / 2
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if excess(mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-12 * hi:
                break
        logger.debug("eta_hat bisection for %s: %.12g", self.name, hi)
        return hi

    def _fit_regularity(self):
        sigma = self.eta_hat / 10
        _, _, norm, remainder = _remainder_samples(self, sigma)
        square = norm**2
        least_squares = float(np.dot(remainder, square) / np.dot(square, square))
        ratio = float((remainder / square).max())
        return Regularity(sigma=sigma, beta=1.0, M=2 * max(least_squares, ratio))


def _pairs(model, plan):
    x = plan.x_points(model.dim)
    u = plan.u_points(model.components, model.eta_hat)
    require(len(x) > 0 and len(u) > 0, "Empty sample plan", EmptySamplePlan)
    X = np.repeat(x, len(u), axis=0)
    U = np.tile(u, (len(x), 1))
    return x, X, U


def _witness(X, U, mask, indices=None):
    position = int(np.argmax(mask))
    entry = {"x": X[position], "u": U[position]}
    if indices is not None:
        entry["indices"] = indices[position]
    return entry


def check_structure(model, sample_plan=None):
    """Audit the structural hypotheses of a model.

    Args:
        model (ModelSpec): Model to audit.
        sample_plan (SamplePlan, optional): Sampling densities. Default is
            SamplePlan().

    Returns:
        report (StructureReport): Flags with witnesses for violations.

    Raises:
        EmptySamplePlan: The plan has no x or u samples.
        NonFiniteEvaluation: f or D_uf returned non-finite values.

    Note:
        Subhomogeneity is probed on the plan's theta grid at random states;
        a true flag is evidence, not proof.
    """
    plan = sample_plan or SamplePlan()
    x, X, U = _pairs(model, plan)
    d = model.components
    report = StructureReport(True, True, True, True, True, True)

    J = model.jacobian(X, U)
    off_diagonal = ~np.eye(d, dtype=bool)
    negative = (J < -TOLERANCE) & off_diagonal
    if negative.any():
        report.cooperative = False
        flat = negative.reshape(len(X), -1)
        rows = flat.any(axis=1)
        pairs = np.array([np.unravel_index(np.argmax(row), (d, d)) for row in flat])
        report.witness["cooperative"] = _witness(X, U, rows, pairs)

    H_bar = np.abs(J).max(axis=0) * off_diagonal
    count, labels = connected_components(
        csr_matrix(H_bar > 0), directed=True, connection="strong"
    )
    if count > 1:
        report.fully_coupled = False
        report.witness["fully_coupled"] = {
            "x": x[0],
            "u": U[0],
            "indices": labels,
        }

    top = model.reaction(x, np.full((len(x), d), model.eta_hat))
    above = (top > TOLERANCE * (1 + model.eta_hat)).any(axis=1)
    if above.any():
        report.upper_bound_ok = False
        report.witness["upper_bound_ok"] = _witness(
            x, np.full((len(x), d), model.eta_hat), above
        )

    f = model.reaction(X, U)
    linear = np.einsum("pij,pj->pi", model.linearization(X), U)
    gap = linear - f
    slack = TOLERANCE * (1 + np.abs(linear))
    exceed = (gap < -slack).any(axis=1)
    if exceed.any():
        report.sublinear = False
        report.witness["sublinear"] = _witness(X, U, exceed)
    positive = (U > 0).all(axis=1)
    equal = positive & ~(gap > slack).any(axis=1)
    if not report.sublinear or equal.any():
        report.strictly_sublinear = False
        report.witness["strictly_sublinear"] = (
            report.witness["sublinear"]
            if not report.sublinear
            else _witness(X, U, equal)
        )

    for theta in plan.thetas:
        scaled = model.reaction(X, theta * U)
        failed = (theta * f - scaled > TOLERANCE * (1 + np.abs(scaled))).any(axis=1)
        if failed.any():
            report.subhomogeneous = False
            entry = _witness(X, U, failed)
            entry["theta"] = theta
            report.witness["subhomogeneous"] = entry
            break
    if report.subhomogeneous and not report.sublinear:
        report.subhomogeneous = False
        report.witness["subhomogeneous"] = report.witness["sublinear"]

    logger.debug("structure of %s: %s", model.name, report)
    return report


def lipschitz_bound(model, sample_plan=None):
    """Sampled Lipschitz constant of f on [0, eta_hat]^d.

    Args:
        model (ModelSpec): Model to sample.
        sample_plan (SamplePlan, optional): Sampling densities.

    Returns:
        bound (float): Max row-sum norm of D_uf over the samples.
    """
    plan = sample_plan or SamplePlan()
    _, X, U = _pairs(model, plan)
    U = np.vstack((U, np.zeros((len(np.unique(X, axis=0)), model.components))))
    X = np.vstack((X, np.unique(X, axis=0)))
    J = model.jacobian(X, U)
    return float(np.abs(J).sum(axis=2).max())
