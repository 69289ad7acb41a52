"""Builtin reaction-diffusion models"""

import numpy as np

from ptw.components.model import ModelSpec
from ptw.errors import InvalidParameter
from ptw.interp import FieldInterpolator
from ptw.tools import require


def _positive(name, values):
    values = np.atleast_1d(np.asarray(values, dtype=float))
    require(
        np.all(np.isfinite(values)) and np.all(values > 0),
        f"Parameter '{name}' must be strictly positive",
        InvalidParameter,
    )
    return values


def _per_component(name, values, components):
    values = _positive(name, values)
    if values.size == 1:
        values = np.full(components, values[0])
    require(
        values.size == components,
        f"Parameter '{name}' needs {components} entries",
        InvalidParameter,
    )
    return values


def _constant_diffusion(matrices):
    matrices = np.asarray(matrices, dtype=float)

    def diffusion(x):
        return np.broadcast_to(matrices, (len(x),) + matrices.shape).copy()

    return diffusion


def _isotropic(diffusivity, dim):
    return _constant_diffusion(
        np.array([value * np.eye(dim) for value in np.atleast_1d(diffusivity)])
    )


def _no_advection(components, dim):
    def advection(x):
        return np.zeros((len(x), components, dim))

    return advection


def scalar_kpp(r=1.0, diffusivity=1.0, dim=1, diffusion_matrix=None):
    """Scalar Fisher-KPP model f(u) = r u (1 - u) with constant diffusion.

    Args:
        r (float): Linear growth rate.
        diffusivity (float): Isotropic diffusion coefficient.
        dim (int): Spatial dimension.
        diffusion_matrix (array_like, optional): Constant N x N matrix that
            replaces diffusivity * I.

    Returns:
        ModelSpec: Model with eta_hat = 1.
    """
    (r,) = _positive("r", r)
    (diffusivity,) = _positive("diffusivity", diffusivity)
    if diffusion_matrix is not None:
        matrix = np.asarray(diffusion_matrix, dtype=float).reshape(dim, dim)
        diffusion = _constant_diffusion(matrix[None])
    else:
        diffusion = _isotropic([diffusivity], dim)

    def reaction(x, u):
        return r * u * (1 - u)

    def jacobian(x, u):
        return (r * (1 - 2 * u))[:, :, None]

    return ModelSpec(
        dim,
        1,
        diffusion,
        _no_advection(1, dim),
        reaction,
        jacobian,
        eta_hat=1.0,
        name="scalar_kpp",
        params={"r": r, "diffusivity": diffusivity, "dim": dim},
    )


def constant_coop2(dim=1, coupling=2.0, decay=1.0):
    """Two-component cooperative system f(u) = H u - u |u|_inf.

    H = [[-decay, coupling], [coupling, -decay]], unit diffusion, no
    advection. The Perron eigenvalue of H is coupling - decay.
    """
    (coupling,) = _positive("coupling", coupling)
    (decay,) = _positive("decay", decay)
    H = np.array([[-decay, coupling], [coupling, -decay]])

    def reaction(x, u):
        return u @ H.T - u * np.abs(u).max(axis=1, keepdims=True)

    def jacobian(x, u):
        norm = np.abs(u).max(axis=1)
        top = np.argmax(np.abs(u), axis=1)
        sign = np.sign(u[np.arange(len(u)), top])
        J = np.broadcast_to(H, (len(u), 2, 2)).copy()
        J -= norm[:, None, None] * np.eye(2)
        J[np.arange(len(u)), :, top] -= u * sign[:, None]
        return J

    return ModelSpec(
        dim,
        2,
        _isotropic([1.0, 1.0], dim),
        _no_advection(2, dim),
        reaction,
        jacobian,
        eta_hat=max(coupling - decay, 1.0),
        name="constant_coop2",
        params={"dim": dim, "coupling": coupling, "decay": decay},
    )


def feedback_loop(p=1.0, alpha=(0.5, 1.0, 1.0), dim=1, diffusivity=1.0):
    """Cyclic feedback loop of protein synthesis.

    f_1 = g(u_d) - alpha_1 u_1 and f_i = u_{i-1} - alpha_i u_i for i > 1,
    with g(s) = s^p / (1 + s^p).
    Since g < 1, eta_hat = 1 / alpha_1 is an upper state whenever
    alpha_i >= 1 for i > 1.

    Args:
        p (float): Hill exponent, p >= 1.
        alpha (sequence): Positive decay rates, one per component.
        dim (int): Spatial dimension.
        diffusivity (float or sequence): Diffusion per component.
    """
    (p,) = _positive("p", p)
    require(p >= 1, "Parameter 'p' must be >= 1", InvalidParameter)
    alpha = _positive("alpha", alpha)
    d = alpha.size
    require(d >= 2, "feedback_loop needs at least two components", InvalidParameter)
    diffusivity = _per_component("diffusivity", diffusivity, d)

    def g(s):
        s = np.maximum(s, 0.0)
        return s**p / (1 + s**p)

    def dg(s):
        s = np.maximum(s, 0.0)
        return p * s ** (p - 1) / (1 + s**p) ** 2

    def reaction(x, u):
        f = -alpha * u
        f[:, 0] += g(u[:, -1])
        f[:, 1:] += u[:, :-1]
        return f

    def jacobian(x, u):
        J = np.broadcast_to(-np.diag(alpha), (len(u), d, d)).copy()
        J[:, 0, -1] += dg(u[:, -1])
        for idx in range(1, d):
            J[:, idx, idx - 1] += 1.0
        return J

    return ModelSpec(
        dim,
        d,
        _isotropic(diffusivity, dim),
        _no_advection(d, dim),
        reaction,
        jacobian,
        eta_hat=float(1 / alpha[0]),
        name="feedback_loop",
        params={"p": p, "alpha": alpha.tolist(), "dim": dim},
    )


def rabies_sir(
    S0=(1.0, 1.0),
    beta=((1.0, 0.5), (0.5, 1.0)),
    delta=(0.5, 0.5),
    diffusivity=(1.0, 1.0),
    modulation=0.0,
    dim=1,
):
    """Rabies circulation between two host populations.

    f_i = S_i(x) (1 - exp(-sum_j beta_ij u_j)) - delta_i u_i with
    S_i(x) = S0_i (1 + modulation cos(2 pi x_1)).
    """
    S0 = _positive("S0", S0)
    d = S0.size
    delta = _per_component("delta", delta, d)
    diffusivity = _per_component("diffusivity", diffusivity, d)
    beta = np.asarray(beta, dtype=float).reshape(d, d)
    require(np.all(beta > 0), "Parameter 'beta' must be strictly positive",
            InvalidParameter)
    require(0 <= modulation < 1, "Parameter 'modulation' must lie in [0, 1)",
            InvalidParameter)

    def susceptible(x):
        return S0 * (1 + modulation * np.cos(2 * np.pi * x[:, :1]))

    def reaction(x, u):
        return susceptible(x) * (1 - np.exp(-u @ beta.T)) - delta * u

    def jacobian(x, u):
        weight = susceptible(x) * np.exp(-u @ beta.T)
        return weight[:, :, None] * beta[None] - np.diag(delta)[None]

    return ModelSpec(
        dim,
        d,
        _isotropic(diffusivity, dim),
        _no_advection(d, dim),
        reaction,
        jacobian,
        eta_hat=float(np.max(S0 * (1 + modulation) / delta)),
        name="rabies_sir",
        params={
            "S0": S0.tolist(),
            "beta": beta.tolist(),
            "delta": delta.tolist(),
            "modulation": modulation,
            "dim": dim,
        },
    )


def patch_logistic(eps=1.0, r=(1.0, 1.0), K=(1.0, 1.0), dim=1, diffusivity=1.0):
    """Logistic growth on a chain of patches with migration.

    f_i = eps sum_{j ~ i} (u_j - u_i) + r_i u_i (1 - u_i / K_i), where j ~ i
    are the chain neighbours of patch i.
    """
    (eps,) = _positive("eps", eps)
    r = _positive("r", r)
    d = r.size
    K = _per_component("K", K, d)
    diffusivity = _per_component("diffusivity", diffusivity, d)
    adjacency = np.eye(d, k=1) + np.eye(d, k=-1)
    migration = eps * (adjacency - np.diag(adjacency.sum(axis=1)))

    def reaction(x, u):
        return u @ migration.T + r * u * (1 - u / K)

    def jacobian(x, u):
        return migration[None] + np.einsum("pi,ij->pij", r * (1 - 2 * u / K),
                                           np.eye(d))

    return ModelSpec(
        dim,
        d,
        _isotropic(diffusivity, dim),
        _no_advection(d, dim),
        reaction,
        jacobian,
        eta_hat=float(K.max()),
        name="patch_logistic",
        params={"eps": eps, "r": r.tolist(), "K": K.tolist(), "dim": dim},
    )


def periodic_scalar(amplitude=0.5, phase=0.0, diffusion_amplitude=0.0,
                    advection=0.0, dim=1):
    """Scalar KPP model in a periodic medium.

    f = r(x) u (1 - u) with r(x) = 1 + amplitude cos(2 pi x_1 - phase),
    A(x) = (1 + diffusion_amplitude cos(2 pi x_1)) I and constant advection
    along the first axis.
    """
    require(abs(amplitude) < 1, "Parameter 'amplitude' must lie in (-1, 1)",
            InvalidParameter)
    require(abs(diffusion_amplitude) < 1,
            "Parameter 'diffusion_amplitude' must lie in (-1, 1)", InvalidParameter)

    def growth(x):
        return 1 + amplitude * np.cos(2 * np.pi * x[:, :1] - phase)

    def diffusion(x):
        scale = 1 + diffusion_amplitude * np.cos(2 * np.pi * x[:, 0])
        return scale[:, None, None, None] * np.eye(dim)[None, None]

    def drift(x):
        q = np.zeros((len(x), 1, dim))
        q[:, 0, 0] = advection
        return q

    def reaction(x, u):
        return growth(x) * u * (1 - u)

    def jacobian(x, u):
        return (growth(x) * (1 - 2 * u))[:, :, None]

    return ModelSpec(
        dim,
        1,
        diffusion,
        drift,
        reaction,
        jacobian,
        eta_hat=1.0,
        name="periodic_scalar",
        params={
            "amplitude": amplitude,
            "phase": phase,
            "diffusion_amplitude": diffusion_amplitude,
            "advection": advection,
            "dim": dim,
        },
    )


def saturating_decay(mu=0.5, dim=1, diffusivity=1.0):
    """Stable scalar model f(u) = u / (1 + u) - (1 + mu) u.

    f'(0) = -mu < 0, so the zero state is linearly stable; the model is
    strictly sublinear.
    """
    (mu,) = _positive("mu", mu)
    (diffusivity,) = _positive("diffusivity", diffusivity)

    def reaction(x, u):
        return u / (1 + u) - (1 + mu) * u

    def jacobian(x, u):
        return (1 / (1 + u) ** 2 - (1 + mu))[:, :, None]

    return ModelSpec(
        dim,
        1,
        _isotropic([diffusivity], dim),
        _no_advection(1, dim),
        reaction,
        jacobian,
        eta_hat=1.0,
        name="saturating_decay",
        params={"mu": mu, "diffusivity": diffusivity, "dim": dim},
    )


BUILTIN_MODELS = {
    "scalar_kpp": scalar_kpp,
    "constant_coop2": constant_coop2,
    "feedback_loop": feedback_loop,
    "rabies_sir": rabies_sir,
    "patch_logistic": patch_logistic,
    "periodic_scalar": periodic_scalar,
    "saturating_decay": saturating_decay,
}


def builtin_model(name, **params):
    """Create a builtin model by name.

    Args:
        name (str): One of BUILTIN_MODELS.
        **params: Model parameters.

    Returns:
        ModelSpec: Validated model.

    Raises:
        InvalidParameter: Unknown name or nonpositive rates.

    Examples:
        >>> model = builtin_model("scalar_kpp", r=4)
        >>> model.eta_hat
        1.0
    """
    try:
        builder = BUILTIN_MODELS[name]
    except KeyError:
        raise InvalidParameter(f"Unknown builtin model: '{name}'")
    try:
        return builder(**params)
    except TypeError as exc:
        raise InvalidParameter(f"Invalid parameters for '{name}': {exc}") from exc


def with_tables(model, diffusion_table=None, advection_table=None):
    """Replace coefficient fields by tabulated periodic node values.

    Args:
        model (ModelSpec): Model supplying the nonlinearity.
        diffusion_table (ndarray, optional): Per-cell node values with shape
            (n_1, ..., n_N, d) for isotropic diffusion or
            (n_1, ..., n_N, d, N, N) for full matrices.
        advection_table (ndarray, optional): Node values with shape
            (n_1, ..., n_N, d, N).

    Returns:
        ModelSpec: Model with multilinearly interpolated fields.
    """
    dim, d = model.dim, model.components
    diffusion = advection = None
    if diffusion_table is not None:
        table = np.asarray(diffusion_table, dtype=float)
        if table.ndim == dim + 1:
            table = table[..., None, None] * np.eye(dim)
        require(
            table.shape[dim:] == (d, dim, dim),
            f"Diffusion table has shape {table.shape}",
            InvalidParameter,
        )
        diffusion = FieldInterpolator(table, dim, method="linear")
    if advection_table is not None:
        table = np.asarray(advection_table, dtype=float)
        require(
            table.shape[dim:] == (d, dim),
            f"Advection table has shape {table.shape}",
            InvalidParameter,
        )
        advection = FieldInterpolator(table, dim, method="linear")
    return model.with_fields(diffusion, advection, name=f"{model.name}+tables")
