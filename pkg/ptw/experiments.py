"""Task runners shared by the command line and config files.

Every runner takes a validated ExperimentConfig and an ArtifactWriter,
writes its CSV and JSON artifacts and returns a TaskOutcome. `run` adds the
manifest.
"""

import hashlib
import json
import logging
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from ptw import CURRENT_VERSION
from ptw.barriers import (
    Window,
    build_critical_pair,
    build_sub_omega,
    build_super_h,
    support_start,
    verify_barrier,
)
from ptw.cauchy import extinction_test, hair_trigger_test, spreading_speed
from ptw.components.model import SamplePlan, check_structure
from ptw.components.types import SpeedPolar
from ptw.disc import PeriodicGrid
from ptw.eigen import (
    dirichlet_principal_eigenpair,
    dispersion_curve,
    generalized_principal_eigenvalue,
    k_of,
)
from ptw.errors import HypothesisUnmet, NoConvergence, PtwError, UnstableZeroState
from ptw.speed import minimal_speed, speed_polar
from ptw.tools import format_float, nearest_rational_direction, sample_directions
from ptw.wave import construct_pulsating_wave, rational_frame, speed_dichotomy, verify_wave

logger = logging.getLogger(__name__)

WAVE_FACTORS = (1.0, 1.2, 2.0)
DEFAULT_WAVE_FACTOR = 1.2
BELOW_MINIMAL_FACTOR = 0.9

WAVE_OPTIONS = {
    "A": "a",
    "R_MAX": "r_max",
    "TOL": "tol",
    "MAX_ITER": "max_iter",
    "H_R": "h_r",
    "CROSS_POINTS": "cross_points",
}
SIMULATION_OPTIONS = {
    "spreading": {
        "HORIZON": "T",
        "LEVEL": "level",
        "LENGTH": "length",
        "RESOLUTION": "resolution",
        "DT": "dt",
        "SNAPSHOT_EVERY": "snapshot_every",
    },
    "hair_trigger": {
        "HORIZON": "T",
        "RADIUS": "radius",
        "RESOLUTION": "resolution",
        "DT": "dt",
        "SNAPSHOT_EVERY": "snapshot_every",
    },
    "extinction": {
        "HORIZON": "T",
        "DT": "dt",
        "SNAPSHOT_EVERY": "snapshot_every",
    },
}


def tool_version():
    try:
        return version("ptw")
    except PackageNotFoundError:
        return "unknown"


def jsonable(value):
    """Plain JSON types with floats rounded to 9 significant digits.

    Non-finite floats become None.
    """
    if isinstance(value, dict):
        return {str(key): jsonable(entry) for key, entry in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(entry) for entry in value]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return float(format_float(value)) if np.isfinite(value) else None
    return value


def dumps(data):
    return json.dumps(jsonable(data), indent=2, sort_keys=True) + "\n"


class ArtifactWriter(object):
    """Writes task artifacts into one directory and records their digests.

    Attributes:
        directory (Path): Output directory, created on first use.
        files (dict): SHA-256 of every written file keyed by file name.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.files = {}

    def __repr__(self):
        return f"ArtifactWriter({self.directory}, files: {len(self.files)})"

    def path(self, name):
        self.directory.mkdir(parents=True, exist_ok=True)
        return self.directory / name

    def save(self, name, obj):
        """Write an object with a save_as(file_path) method."""
        obj.save_as(self.path(name))
        self._record(name)

    def json(self, name, data):
        self.path(name).write_text(dumps(data), encoding="utf-8")
        self._record(name)

    def _record(self, name):
        digest = hashlib.sha256(self.path(name).read_bytes()).hexdigest()
        self.files[name] = digest
        logger.debug("wrote %s (%s)", self.path(name), digest[:12])


class TaskOutcome(object):
    """Result of one task.

    Attributes:
        task (str): Task name.
        lines (list): Summary lines for standard output.
        diagnostics (dict): Per-task diagnostics recorded in the manifest.
        passed (bool): False when a numerical check of the task failed.
        manifest (dict): Manifest written by run, None before.
    """

    def __init__(self, task, lines, diagnostics, passed=True):
        self.task = task
        self.lines = list(lines)
        self.diagnostics = dict(diagnostics)
        self.passed = bool(passed)
        self.manifest = None

    def __repr__(self):
        return f"TaskOutcome({self.task}, passed={self.passed})"

    @property
    def status(self):
        return 0 if self.passed else 1


def cell_grid(model, points=None):
    """Unit-cell grid, 32 points per axis in 1-D and 16 otherwise."""
    return PeriodicGrid(model.dim, points or (32 if model.dim == 1 else 16))


def _solver_options(config):
    tol = config.numerics("TOL")
    return {"tol": tol} if tol is not None else {}


def _options(getter, mapping):
    options = {}
    for key, name in mapping.items():
        value = getter(key)
        if value is not None:
            options[name] = value
    return options


def wave_speed(value, speed):
    """Resolve a configured wave speed against c*.

    Args:
        value: None (1.2 c*), 'critical', ('factor', x) or a number.
        speed (SpeedResult): Minimal speed in the wave direction.

    Returns:
        c (float): Wave speed.
    """
    if value is None:
        return DEFAULT_WAVE_FACTOR * speed.c_star
    if isinstance(value, str):
        return speed.c_star
    if isinstance(value, tuple):
        return value[1] * speed.c_star
    return float(value)


def wave_direction(config, model):
    p = config.wave("DIRECTION")
    if p is None:
        p = nearest_rational_direction(config.direction(model.dim))
    return rational_frame(p)


def run_eigen(config, writer):
    model = config.model()
    e = config.direction(model.dim)
    lam = config.numerics("LAMBDA", 0.0)
    grid = cell_grid(model, config.numerics("POINTS"))
    pair = k_of(model, e, lam, grid, **_solver_options(config))
    lambda_1, lambda_bar = generalized_principal_eigenvalue(model, e, grid)
    report = {
        "model": model.name,
        "direction": e,
        "lambda": lam,
        "k": pair.value,
        "residual": pair.residual,
        "iterations": pair.iterations,
        "bracket": pair.bracket,
        "lambda_1": lambda_1,
        "lambda_bar": lambda_bar,
    }
    radii = config.numerics("DIRICHLET_RADII")
    if radii is not None:
        report["dirichlet"] = [
            {"R": R, "value": dirichlet_principal_eigenpair(model, R).value}
            for R in radii
        ]
    writer.save("eigenfunction.csv", pair)
    writer.json("eigen.json", report)
    return TaskOutcome("eigen", [f"k={pair.value:.6f}"], report)


def run_dispersion(config, writer):
    model = config.model()
    e = config.direction(model.dim)
    grid = cell_grid(model, config.numerics("POINTS"))
    curve = dispersion_curve(model, e, config.numerics("LAMBDAS"), grid,
                             **_solver_options(config))
    writer.save("dispersion.csv", curve)
    writer.json("dispersion.json", curve.as_dict())
    lines = [f"lambda={lam:.6f} k={k:.6f}" for lam, k in curve.samples]
    return TaskOutcome("dispersion", lines, {"samples": len(curve)})


def run_speed(config, writer):
    model = config.model()
    e = config.direction(model.dim)
    grid = cell_grid(model, config.numerics("POINTS"))
    solver_options = _solver_options(config)
    result = minimal_speed(model, e, grid, **solver_options)
    report = dict(result.as_dict(), identity_residual=result.identity_residual)
    count = config.numerics("DIRECTIONS")
    if count is not None:
        polar = speed_polar(model, sample_directions(model.dim, count), grid,
                            **solver_options)
        report["max_jump"] = polar.max_jump
    else:
        polar = SpeedPolar([result])
    writer.save("speed.csv", polar)
    writer.save("dispersion.csv", result.curve)
    writer.json("speed.json", report)
    line = f"c_star={result.c_star:.6f} lambda_star={result.lambda_star:.6f}"
    return TaskOutcome("speed", [line], report)


def run_wave(config, writer):
    model = config.model()
    frame = wave_direction(config, model)
    grid = cell_grid(model, config.numerics("POINTS"))
    speed = minimal_speed(model, frame.e, grid)
    c = wave_speed(config.wave("SPEED"), speed)
    structure = check_structure(model, SamplePlan(seed=config.seed))
    profile = construct_pulsating_wave(
        model, frame, c, cell_grid=grid, speed=speed,
        **_options(config.wave, WAVE_OPTIONS)
    )
    verification = verify_wave(model, profile, structure=structure)
    writer.save("wave_profile.csv", profile)
    writer.json("wave.json", {"profile": profile.as_dict(), "verification": verification})
    line = (
        f"c={profile.speed:.6f} c_star={profile.c_star:.6f} "
        f"iterations={len(profile.trace)} residual={profile.residual:.3e}"
    )
    return TaskOutcome("wave", [line], profile.as_dict(), passed=verification["passed"])


def _speed_report(model, result):
    try:
        c_star = minimal_speed(model, np.eye(model.dim)[0], cell_grid(model)).c_star
        backward = minimal_speed(model, -np.eye(model.dim)[0], cell_grid(model)).c_star
    except UnstableZeroState:
        return {"measured": result.speeds}
    expected = {"+e1": c_star, "-e1": backward}
    return {
        "measured": result.speeds,
        "c_star": expected,
        "relative_error": {
            key: abs(result.speeds[key] - expected[key]) / expected[key]
            for key in expected
        },
    }


def run_simulate(config, writer):
    model = config.model()
    kind = config.simulation("KIND")
    options = _options(config.simulation, SIMULATION_OPTIONS[kind])
    if kind == "spreading":
        result = spreading_speed(model, **options)
        summary = {"kind": kind, "speed": _speed_report(model, result),
                   "traces": {"t": result.times, "right": result.right,
                              "left": result.left}}
        lines = [" ".join(f"speed_{key}={value:.6f}"
                          for key, value in result.speeds.items())]
        passed = True
    elif kind == "hair_trigger":
        result = hair_trigger_test(model, **options)
        summary = dict(result.as_dict(), kind=kind)
        lines = [f"persisted={str(result.persisted).lower()} "
                 f"floor={result.floor.min():.6e}"]
        passed = result.persisted
    else:
        result = extinction_test(model, **options)
        summary = dict(result.as_dict(), kind=kind,
                       traces={"t": result.times, "sup": result.sup_trace})
        lines = [f"extinct={str(result.extinct).lower()} "
                 f"final_sup={result.sup_trace[-1]:.6e}"]
        passed = result.extinct
    if result.trajectory is not None:
        writer.save("trajectory.csv", result.trajectory)
    writer.json("simulation.json", summary)
    return TaskOutcome("simulate", lines, summary, passed=passed)


def _claim(name, passed, **details):
    return {"claim": name, "passed": passed, "details": details}


def _wave_claim(model, frame, factor, speed, grid, structure, options):
    name = f"wave_at_{factor:.1f}c*"
    c = factor * speed.c_star
    try:
        profile = construct_pulsating_wave(model, frame, c, cell_grid=grid, speed=speed,
                                           **options)
    except NoConvergence as exc:
        return _claim(name, False, speed=c, error=str(exc), iterations=exc.iterations,
                      residual=exc.residual)
    except PtwError as exc:
        return _claim(name, False, speed=c, error=str(exc))
    verification = verify_wave(model, profile, structure=structure)
    return _claim(name, verification["passed"], speed=c, profile=profile.as_dict(),
                  verification=verification)


def verify_all(config):
    """Check the qualitative statements about fronts for the configured model.

    For an unstable zero state: the minimal speed identity, wave
    construction at 1.0, 1.2 and 2.0 times c* with verify_wave, failure of
    the construction at 0.9 c* and hair-trigger persistence. For a stable
    zero state: refusal of the wave construction and extinction.

    Args:
        config (ExperimentConfig): Config with a MODEL block; WAVE and
            SIMULATION blocks, when present, tune the constructions.

    Returns:
        report (dict): 'model', 'lambda_p', 'claims' (each with 'claim',
            'passed' (None when skipped) and 'details') and overall 'passed'.
    """
    model = config.model()
    grid = cell_grid(model, config.numerics("POINTS"))
    frame = wave_direction(config, model)
    structure = check_structure(model, SamplePlan(seed=config.seed))
    lambda_p = k_of(model, frame.e, 0.0, grid).value
    wave_options = _options(config.wave, WAVE_OPTIONS)
    horizon = _options(config.simulation, {"HORIZON": "T", "DT": "dt"})
    claims = []

    if lambda_p < 0:
        speed = minimal_speed(model, frame.e, grid)
        window = 1e-6 * (1 + speed.c_star)
        claims.append(_claim("minimal_speed", speed.identity_residual <= window,
                             **speed.as_dict(), identity_residual=speed.identity_residual))
        for factor in WAVE_FACTORS:
            claims.append(
                _wave_claim(model, frame, factor, speed, grid, structure, wave_options)
            )
        try:
            below = speed_dichotomy(model, frame, BELOW_MINIMAL_FACTOR, speed=speed,
                                    cell_grid=grid, **wave_options)
        except HypothesisUnmet as exc:
            claims.append(_claim("no_wave_below_c*", None, reason=str(exc)))
        else:
            claims.append(_claim("no_wave_below_c*", below["failed"], **below))
        try:
            trigger = hair_trigger_test(model, cell_grid=grid, **horizon)
        except HypothesisUnmet as exc:
            claims.append(_claim("hair_trigger", None, reason=str(exc)))
        else:
            claims.append(_claim("hair_trigger", trigger.persisted, **trigger.as_dict()))
    else:
        try:
            minimal_speed(model, frame.e, grid)
        except UnstableZeroState as exc:
            claims.append(_claim("wave_refused", True, reason=str(exc)))
        else:
            claims.append(_claim("wave_refused", False))
        try:
            extinction = extinction_test(model, grid=grid, **horizon)
        except HypothesisUnmet as exc:
            claims.append(_claim("extinction", None, reason=str(exc)))
        else:
            claims.append(_claim("extinction",
                                 extinction.extinct and extinction.nonincreasing,
                                 **extinction.as_dict()))

    report = {
        "model": model.name,
        "direction": frame.p,
        "lambda_p": lambda_p,
        "claims": claims,
        "passed": all(claim["passed"] is not False for claim in claims),
    }
    logger.debug("verify-all %s: %s", model.name, report["passed"])
    return report


def run_verify_all(config, writer):
    report = verify_all(config)
    writer.json("verify_all.json", report)
    labels = {True: "PASS", False: "FAIL", None: "SKIP"}
    lines = [f"{claim['claim']}: {labels[claim['passed']]}" for claim in report["claims"]]
    diagnostics = {claim["claim"]: claim["passed"] for claim in report["claims"]}
    return TaskOutcome("verify-all", lines, diagnostics, passed=report["passed"])


RUNNERS = {
    "eigen": run_eigen,
    "dispersion": run_dispersion,
    "speed": run_speed,
    "wave": run_wave,
    "simulate": run_simulate,
    "verify-all": run_verify_all,
}


def run(config):
    """Run the config's task and write its artifacts and manifest.

    Args:
        config (ExperimentConfig): Validated config.

    Returns:
        outcome (TaskOutcome): Summary lines, diagnostics and the manifest.

    Raises:
        PtwError: Any numerical failure of the task.
    """
    writer = ArtifactWriter(config.output_dir)
    outcome = RUNNERS[config.task](config, writer)
    manifest = {
        "tool_version": tool_version(),
        "config_version": CURRENT_VERSION,
        "config_sha256": config.digest,
        "task": config.task,
        "seed": config.seed,
        "passed": outcome.passed,
        "artifacts": dict(writer.files),
        "diagnostics": outcome.diagnostics,
    }
    writer.json("manifest.json", manifest)
    outcome.manifest = manifest
    return outcome


BARRIER_KINDS = ("super_h", "sub_omega", "sub_omega_star", "super_h_star")


def barrier_window(barrier, step=0.05):
    """Sample window along the barrier's direction around its support.

    The travelling coordinate covers [s0 - 5, s0 + 20 + c] with s0 from
    support_start, so some of it stays positive for t in [0, 1].
    """
    start = support_start(barrier)
    lower, upper = start - 5.0, start + 20.0 + barrier.speed
    dim = barrier.model.dim
    centre = 0.5 * (lower + upper) * barrier.direction
    half = 0.5 * (upper - lower)
    return Window(x_lower=tuple(centre - half), x_upper=tuple(centre + half),
                  x_points=81 if dim == 1 else 21, step=step)


def barrier_report(model, kind, e, c=None, window=None, grid=None, step=0.05):
    """Build one barrier and check its differential inequality.

    Args:
        model (ModelSpec): Model.
        kind (str): One of BARRIER_KINDS.
        e (array_like): Direction.
        c (float, optional): Speed for super_h and sub_omega; the critical
            kinds always use c*.
        window (Window, optional): Sample window. Default is
            barrier_window(barrier, step).
        grid (PeriodicGrid, optional): Unit-cell grid.
        step (float, optional): Finite-difference step of the default window.

    Returns:
        report (dict): Verification report with the barrier constants.
    """
    grid = grid or cell_grid(model)
    if kind in ("sub_omega_star", "super_h_star"):
        sub, sup = build_critical_pair(model, e, grid)
        barrier = sub if kind == "sub_omega_star" else sup
    elif kind == "super_h":
        barrier = build_super_h(model, e, c, grid)
    elif kind == "sub_omega":
        barrier = build_sub_omega(model, e, c, grid)
    else:
        raise ValueError(f"Unknown barrier kind '{kind}'")
    window = window or barrier_window(barrier, step)
    return dict(verify_barrier(model, barrier, window).as_dict(), speed=barrier.speed)
