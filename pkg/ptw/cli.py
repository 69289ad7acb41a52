"""Command line interface.

Each task subcommand builds an ExperimentConfig from its flags (optionally
on top of --config FILE) and runs it; `run FILE` runs a config file as is.
Flags mirror config keys; model parameters are given as --<parameter>
VALUE, e.g. `ptw speed --model scalar_kpp --r 1`.

Exit codes: 0 success, 1 numerical failure, 2 config or argument error.
"""

import argparse
import logging
import sys

import numpy as np

from ptw import CURRENT_VERSION
from ptw.components.sections import ModelSection, parse_direction, parse_positive
from ptw.errors import ConfigError, PtwError
from ptw.experiments import (
    BARRIER_KINDS,
    ArtifactWriter,
    barrier_report,
    run,
)
from ptw.interface import DEFAULT_OUTPUT_DIR, ExperimentConfig, output_directory

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

_NUMERICS = [
    ("--direction", "NUMERICS", "DIRECTION", "direction e_1,...,e_N"),
    ("--points", "NUMERICS", "POINTS", "unit-cell grid points per axis"),
    ("--tol", "NUMERICS", "TOL", "eigen residual tolerance"),
]

FLAGS = {
    "eigen": _NUMERICS + [
        ("--lambda", "NUMERICS", "LAMBDA", "exponential weight lambda"),
        ("--dirichlet-radii", "NUMERICS", "DIRICHLET_RADII", "ball radii R,..."),
    ],
    "dispersion": _NUMERICS + [
        ("--lambdas", "NUMERICS", "LAMBDAS", "increasing lambda samples"),
    ],
    "speed": _NUMERICS + [
        ("--directions", "NUMERICS", "DIRECTIONS", "number of polar directions"),
    ],
    "wave": [
        ("--direction", "WAVE", "DIRECTION", "integer direction p_1,...,p_N"),
        ("--speed", "WAVE", "SPEED", "speed, 'critical' or N*c"),
        ("--a", "WAVE", "A", "left boundary of the cylinder"),
        ("--rmax", "WAVE", "R_MAX", "right truncation of the cylinder"),
        ("--tol", "WAVE", "TOL", "Picard tolerance"),
        ("--max-iter", "WAVE", "MAX_ITER", "Picard iteration cap"),
        ("--h-r", "WAVE", "H_R", "axial spacing"),
        ("--cross-points", "WAVE", "CROSS_POINTS", "cross-section points"),
        ("--points", "NUMERICS", "POINTS", "unit-cell grid points per axis"),
    ],
    "simulate": [
        ("--kind", "SIMULATION", "KIND", "spreading, hair_trigger or extinction"),
        ("--horizon", "SIMULATION", "HORIZON", "final time"),
        ("--level", "SIMULATION", "LEVEL", "tracked level of u_1"),
        ("--length", "SIMULATION", "LENGTH", "half width of the spreading box"),
        ("--radius", "SIMULATION", "RADIUS", "hair-trigger floor radius"),
        ("--resolution", "SIMULATION", "RESOLUTION", "grid points per unit length"),
        ("--dt", "SIMULATION", "DT", "time step"),
        ("--snapshot-every", "SIMULATION", "SNAPSHOT_EVERY", "snapshot interval"),
    ],
    "verify-all": [
        ("--direction", "WAVE", "DIRECTION", "integer direction p_1,...,p_N"),
        ("--tol", "WAVE", "TOL", "Picard tolerance"),
        ("--max-iter", "WAVE", "MAX_ITER", "Picard iteration cap"),
        ("--points", "NUMERICS", "POINTS", "unit-cell grid points per axis"),
    ],
}


def _dest(flag):
    return flag[2:].replace("-", "_")


def build_parser():
    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--verbose", "-v", action="store_true",
                        help="log iteration traces")
    common.add_argument("--output", help=f"output directory (default {DEFAULT_OUTPUT_DIR})")

    task = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    task.add_argument("--config", help="config file the flags are applied to")
    task.add_argument("--model", help="builtin model name")
    task.add_argument("--seed", help="seed of the structure audit samples")

    parser = argparse.ArgumentParser(
        prog="ptw",
        description="Pulsating travelling waves of periodic cooperative systems.",
        allow_abbrev=False,
    )
    commands = parser.add_subparsers(dest="command", required=True)
    for name, flags in FLAGS.items():
        sub = commands.add_parser(name, parents=[common, task], allow_abbrev=False)
        for flag, block, key, help in flags:
            sub.add_argument(flag, dest=_dest(flag), help=f"{help} ({block}.{key})")

    runner = commands.add_parser("run", parents=[common], allow_abbrev=False,
                                 help="run a config file")
    runner.add_argument("file", help="KVN or XML config")

    barrier = commands.add_parser("barrier", allow_abbrev=False,
                                  help="barrier function checks")
    actions = barrier.add_subparsers(dest="action", required=True)
    verify = actions.add_parser("verify", parents=[common], allow_abbrev=False)
    verify.add_argument("--model", required=True, help="builtin model name")
    verify.add_argument("--kind", required=True, choices=BARRIER_KINDS)
    verify.add_argument("--speed", help="speed for super_h and sub_omega")
    verify.add_argument("--direction", help="direction e_1,...,e_N")
    verify.add_argument("--step", type=float, default=0.05,
                        help="finite-difference step")
    return parser


def _model_fields(extras):
    """MODEL fields from leftover --<parameter> VALUE arguments."""
    fields = {}
    tokens = list(extras)
    while tokens:
        token = tokens.pop(0)
        if not token.startswith("--"):
            raise ConfigError(f"Unexpected argument '{token}'")
        key, separator, value = token[2:].partition("=")
        key = key.replace("-", "_").upper()
        if not separator:
            if not tokens:
                raise ConfigError("Missing value", f"model.{key}")
            value = tokens.pop(0)
        fields[key] = value
    return fields


def config_from_args(args, extras):
    """Build the ExperimentConfig described by a task subcommand."""
    if args.config:
        header, blocks = ExperimentConfig.open(args.config).raw()
    else:
        header, blocks = {"PTW_CONFIG_VERS": CURRENT_VERSION}, {}
    header["TASK"] = args.command
    if args.output:
        header["OUTPUT_DIR"] = args.output
    if args.seed is not None:
        header["SEED"] = args.seed
    if args.model and blocks.get("MODEL", {}).get("NAME") != args.model:
        blocks["MODEL"] = {"NAME": args.model}
    model_fields = _model_fields(extras)
    if model_fields:
        blocks.setdefault("MODEL", {}).update(model_fields)
    for flag, block, key, _ in FLAGS[args.command]:
        value = getattr(args, _dest(flag))
        if value is not None:
            blocks.setdefault(block, {})[key] = value
    return ExperimentConfig._from_raw_data((header, blocks), args.config)


def verify_barrier_command(args, extras):
    fields = {"NAME": args.model}
    fields.update(_model_fields(extras))
    model = ModelSection(fields).build()
    e = np.eye(model.dim)[0]
    if args.direction:
        try:
            e = parse_direction(args.direction, None)
        except ValueError as exc:
            raise ConfigError(str(exc), "barrier.DIRECTION") from exc
    c = None
    if args.kind in ("super_h", "sub_omega"):
        if args.speed is None:
            raise ConfigError(f"{args.kind} needs a speed", "barrier.SPEED")
        try:
            c = parse_positive(args.speed, None)
        except ValueError as exc:
            raise ConfigError(str(exc), "barrier.SPEED") from exc
    report = barrier_report(model, args.kind, e, c, step=args.step)
    writer = ArtifactWriter(output_directory(args.output or DEFAULT_OUTPUT_DIR))
    writer.json("barrier.json", report)
    print(
        f"{report['kind']} max_violation={report['max_violation']:.3e} "
        f"tol_fd={report['tol_fd']:.3e} passed={str(report['passed']).lower()}"
    )
    return EXIT_OK if report["passed"] else EXIT_FAILURE


def main(argv=None):
    parser = build_parser()
    args, extras = parser.parse_known_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
    )
    if args.command == "run" and extras:
        parser.error(f"unrecognized arguments: {' '.join(extras)}")
    try:
        if args.command == "barrier":
            return verify_barrier_command(args, extras)
        if args.command == "run":
            config = ExperimentConfig.open(args.file)
            if args.output:
                header, blocks = config.raw()
                header["OUTPUT_DIR"] = args.output
                config = ExperimentConfig._from_raw_data((header, blocks), args.file)
        else:
            config = config_from_args(args, extras)
        outcome = run(config)
    except ConfigError as exc:
        print(f"ptw: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PtwError as exc:
        print(f"ptw: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    for line in outcome.lines:
        print(line)
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
