import inspect
from pathlib import Path

import numpy as np
from lxml.etree import SubElement

from ptw.base import ConfigField, KeyValueSection
from ptw.components.builtin import BUILTIN_MODELS, builtin_model, with_tables
from ptw.errors import ConfigError, InvalidParameter
from ptw.tools import (
    format_float,
    format_vector,
    parse_bool,
    parse_float,
    parse_int_vector,
    parse_integer,
    parse_str,
    parse_vector,
)

TASKS = ("eigen", "dispersion", "speed", "wave", "simulate", "verify-all")
SIMULATION_KINDS = ("spreading", "hair_trigger", "extinction")


def parse_task(input, section):
    value = parse_str(input, section).lower()
    if value not in TASKS:
        raise ValueError(f"Unknown task '{input}'; expected one of {', '.join(TASKS)}")
    return value


def parse_positive(input, section):
    value = parse_float(input, section)
    if value <= 0:
        raise ValueError(f"Value must be positive: '{input}'")
    return value


def parse_positive_integer(input, section):
    value = parse_integer(input, section)
    if value <= 0:
        raise ValueError(f"Value must be a positive integer: '{input}'")
    return value


def parse_direction(input, section):
    value = parse_vector(input, section)
    if not np.any(value != 0):
        raise ValueError("Direction vector is zero")
    return value


def parse_lattice_direction(input, section):
    value = parse_int_vector(input, section)
    if not np.any(value != 0):
        raise ValueError("Direction vector is zero")
    return value


def parse_speed(input, section):
    """Parse a wave speed: a positive number, 'critical' or 'N*c'."""
    value = parse_str(input, section).lower()
    if value == "critical":
        return value
    if value.endswith("*c"):
        return ("factor", parse_positive(value[:-2], section))
    return parse_positive(value, section)


def format_speed(value):
    if isinstance(value, tuple):
        return f"{format_float(value[1])}*c"
    return value if isinstance(value, str) else format_float(value)


def parse_simulation_kind(input, section):
    value = parse_str(input, section).lower()
    if value not in SIMULATION_KINDS:
        raise ValueError(f"Unknown simulation kind '{input}'")
    return value


class ConfigSection(KeyValueSection):
    """Key-value block of an experiment config."""

    _start = None

    def __init__(self, fields):
        self._parse_fields(fields)

    def __repr__(self):
        return f"{type(self).__name__}({len(self._fields)} keys)"

    @classmethod
    def _from_raw_data(cls, fields):
        return cls(fields)

    def _to_string(self):
        lines = [f"{self._start}_START"] + self._format_fields()
        return "\n".join(lines + [f"{self._start}_STOP"]) + "\n"

    def _to_xml(self, parent):
        for key, value in self._fields.items():
            SubElement(parent, key).text = value

    def copy(self):
        """Create an independent copy of this instance."""
        return type(self)(self._fields.copy())


class HeaderSection(ConfigSection):
    """Config header with version, task, output directory and seed.

    Examples:
        >>> header = HeaderSection({"PTW_CONFIG_VERS": "1.0", "TASK": "speed"})
        >>> header["TASK"]
        'speed'
    """

    _name = "header"
    _field_spec = {
        "PTW_CONFIG_VERS": ConfigField(parse_str, required=True),
        "TASK": ConfigField(parse_task, required=True),
        "OUTPUT_DIR": ConfigField(parse_str),
        "SEED": ConfigField(parse_integer),
    }

    def _to_string(self):
        lines = [f"PTW_CONFIG_VERS = {self.version}"]
        lines += [entry for entry in self._format_fields() if "PTW_CONFIG_VERS" not in entry]
        return "\n".join(lines) + "\n"

    def _to_xml(self, parent):
        for key, value in self._fields.items():
            if key != "PTW_CONFIG_VERS":
                SubElement(parent, key).text = value

    @property
    def version(self):
        return self["PTW_CONFIG_VERS"]


def _parameter_field(default):
    if isinstance(default, bool):
        return ConfigField(parse_bool)
    if isinstance(default, int):
        return ConfigField(parse_integer)
    if isinstance(default, float):
        return ConfigField(parse_float)
    return ConfigField(parse_vector, format_vector)


def _square(values):
    size = int(round(np.sqrt(values.size)))
    if size * size != values.size:
        raise InvalidParameter(f"{values.size} entries do not form a square matrix")
    return values.reshape(size, size)


class ModelSection(ConfigSection):
    """Model block: builtin NAME, its parameters and optional tables.

    Parameter keys are the upper-case argument names of the builtin, e.g.
    `R` and `DIFFUSIVITY` for scalar_kpp. Matrix parameters are given
    row-major as comma separated values.
    """

    _name = "model"
    _start = "MODEL"
    _table_keys = ("DIFFUSION_TABLE", "ADVECTION_TABLE")

    def __init__(self, fields):
        name = str(fields.get("NAME", "")).strip()
        if not name:
            raise ConfigError("Missing required key", "model.NAME")
        if name not in BUILTIN_MODELS:
            raise ConfigError(f"Unknown builtin model '{name}'", "model.NAME")
        self._signature = inspect.signature(BUILTIN_MODELS[name]).parameters
        self._field_spec = {"NAME": ConfigField(parse_str, required=True)}
        for key in self._table_keys:
            self._field_spec[key] = ConfigField(parse_str)
        for parameter in self._signature.values():
            self._field_spec[parameter.name.upper()] = _parameter_field(
                parameter.default
            )
        self._parse_fields(fields)

    @property
    def name(self):
        return self["NAME"]

    def params(self):
        """Keyword arguments for the builtin."""
        params = {}
        for parameter in self._signature.values():
            key = parameter.name.upper()
            if key not in self:
                continue
            value = self[key]
            default = parameter.default
            if isinstance(value, np.ndarray):
                nested = isinstance(default, tuple) and default and isinstance(
                    default[0], tuple
                )
                if nested or parameter.name.endswith("matrix"):
                    value = _square(value)
                elif value.size == 1 and not isinstance(default, tuple):
                    value = float(value[0])
                else:
                    value = tuple(value.tolist())
            params[parameter.name] = value
        return params

    def build(self, base_dir=None):
        """Create the model, applying coefficient tables when given.

        Args:
            base_dir (Path, optional): Directory relative table paths are
                resolved against.

        Returns:
            ModelSpec: Validated model.

        Raises:
            ConfigError: Invalid parameters or unreadable tables.
        """
        try:
            model = builtin_model(self.name, **self.params())
        except InvalidParameter as exc:
            raise ConfigError(str(exc), "model") from exc
        tables = {}
        for key in self._table_keys:
            if key in self:
                path = Path(self[key])
                if base_dir is not None and not path.is_absolute():
                    path = Path(base_dir) / path
                try:
                    tables[key.lower()] = np.load(path)
                except (OSError, ValueError) as exc:
                    raise ConfigError(f"Cannot read table: {exc}", f"model.{key}") from exc
        if tables:
            try:
                model = with_tables(model, **tables)
            except InvalidParameter as exc:
                raise ConfigError(str(exc), "model") from exc
        return model

    def copy(self):
        return ModelSection(self._fields.copy())


class NumericsSection(ConfigSection):
    """Eigenvalue and speed numerics."""

    _name = "numerics"
    _start = "NUMERICS"
    _field_spec = {
        "DIRECTION": ConfigField(parse_direction, format_vector),
        "POINTS": ConfigField(parse_positive_integer),
        "TOL": ConfigField(parse_positive),
        "LAMBDA": ConfigField(parse_float),
        "LAMBDAS": ConfigField(parse_vector, format_vector),
        "DIRECTIONS": ConfigField(parse_positive_integer),
        "DIRICHLET_RADII": ConfigField(parse_vector, format_vector),
    }


class WaveSection(ConfigSection):
    """Pulsating wave construction."""

    _name = "wave"
    _start = "WAVE"
    _field_spec = {
        "DIRECTION": ConfigField(parse_lattice_direction, format_vector),
        "SPEED": ConfigField(parse_speed, format_speed),
        "A": ConfigField(parse_float),
        "R_MAX": ConfigField(parse_positive),
        "TOL": ConfigField(parse_positive),
        "MAX_ITER": ConfigField(parse_positive_integer),
        "H_R": ConfigField(parse_positive),
        "CROSS_POINTS": ConfigField(parse_positive_integer),
    }


class SimulationSection(ConfigSection):
    """Cauchy problem simulation."""

    _name = "simulation"
    _start = "SIMULATION"
    _field_spec = {
        "KIND": ConfigField(parse_simulation_kind, required=True),
        "HORIZON": ConfigField(parse_positive),
        "LEVEL": ConfigField(parse_positive),
        "LENGTH": ConfigField(parse_positive),
        "RADIUS": ConfigField(parse_positive),
        "RESOLUTION": ConfigField(parse_positive_integer),
        "DT": ConfigField(parse_positive),
        "SNAPSHOT_EVERY": ConfigField(parse_positive_integer),
    }


SECTIONS = {
    "MODEL": ModelSection,
    "NUMERICS": NumericsSection,
    "WAVE": WaveSection,
    "SIMULATION": SimulationSection,
}
