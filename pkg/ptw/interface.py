import hashlib
import os
from pathlib import Path

import numpy as np
from lxml.etree import Element, ElementTree, SubElement

from ptw import components
from ptw.base import Constraint, ConstraintSpecification
from ptw.errors import ConfigError
from ptw.parsers import parse_kvn_config, parse_xml_config
from ptw.tools import _open, is_kvn

OUTPUT_ROOT_ENV = "PTW_OUTPUT_ROOT"
DEFAULT_OUTPUT_DIR = "ptw_output"

TASK_BLOCKS = {
    "eigen": ("MODEL",),
    "dispersion": ("MODEL", "NUMERICS"),
    "speed": ("MODEL",),
    "wave": ("MODEL", "WAVE"),
    "simulate": ("MODEL", "SIMULATION"),
    "verify-all": ("MODEL",),
}


def output_directory(path):
    """Output directory, prefixed by $PTW_OUTPUT_ROOT when relative."""
    path = Path(path)
    root = os.environ.get(OUTPUT_ROOT_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def _require_config(boolean, message, field=None):
    if not boolean:
        raise ConfigError(message, field)


class ConstrainConfigVersion(Constraint):
    """Only the current schema version is understood."""

    def func(self, config):
        from ptw import CURRENT_VERSION

        _require_config(
            config.version == CURRENT_VERSION,
            f"Unsupported config version '{config.version}'",
            "header.PTW_CONFIG_VERS",
        )


class ConstrainConfigBlocks(Constraint):
    """Blocks required by the task are present."""

    def func(self, config):
        for block in TASK_BLOCKS[config.task]:
            _require_config(
                block in config.blocks,
                f"Task '{config.task}' needs a {block} block",
                block.lower(),
            )
        if config.task == "dispersion":
            _require_config(
                "LAMBDAS" in config.blocks["NUMERICS"],
                "Task 'dispersion' needs LAMBDAS",
                "numerics.LAMBDAS",
            )


class ConstrainConfigDimensions(Constraint):
    """Direction vectors match the model dimension."""

    def func(self, config):
        dim = config.blocks["MODEL"].params().get("dim", 1)
        for block, key in (("NUMERICS", "DIRECTION"), ("WAVE", "DIRECTION")):
            if block in config.blocks and key in config.blocks[block]:
                _require_config(
                    len(config.blocks[block][key]) == dim,
                    f"Direction has {len(config.blocks[block][key])} entries, "
                    f"model dimension is {dim}",
                    f"{block.lower()}.{key}",
                )


class ExperimentConfig(object):
    """Versioned experiment configuration.

    Attributes:
        header (HeaderSection): Version, task, output directory and seed.
        blocks (dict): Config sections keyed by block name ('MODEL',
            'NUMERICS', 'WAVE', 'SIMULATION').
        source (Path): File the config was read from, if any.

    Examples:
        Configs load from KVN or XML files, optionally compressed:

        >>> config = ExperimentConfig.open("speed.cfg")
        >>> config.task
        'speed'

        They can be written in either format:

        >>> config.save_as("speed.xml", file_format="xml")

        or converted directly:

        >>> ExperimentConfig.convert("speed.cfg", "speed.xml", "xml")
    """

    _constraint_spec = ConstraintSpecification(
        ConstrainConfigVersion, ConstrainConfigBlocks, ConstrainConfigDimensions
    )

    def __init__(self, header, blocks, source=None):
        """Create an experiment config.

        Args:
            header (HeaderSection): Header section.
            blocks (dict): Sections keyed by block name.
            source (str or Path, optional): Originating file.
        """
        self.header = header
        self.version = self.header.version
        self.blocks = dict(blocks)
        self.source = Path(source) if source is not None else None
        self._constraint_spec.apply(self)

    def __repr__(self):
        return f"ExperimentConfig(v{self.version}, task={self.task})"

    def __eq__(self, other):
        return (
            self.header == other.header
            and self.blocks.keys() == other.blocks.keys()
            and all(self.blocks[key] == other.blocks[key] for key in self.blocks)
        )

    def __contains__(self, block):
        return block in self.blocks

    def __getitem__(self, block):
        return self.blocks[block]

    @classmethod
    def _from_raw_data(cls, data, source=None):
        raw_header, raw_blocks = data
        header = components.HeaderSection._from_raw_data(raw_header)
        blocks = {
            name: components.SECTIONS[name]._from_raw_data(fields)
            for name, fields in raw_blocks.items()
        }
        return cls(header, blocks, source=source)

    @classmethod
    def _from_kvn_config(cls, file_path):
        with _open(file_path, "rt") as config_file:
            return cls._from_raw_data(parse_kvn_config(config_file), file_path)

    @classmethod
    def _from_xml_config(cls, file_path):
        with _open(file_path, "rt") as config_file:
            return cls._from_raw_data(parse_xml_config(config_file), file_path)

    @classmethod
    def open(cls, file_path):
        """Open an experiment config in KVN or XML format.

        Args:
            file_path (str or Path): Path of file to read.

        Returns:
            ExperimentConfig: Validated config.

        Raises:
            ConfigError: Unreadable or invalid config; the message names the
                offending field.
        """
        try:
            if is_kvn(file_path):
                return cls._from_kvn_config(file_path)
            return cls._from_xml_config(file_path)
        except OSError as exc:
            raise ConfigError(f"Cannot read config: {exc}") from exc

    @classmethod
    def convert(cls, in_file_path, out_file_path, file_format):
        """Convert a config to a particular file format.

        Comments are not preserved.

        Args:
            in_file_path (str or Path): Path to original config.
            out_file_path (str or Path): Desired path for converted config.
            file_format (str): 'kvn' or 'xml'.
        """
        cls.open(in_file_path).save_as(out_file_path, file_format=file_format)

    def copy(self):
        """Create an independent copy of this instance."""
        return ExperimentConfig(
            self.header.copy(),
            {name: block.copy() for name, block in self.blocks.items()},
            source=self.source,
        )

    def raw(self):
        """Unparsed (header, blocks) text fields, as read by the parsers."""
        return (
            dict(self.header._fields),
            {name: dict(block._fields) for name, block in self.blocks.items()},
        )

    def save_as(self, file_path, file_format="kvn", compression=None):
        """Write config to file.

        Args:
            file_path (str or Path): Desired path for output config.
            file_format (str, optional): 'kvn' (default) or 'xml'.
            compression (str, optional): 'gzip', 'bz2' or 'lzma'.
        """
        with _open(file_path, "wb", compression) as output_file:
            if file_format == "kvn":
                output_file.write(bytes(self._to_kvn_config(), "utf-8"))
            elif file_format == "xml":
                self._to_xml_config().write(
                    output_file,
                    pretty_print=True,
                    encoding="utf-8",
                    xml_declaration=True,
                )
            else:
                raise ValueError(f"Unrecognized file type: '{file_format}'")

    def _to_kvn_config(self):
        lines = self.header._to_string()
        lines += "".join(block._to_string() for block in self.blocks.values())
        return lines

    def _to_xml_config(self):
        root = Element("ptw", id="PTW_CONFIG_VERS", version=self.version)
        self.header._to_xml(SubElement(root, "header"))
        body = SubElement(root, "body")
        for name, block in self.blocks.items():
            block._to_xml(SubElement(body, name.lower()))
        return ElementTree(root)

    @property
    def task(self):
        return self.header["TASK"]

    @property
    def seed(self):
        return self.header.get("SEED", 0)

    @property
    def digest(self):
        """SHA-256 of the canonical KVN form."""
        return hashlib.sha256(self._to_kvn_config().encode("utf-8")).hexdigest()

    @property
    def output_dir(self):
        return output_directory(self.header.get("OUTPUT_DIR", DEFAULT_OUTPUT_DIR))

    def model(self):
        """Build the configured model."""
        base_dir = self.source.parent if self.source is not None else None
        return self.blocks["MODEL"].build(base_dir)

    def numerics(self, key, default=None):
        block = self.blocks.get("NUMERICS")
        return block.get(key, default) if block is not None else default

    def wave(self, key, default=None):
        block = self.blocks.get("WAVE")
        return block.get(key, default) if block is not None else default

    def simulation(self, key, default=None):
        block = self.blocks.get("SIMULATION")
        return block.get(key, default) if block is not None else default

    def direction(self, dim):
        """Numerics direction, default e1."""
        value = self.numerics("DIRECTION")
        return np.asarray(value, dtype=float) if value is not None else np.eye(dim)[0]
