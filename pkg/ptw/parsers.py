import re
from enum import Enum

from defusedxml.ElementTree import parse

from ptw.errors import ConfigError

Section = Enum("Section", ["HEADER", "BLOCK"])

BLOCKS = ("MODEL", "NUMERICS", "WAVE", "SIMULATION")

HS = r"(?:[ \t]|$)+"
"""Arbitrary Horizontal spacing or EOL"""
KEY_VAL = f"([A-Z_0-9]+){HS}={HS}(.+)"
"""Key-value pair"""


def err(line_number, message):
    raise ConfigError(f"Error on line {line_number + 2}: {message}")


def parse_kvn_config(config_file):
    """Read a KVN experiment config.

    Args:
        config_file (file): Open text file.

    Returns:
        data (tuple): (header, blocks) with blocks keyed by block name.
    """
    section = Section.HEADER
    header, blocks = {}, {}
    current = None

    match = re.match(KEY_VAL, config_file.readline().strip())
    if match:
        header[match.group(1)] = match.group(2)
    if "PTW_CONFIG_VERS" not in header:
        err(line_number=-1, message='Config must start with "PTW_CONFIG_VERS" keyword.')

    for idx, line in enumerate(config_file):
        line = line.strip()
        if line == "" or line.startswith("COMMENT"):
            continue

        if section == Section.HEADER or current is None:
            if line.endswith("_START") and line[:-6] in BLOCKS:
                current = line[:-6]
                if current in blocks:
                    err(idx, f"Duplicate block: {current}")
                blocks[current] = {}
                section = Section.BLOCK
                continue
            if section == Section.BLOCK:
                err(idx, f"Unexpected entry outside blocks: {line}")
            match = re.match(KEY_VAL, line)
            if match:
                if match.group(1) in header:
                    err(idx, f"Duplicate header: {match.group(1)}")
                header[match.group(1)] = match.group(2)
            else:
                err(idx, "Invalid header entry")

        else:
            if line == f"{current}_STOP":
                current = None
                continue
            match = re.match(KEY_VAL, line)
            if match:
                if match.group(1) in blocks[current]:
                    err(idx, f"Duplicate entry: {match.group(1)}")
                blocks[current][match.group(1)] = match.group(2)
            else:
                err(idx, f"Invalid {current.lower()} entry")

    if current is not None:
        raise ConfigError(f"Block {current} is not terminated by {current}_STOP")
    return header, blocks


def _tag(entry):
    return entry.tag.rpartition("}")[-1]


def parse_xml_config(config_file):
    """Read an XML experiment config.

    Args:
        config_file (file): Open text file.

    Returns:
        data (tuple): (header, blocks) with blocks keyed by block name.
    """
    try:
        root = parse(config_file).getroot()
    except Exception as exc:
        raise ConfigError(f"Malformed XML: {exc}") from exc
    if "version" not in root.attrib:
        raise ConfigError("Missing config version attribute")

    header = {
        _tag(entry): (entry.text or "").strip()
        for entry in root.find("header")
        if _tag(entry) != "COMMENT"
    }
    header["PTW_CONFIG_VERS"] = root.attrib["version"]

    blocks = {}
    body = root.find("body")
    for raw_block in body if body is not None else ():
        name = _tag(raw_block).upper()
        if name not in BLOCKS:
            raise ConfigError(f"Unknown block <{_tag(raw_block)}>")
        blocks[name] = {
            _tag(entry): (entry.text or "").strip()
            for entry in raw_block
            if _tag(entry) != "COMMENT"
        }
    return header, blocks
