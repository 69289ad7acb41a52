"""Base classes"""

from ptw.errors import ConfigError


class ConfigField(object):
    """Base config field specification.

    Base class for key-value field specifications.

    Attributes:
        parser (func): Function with two inputs, the raw value and the
            containing section, that returns a parsed version of the value.
        formatter (func): Function converting a parsed value back to text.
        required (bool): Indication of whether or not this field is required.
    """

    def __init__(self, parser, formatter=str, required=False):
        self.parser = parser
        self.formatter = formatter
        self.required = required


class KeyValueSection(object):
    """Base key-value section.

    Base class for key-value based config sections. Raw text values are
    stored and parsed on access.
    """

    _field_spec = {}
    _name = "section"

    def _validate_fields(self, fields):
        for key in self.required_keys:
            if key not in fields:
                raise ConfigError("Missing required key", f"{self._name}.{key}")
        for key in fields:
            if key not in self._field_spec:
                raise ConfigError("Invalid key", f"{self._name}.{key}")
        for key in fields:
            try:
                self._field_spec[key].parser(fields[key], self)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc), f"{self._name}.{key}") from exc

    def _parse_fields(self, fields):
        fields = {key: str(value).strip() for key, value in fields.items()}
        self._validate_fields(fields)
        self._fields = fields

    def _format_fields(self):
        return [f"{key} = {value}" for key, value in self._fields.items()]

    def __getitem__(self, key):
        return self._field_spec[key].parser(self._fields[key], self)

    def __setitem__(self, key, value):
        if key in self._field_spec:
            self._fields[key] = str(value)
        else:
            raise ValueError(f"Invalid key: '{key}'")

    def __contains__(self, key):
        return key in self._fields

    def __iter__(self):
        return iter(self._fields)

    def __eq__(self, other):
        return type(self) is type(other) and self._fields == other._fields

    def get(self, key, default=None):
        return self[key] if key in self else default

    def items(self):
        return [(key, self[key]) for key in self]

    @property
    def required_keys(self):
        """Return list of keys required by this section."""
        return [
            key for key, field_spec in self._field_spec.items() if field_spec.required
        ]


class Constraint(object):
    """Base constraint type."""

    versions = ["*"]

    def apply(self, obj):
        """Apply constraint.

        Args:
            obj: Constrained object
        """
        version = getattr(obj, "version", None)
        if self.versions == ["*"] or version in self.versions:
            self.func(obj)


class ConstraintSpecification(object):
    """Base constraint group type."""

    def __init__(self, *constraints):
        self.constraints = constraints

    def apply(self, obj):
        """Apply all constraints in specification.

        Args:
            obj: Constrained object
        """
        for constraint in self.constraints:
            constraint().apply(obj)
