CURRENT_VERSION = "1.0"

from .interface import ExperimentConfig  # noqa
from .components.builtin import builtin_model  # noqa

__all__ = ["ExperimentConfig", "builtin_model"]
