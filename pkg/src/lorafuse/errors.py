"""Exception types shared across the engine.

Everything numeric-contract-violating is a ValueError subclass so callers
can catch broadly, while tests and the CLI can distinguish categories.
"""


class DimensionError(ValueError):
    """Operand shapes are incompatible with the requested operation."""


class PrecisionError(ValueError):
    """Operands carry mismatched precision tags."""


class AliasingError(ValueError):
    """Two segments of one fused dispatch would write the same target."""


class InputError(ValueError):
    """A token id or prompt is outside the model's input domain."""


class StateError(RuntimeError):
    """An operation was invoked with missing or stale engine state."""


class CalibrationError(ValueError):
    """Cost-model calibration cannot identify its parameters."""


class ConfigError(ValueError):
    """A config or workload file is malformed or carries unknown keys."""
