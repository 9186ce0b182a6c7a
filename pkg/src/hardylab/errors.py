"""Exception types raised by hardylab."""


class ContainmentError(ValueError):
    """The domain does not fit inside the grid window (or lacks the required margin)."""


class SingularityError(ValueError):
    """A kernel was evaluated at one of its singular points."""


class ResolutionError(ValueError):
    """A truncation radius is below what the grid can resolve."""


class CalibrationError(RuntimeError):
    """The normalizing-constant calibration drifted beyond its tolerance."""


class ConfigError(ValueError):
    """A run configuration could not be parsed.

    ``field`` names the offending entry when one can be identified.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ValidationError(ConfigError):
    """A parsed configuration violates a precondition of one of the operators."""
