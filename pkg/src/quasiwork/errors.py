"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class QuasiworkError(Exception):
    """Base class for all library errors."""


class ConfigError(QuasiworkError, ValueError):
    """Invalid user-supplied parameters or configuration."""


class NumericalError(QuasiworkError, ArithmeticError):
    """A computation could not deliver a trustworthy result."""


class CriticalityError(ConfigError):
    """Requested operation is undefined at |lambda| = 1."""


class DegenerateDirectionError(NumericalError):
    """Unit vector requested where the gap closes."""


class ResourceError(ConfigError):
    """Problem size beyond the dense-oracle cap."""


class ConvergenceError(NumericalError):
    """Quadrature or extrapolation did not reach its tolerance."""


class BranchError(NumericalError):
    """Complex logarithm or square root branch could not be tracked."""


class SingularOverlapError(NumericalError):
    """Vacuum overlap vanishes, so the Thouless representation fails."""
