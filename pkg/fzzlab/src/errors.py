"""
Error hierarchy for fzzlab
Every failure carries the operation that raised it and a short hint.
"""


class FzzLabError(Exception):
    """Base exception for fzzlab"""
    def __init__(self, message, context=None):
        self.message = message
        self.context = context
        super().__init__(self.format_error())

    def format_error(self):
        """Format error message with the failing operation as prefix"""
        if self.context:
            return f"{self.context}: {self.message}"
        return self.message


# ==================== PARAMETER ERRORS ====================

class ParameterError(FzzLabError):
    """Raised when an input is outside the range an operation accepts"""
    pass


class DomainError(ParameterError):
    """Raised when a parameter violates a stated range"""
    def __init__(self, operation, value, reason):
        self.operation = operation
        self.value = value
        self.reason = reason
        super().__init__(
            f"domain error at {value}: {reason} - check the admissible window",
            operation,
        )


class PoleError(ParameterError):
    """Raised when a Gamma factor is evaluated at a pole"""
    def __init__(self, operation, argument, nearest, label=None):
        self.operation = operation
        self.argument = argument
        self.nearest = nearest
        where = f" at {label}" if label else ""
        super().__init__(
            f"Gamma pole{where} (argument {argument:.12g} ~ {nearest}) - "
            f"move alpha or gamma off the pole",
            operation,
        )


class UnsupportedOrderError(ParameterError):
    """Raised when a truncation order beyond the implemented one is requested"""
    def __init__(self, operation, k, max_k=1):
        self.k = k
        super().__init__(
            f"truncation order k={k} is not supported (max {max_k}); "
            f"higher coefficients depend on the area variable",
            operation,
        )


class ConfigError(ParameterError):
    """Raised when the command line or a preset is inconsistent"""
    def __init__(self, message):
        super().__init__(f"{message} - see --help", "config")


# ==================== NUMERICAL ERRORS ====================

class NumericalError(FzzLabError):
    """Raised when a numerical engine fails"""
    def __init__(self, message, context=None, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message, context)


class QuadratureError(NumericalError):
    """Raised when a quadrature does not reach its tolerance"""
    def __init__(self, message, diagnostics=None):
        super().__init__(
            f"{message} - integrand may be singular beyond the declared exponent",
            "quadrature",
            diagnostics,
        )


class FactorizationError(NumericalError):
    """Raised when a covariance matrix stays indefinite after jitter"""
    def __init__(self, size, jitter):
        super().__init__(
            f"covariance of size {size} not positive definite after jitter {jitter:.3g}"
            f" - try a coarser lattice",
            "build_covariance",
            {"size": size, "jitter": jitter},
        )


# ==================== SIMULATION ERRORS ====================

class SimulationError(FzzLabError):
    """Raised when a Monte Carlo routine cannot complete"""
    pass


class SimulationTimeoutError(SimulationError):
    """Raised when a path simulation exceeds its step budget"""
    def __init__(self, message, diagnostics=None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(f"{message} - raise max_steps or dt", "conesim")


class TooFewSamplesError(SimulationError):
    """Raised when a statistical test gets fewer samples than it needs"""
    def __init__(self, got, needed=100):
        self.got = got
        super().__init__(f"{got} samples given, at least {needed} required", "ks_test")


# ==================== I/O ERRORS ====================

class ReportIOError(FzzLabError):
    """Raised when a report or dump cannot be written"""
    def __init__(self, path, reason):
        self.path = path
        super().__init__(f"cannot write '{path}': {reason}", "report")
