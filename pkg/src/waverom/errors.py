"""Exception types shared across the package."""


class WaveromError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(WaveromError, ValueError):
    """Invalid argument or field content."""


class DimensionError(ValidationError):
    """Shape/extent bookkeeping mismatch."""


class DomainError(WaveromError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class SingularMatrixError(WaveromError):
    """Direct factorization hit a numerically singular pivot."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class RegularizationError(WaveromError):
    """Reduced operator too ill-conditioned to solve reliably."""

    def __init__(self, message, smallest_singular_value=None):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class ResonanceError(WaveromError):
    """Analytic layered solve evaluated on (or too close to) a cavity resonance."""


class AliasingError(WaveromError):
    """Frequency sampling too coarse for the requested time window."""

    def __init__(self, message, required_spacing=None):
        super().__init__(message)
        self.required_spacing = required_spacing


class StageError(WaveromError):
    """CLI stage failure carrying the stage name."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
