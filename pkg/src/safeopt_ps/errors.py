"""Exception types shared across the package."""


class SafeOptError(Exception):
    """Base class for algorithm-level failures (CLI exit status 3)."""


class SafeSetEmpty(SafeOptError):
    """No point satisfies the constraint lower bounds; cannot proceed safely."""


class NoCandidates(SafeOptError):
    """Both the maximizer and the expander sets are empty."""


class NoOutsideStart(SafeOptError):
    """No probe outside the current safe set was found for the expander problem."""


class GpNumericalError(SafeOptError, ArithmeticError):
    """Cholesky factorisation failed even after jitter escalation."""

    def __init__(self, message, jitter):
        super().__init__(f"{message} (last jitter tried: {jitter:.3g})")
        self.jitter = jitter


class UnstableBlowUp(SafeOptError):
    """The closed-loop simulation left the saturation bound.

    ``result`` holds the finite prefix of the trajectory.
    """

    def __init__(self, result):
        super().__init__(
            f"trajectory diverged after {len(result.time)} samples"
        )
        self.result = result


class ConfigError(ValueError):
    """Malformed or incomplete run configuration (CLI exit status 2)."""

    def __init__(self, field, message, line=None):
        where = field if line is None else f"line {line}: {field}"
        super().__init__(f"{where}: {message}")
        self.field = field
        self.line = line
