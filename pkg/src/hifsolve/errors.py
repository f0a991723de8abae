"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid problem or run configuration (e.g. grid size not 2^L * m)."""


class ConsistencyError(RuntimeError):
    """Internal invariant violated (e.g. a DOF that cannot be classified)."""


class NotSpdError(ArithmeticError):
    """A Cholesky pivot came out non-positive.

    Signals loss of positive definiteness, either of the input matrix or of
    an intermediate block when a compression tolerance is too loose.  Carries
    enough context (pivot index, and during a factorization the level, stage
    and group) to report the failure as data rather than a crash.
    """

    def __init__(self, pivot, level=None, stage=None, group=None, partial_stats=None):
        self.pivot = pivot
        self.level = level
        self.stage = stage
        self.group = group
        self.partial_stats = partial_stats
        where = f" at pivot {pivot}"
        if level is not None:
            where += f" (level {level}, stage {stage}, group {group})"
        super().__init__("matrix not positive definite" + where)


class EstimationError(RuntimeError):
    """An iterative estimator failed to converge; carries the partial value."""

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class BreakdownError(ArithmeticError):
    """Non-finite or invalid recurrence value inside an iterative solver."""
