"""Exception types raised by the solvers."""


class SimError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteInput(SimError):
    pass


class SupportTouchesBoundary(SimError):
    """Field support reaches the truncated box boundary."""


class BoundaryContactWarning(UserWarning):
    pass


class NotAntisymmetric(SimError):
    pass


class MassMismatch(SimError):
    pass


class NotRadial(SimError):
    pass


class GridTooLarge(SimError):
    pass


class GridMismatch(SimError):
    pass


class CapacityExceeded(SimError):
    pass


class MapLeavesBox(SimError):
    pass


class NoConvergence(SimError):
    """Iterative solver hit its iteration cap.

    The last residuals are kept on the instance so callers can decide
    whether the partial result is usable.
    """

    def __init__(self, message, max_iters=None, residuals=None):
        super().__init__(message)
        self.max_iters = max_iters
        self.residuals = dict(residuals or {})


class NutrientNegative(SimError):
    pass


class NutrientAtCapacity(SimError):
    pass


class MOutOfRange(SimError):
    pass


class CheckpointOutOfRange(SimError):
    pass


class SparseTrajectory(SimError):
    pass


class NotHarmonic(SimError):
    pass


class EmptyPatch(SimError):
    pass


class BallNotContained(SimError):
    pass


class NoFinitePairs(SimError):
    pass


class NotStarShaped(SimError):
    pass


class SnapshotScheduleEmpty(SimError):
    pass


class SchemaError(SimError):
    """Configuration error tied to a key path (and line, when known)."""

    def __init__(self, path, reason, line=None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{path}: {reason}{where}")
        self.path = path
        self.reason = reason
        self.line = line
