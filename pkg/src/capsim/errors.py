"""Exception types shared across the simulator and evaluation toolkit."""


class CapsimError(Exception):
    """Base class for all capsim errors."""


class SingularityError(CapsimError):
    """Field evaluation requested closer to a dipole than the guard radius."""


class InstabilityError(CapsimError):
    """Integration produced a state outside configured safety bounds."""


class DegenerateSegmentError(CapsimError):
    """Centerline segment has coincident start and end points."""


class DomainError(CapsimError):
    """Input outside the mathematical domain of an operation."""


class NonConvergenceError(CapsimError):
    """Iterative solver exhausted its iteration budget."""

    def __init__(self, msg, residual=None):
        super().__init__(msg)
        self.residual = residual


class RankDeficientError(CapsimError):
    """Problem is underdetermined or the Jacobian is degenerate."""


class DimensionError(CapsimError):
    """Input has the wrong number of components."""


class UnreachableError(CapsimError):
    """Inverse kinematics target could not be reached."""

    def __init__(self, msg, best_residual=None):
        super().__init__(msg)
        self.best_residual = best_residual


class DegenerateError(CapsimError):
    """Point set is too degenerate (collinear/coincident) for alignment."""


class LengthMismatchError(CapsimError):
    """Paired sequences have incompatible lengths."""


class ParseError(CapsimError):
    """File could not be parsed."""

    def __init__(self, msg, line=None, column=None):
        super().__init__(msg)
        self.line = line
        self.column = column


class ValidationError(CapsimError):
    """Configuration value violates an invariant."""

    def __init__(self, msg, field=None):
        super().__init__(msg)
        self.field = field


class MissingFileError(CapsimError):
    """Referenced file does not exist."""


class BindError(CapsimError):
    """Service could not bind its address."""
