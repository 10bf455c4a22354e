"""Exception hierarchy shared by every module."""


class MotionSphereError(Exception):
    """Base class for all library errors."""


class DimensionError(MotionSphereError, ValueError):
    """Array shapes do not match the operation's contract."""


class DomainError(MotionSphereError, ValueError):
    """Input lies outside the domain of a map (e.g. antipodal log)."""


class DegenerateInputError(MotionSphereError, ValueError):
    """Input is well-formed but degenerate (zero scale, zero norm)."""


class ConvergenceError(MotionSphereError, RuntimeError):
    """An iterative method stopped before meeting its tolerance."""

    def __init__(self, message, last_norm=None, iterations=None):
        super().__init__(message)
        self.last_norm = last_norm
        self.iterations = iterations


class ParseError(MotionSphereError, ValueError):
    """A file could not be parsed; carries file and line context."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class TrainingDivergedError(MotionSphereError, RuntimeError):
    """A loss became non-finite during training."""

    def __init__(self, message, epoch):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch
