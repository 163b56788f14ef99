"""Exception hierarchy shared by all modules."""


class RadgraphError(Exception):
    """Base class for every error raised by the package."""


class DomainError(RadgraphError):
    """Domain does not fit inside an open hemisphere or is malformed."""


class InvalidResolution(RadgraphError):
    pass


class InvalidField(RadgraphError):
    """A field has the wrong length or non-finite values."""


class InvalidState(RadgraphError):
    """Geometry evaluation produced a non-finite quantity."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class OutsideCone(RadgraphError):
    """Curvature argument is not in the positive cone."""


class LinearizationRejected(RadgraphError):
    """Linearization requested at a state that is not strictly locally convex."""


class PreconditionViolation(RadgraphError):
    pass


class NewtonFailure(RadgraphError):
    """Base for Newton failures; carries the partial result."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NewtonStall(NewtonFailure):
    """Backtracking exhausted without an acceptable step."""


class NoConvergence(NewtonFailure):
    """Iteration limit reached."""


class NoSubsolution(RadgraphError):
    pass


class SubsolutionNotStrict(RadgraphError):
    pass


class ContinuationStalled(RadgraphError):
    def __init__(self, message, last_t=None, report=None):
        super().__init__(message)
        self.last_t = last_t
        self.report = report


class OrderingViolated(RadgraphError):
    def __init__(self, message, t=None, margin=None):
        super().__init__(message)
        self.t = t
        self.margin = margin


class OracleFailure(RadgraphError):
    pass


class ConfigError(RadgraphError):
    pass


class StructureCheckFailed(RadgraphError):
    """Curvature function fails a structure condition needed for existence."""
