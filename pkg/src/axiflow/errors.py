"""Exception hierarchy shared by all axiflow modules."""


class AxiflowError(Exception):
    """Base class for every error raised by axiflow."""


class ZeroLengthElement(AxiflowError):
    def __init__(self, index, length):
        super().__init__(f"element {index} has degenerate length {length:.3e}")
        self.index = index
        self.length = length


class AssumptionViolated(AxiflowError):
    """A discrete well-posedness assumption failed for the current curve."""


class OpenSurface(AxiflowError):
    """The generated surface has boundary, so it encloses no volume."""


class SingularSystem(AxiflowError):
    pass


class NoConvergence(AxiflowError):
    def __init__(self, iterations, residual):
        super().__init__(
            f"Newton iteration stalled after {iterations} iterations "
            f"(residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class DomainViolation(AxiflowError):
    """The speed law was evaluated outside its domain of definition."""


class StabilityViolation(AxiflowError):
    """The discrete energy inequality failed; always an implementation bug."""


class PastExtinction(AxiflowError):
    pass


class InvalidConfig(AxiflowError):
    pass
