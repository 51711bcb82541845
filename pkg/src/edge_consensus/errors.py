"""Exception hierarchy.

Failures are grouped by the stage that raises them so the command-line front
end can map each group onto its own exit code.
"""


class EdgeConsensusError(Exception):
    """Base class for every error raised by this package."""


class InvalidGraph(EdgeConsensusError, ValueError):
    """Malformed graph input (self-loop, duplicate edge, bad weight...)."""


class DimensionMismatch(EdgeConsensusError, ValueError):
    """Array shapes that do not agree with the model or graph."""


class SynthesisError(EdgeConsensusError):
    """A design hypothesis failed; no controller can be returned."""


class DisconnectedGraph(SynthesisError):
    def __init__(self, message="graph not connected"):
        super().__init__(message)


class InvalidDesign(SynthesisError, ValueError):
    """Design parameters outside their admissible range (e.g. mu <= 0)."""


class AssumptionViolation(SynthesisError):
    pass


class NotStabilizable(SynthesisError):
    pass


class NotDetectable(SynthesisError):
    pass


class ConvergenceFailure(SynthesisError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CouplingTooSmall(SynthesisError):
    def __init__(self, mu, bound):
        super().__init__(f"mu below 1/lambda_min(L) = {bound!r} (mu = {mu!r})")
        self.mu = mu
        self.bound = bound


class RepeatedTargetMode(SynthesisError):
    pass


class ComplexGainResidual(SynthesisError):
    pass


class ZeroNotSimple(SynthesisError):
    pass


class UncontrollableZeroMode(SynthesisError):
    pass


class SimulationError(EdgeConsensusError):
    pass


class StepTooLarge(SimulationError):
    pass


class HorizonTooShort(SimulationError):
    pass
