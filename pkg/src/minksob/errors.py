"""Exception hierarchy.

``HypothesisViolation`` marks inputs that fall outside a theorem's
assumptions; the CLI maps it to exit code 2.
"""


class MinksobError(Exception):
    pass


class HypothesisViolation(MinksobError):
    pass


class DimensionMismatch(MinksobError, ValueError):
    pass


class NonSpacelikeSimplex(HypothesisViolation):
    pass


class NotSpacelike(HypothesisViolation):
    pass


class MeanConvexityViolated(HypothesisViolation):
    pass


class EmptyBoundary(HypothesisViolation):
    pass


class WrongCodimension(MinksobError, ValueError):
    pass


class DegenerateVertexStar(MinksobError):
    pass


class InsufficientNeighbors(MinksobError):
    pass


class DegenerateDensity(MinksobError):
    pass


class NonpositiveDensity(HypothesisViolation):
    pass


class SolverDiverged(MinksobError):
    pass


class IncompatibleSystem(MinksobError):
    pass


class NotInBr(MinksobError):
    pass


class BoundaryMinimizer(MinksobError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class WitnessOutsideBr(MinksobError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class ZeroSamples(MinksobError, ValueError):
    pass


class SpecParseError(MinksobError, ValueError):
    pass
