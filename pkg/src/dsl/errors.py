"""Exception hierarchy. Every domain error carries its case name so the CLI can print it."""


class DSLError(ValueError):
    """Base class for all domain errors raised by the library."""

    @property
    def name(self):
        return type(self).__name__


# geom
class CurvesIntersect(DSLError):
    pass


class DegenerateTriangle(DSLError):
    pass


class NonGenericPosition(DSLError):
    pass


class InvalidCurve(DSLError):
    pass


# package
class TooFewTori(DSLError):
    pass


class FrameDegeneracy(DSLError):
    pass


class LevelTooLarge(DSLError):
    pass


class LongitudeCheckFailed(DSLError):
    pass


class InvalidPackage(DSLError):
    pass


# semmes
class ShellDisconnected(DSLError):
    pass


class EmptyPorts(DSLError):
    pass


class DepthTooLarge(DSLError):
    pass


class UnreachablePoint(DSLError):
    pass


class PortMismatch(DSLError):
    pass


# modulus
class NotConverged(DSLError):
    def __init__(self, iterations, estimate=None):
        super().__init__(f"solver did not converge after {iterations} iterations")
        self.iterations = iterations
        self.estimate = estimate


class EmptyFamily(DSLError):
    pass


class MappingFailed(DSLError):
    pass


# hurwitz
class DegreeTooSmall(DSLError):
    pass


class OddEuler(DSLError):
    pass


class DegreeTwoObstruction(DSLError):
    pass


class DegreeMismatch(DSLError):
    pass


class LambdaInfeasible(DSLError):
    pass


# classifier
class MissingOmega(DSLError):
    pass
