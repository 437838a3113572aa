"""Exception types raised across the toolkit."""


class SolNilError(Exception):
    """Base class for all toolkit errors."""


class DomainExceeded(SolNilError, ValueError):
    """A point lies outside the chart's guarded coordinate bound."""


class SingularMetric(SolNilError, ValueError):
    """The metric matrix is (numerically) not invertible."""


class NonOrthonormalFrame(SolNilError, ValueError):
    """A frame fails the orthonormality check against the metric."""


class GeodesicDegenerate(SolNilError, ValueError):
    """Curvature fell below the degeneracy cutoff; the normal is undefined."""


class InsufficientSamples(SolNilError, ValueError):
    """Too few samples for the finite-difference stencils."""


class WrongChart(SolNilError, ValueError):
    """The operation is only defined for a specific target chart."""


class StepTooLarge(SolNilError, ValueError):
    """Finite-difference step exceeds the allowed maximum."""


class ArcLengthViolation(SolNilError, ValueError):
    """Samples are not parametrized by arc length within tolerance."""


class ParseError(SolNilError, ValueError):
    """Malformed expression, chart config or map file."""
