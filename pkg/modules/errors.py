"""
Exception hierarchy for decaylab
Every error raised by the library derives from DecayLabError
"""


class DecayLabError(Exception):
    """Base class for all decaylab errors"""


class RangeError(DecayLabError, ValueError):
    """A state value lies outside the range a function is defined on"""


class ContractError(DecayLabError, ValueError):
    """A precondition of an operation was violated by its arguments"""


class DegeneracyError(DecayLabError):
    """Singular or badly conditioned lattice basis"""


class CommensurabilityError(DecayLabError):
    """Grid spacing does not fit a lattice vector or cell"""


class DomainError(DecayLabError):
    """Wrong domain kind for the operation, or a window larger than the domain"""


class CoverageError(DecayLabError):
    """Data does not cover the region an operation needs"""


class ConfigurationError(DecayLabError):
    """Invalid configuration, preset or scenario"""


class TimeStepError(DecayLabError):
    """Time step exceeds the stability (CFL) bound"""


class SchemeMonotonicityError(DecayLabError):
    """Discrete maximum principle violated beyond tolerance"""


class ShapeError(DecayLabError):
    """Trajectories or grids that should match do not"""


class ConstructionError(DecayLabError):
    """The Stefan counterexample could not be assembled from the computed data"""


class InvariantError(DecayLabError):
    """An invariant checked inside an operation failed"""
