"""
Исключения движка KAM.

Exclusion events are not exceptions: they are recorded in ledgers and
parameter masks. Everything here aborts the current operation.
"""


class KamError(Exception):
    """Base class for all engine errors."""


class InvalidParameterError(KamError, ValueError):
    """Argument outside its admissible range."""


class ConfigError(KamError):
    """Run configuration violates the schema."""


class FlavorMismatchError(KamError):
    """Block matrices of different flavors were combined."""


class TruncationError(KamError):
    """Requested caps exceed the hard degree limit."""


class FlowSmallnessError(KamError):
    """Generating jet too large for the flow series to converge."""


class FlowIntegrationError(KamError):
    """Angle integrator failed the step-halving check."""


class LieDivergenceError(KamError):
    """Lie series terms stopped decaying."""


class QuadratureError(KamError):
    """Quadrature degree too low for the integrand."""


class FitError(KamError):
    """Not enough data for a regression."""


class ScheduleGateError(KamError):
    """delta0 too small for this eps."""


class SmallnessError(KamError):
    """Solved generator violates the KAM step smallness condition."""


class AllExcludedError(KamError):
    """Every parameter sample has been excluded."""


class AcceptanceError(KamError):
    """A KAM step failed to contract."""
