"""Exception hierarchy shared across the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class InvalidDimension(SimError):
    """Antenna/user counts violate the N >= K + 2 requirement."""


class NonPositiveQuantity(SimError):
    """A power, distance, variance or similar quantity is not > 0."""


class DuplicateBand(SimError):
    """Two base stations share a carrier band id."""


class DimensionMismatch(SimError):
    """Vector/matrix shapes are inconsistent."""


class NonBinarySelection(SimError):
    """Service-selection entries are not in {0, 1}."""


class SelectionConflict(SimError):
    """An RIS element is assigned to more than one base station."""

    def __init__(self, element: int):
        self.element = element
        super().__init__(f"element {element} assigned to more than one BS")


class OutOfRange(SimError):
    """A scalar parameter lies outside its admissible interval."""


class RankDeficient(SimError):
    """Gram matrix too ill-conditioned for zero forcing."""


class ZeroChannel(SimError):
    """Cannot build a precoder from an all-zero channel."""


class SingularStatistics(SimError):
    """A statistics matrix inversion failed the conditioning guard."""


class OrderUnsupported(SimError):
    """Requested quadrature order outside the supported range."""


class QuadratureDiverged(SimError):
    """Doubling the quadrature order changed the result too much."""


class InfeasibleQoS(SimError):
    """No design satisfying the QoS constraints was found."""


class MaxIterations(SimError):
    """An iterative solver hit its iteration cap without terminating."""


class ShapeMismatch(SimError):
    """Reports being compared do not describe the same user set."""


class NoCrossing(SimError):
    """Bisection target never reached inside the search interval."""
