"""Exception hierarchy shared by all rapidmix modules.

Every domain guard raises a subclass of :class:`RapidmixError`, which the CLI
maps to exit code 4 with a structured error report.
"""


class RapidmixError(Exception):
    """Base class for all rapidmix domain errors."""


class DimensionMismatch(RapidmixError):
    """Vector/matrix shapes are incompatible."""


class NotErgodic(RapidmixError):
    """Chain is reducible or periodic."""


class NotReversible(RapidmixError):
    """Detailed balance fails for the supplied stationary distribution."""


class NotLazy(RapidmixError):
    """Some holding probability is below 1/2."""


class NotConnected(RapidmixError):
    """Derived chain is reducible on this instance."""


class TooLarge(RapidmixError):
    """Instance exceeds an enumeration or dense-matrix guard."""


class NonPositiveWeight(RapidmixError):
    """A weight that must be strictly positive is not."""


class ZeroStationaryMass(RapidmixError):
    """Stationary distribution has a zero entry where positivity is required."""


class EmptySet(RapidmixError):
    """A state subset with positive stationary mass is required."""


class BadSetMass(RapidmixError):
    """Subset stationary mass is outside the admissible range."""


class EmptyProfile(RapidmixError):
    """Conductance profile lacks the per-set data needed here."""


class ZeroPsi(RapidmixError):
    """Blocking conductance function vanishes on part of the integration range."""


class NoContraction(RapidmixError):
    """Path-coupling contraction factor is not below 1."""


class InvalidState(RapidmixError):
    """State object violates the invariants of its chain."""


class RejectionBudgetExhausted(RapidmixError):
    """Rejection sampling failed to accept within the trial budget."""


class NotDense(RapidmixError):
    """Matrix fails the row-density requirement."""


class NoPerfectMatching(RapidmixError):
    """Graph admits no perfect matching."""


class EmptyHoleClass(RapidmixError):
    """Some hole pattern has no near-perfect matching, so its weight ratio is undefined."""


class BadSpinValue(RapidmixError):
    """Spin vector entries must be exactly -1 or +1."""


class StartOutsideBody(RapidmixError):
    """Walk start point is not a member of the body."""


class BadRounding(RapidmixError):
    """Supplied inner/outer radii are inconsistent with the membership oracle."""


class CutTooLarge(RapidmixError):
    """Halfspace cut holds more than half of the total mass."""


class UnsupportedFormat(RapidmixError):
    """Unknown report output format."""
