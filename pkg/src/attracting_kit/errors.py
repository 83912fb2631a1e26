"""Exception types shared across the toolkit.

Every failure mode that callers are expected to branch on gets its own
class; the CLI maps them to stable exit codes (see cli.EXIT_CODES).
"""


class KitError(Exception):
    """Base class for all toolkit failures."""


class ConfigInvalid(KitError):
    """A run configuration is malformed or missing required fields."""


class DegenerateFamily(KitError):
    """The coefficient triple is outside the admissible family.

    Raised when resultant(P, Q) is numerically zero, when a certified
    lower bound for the sphere infimum collapses to <= 0, or when a
    collision variety is detected to be positive-dimensional.
    """


class NonConvergence(KitError):
    """An iterative numeric solve exhausted its budget without meeting
    its tolerance. Re-running with a tighter precision profile is the
    intended escalation path."""


class TrappingFails(KitError):
    """The trapping inequality has no positive slack for the given
    epsilon, so no forward-invariant collar can be certified."""


class BudgetExceeded(KitError):
    """A preimage tree or scan would exceed the configured node budget."""


class DepthExceeded(BudgetExceeded):
    """Backward-itinerary depth would exceed the configured budget."""


class PrerequisiteFailed(KitError):
    """A construction's documented precondition failed; the message
    names the check."""


class InsufficientData(KitError):
    """Not enough input data to produce a meaningful estimate."""
