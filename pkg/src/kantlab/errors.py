"""Exception hierarchy shared by all kantlab modules."""


class KantLabError(Exception):
    """Base class for all kantlab errors."""


class DomainError(KantLabError):
    """Input outside the mathematical domain of an operation (non-finite
    values, empty support, wrong dimension)."""


class RepresentationError(KantLabError):
    """Mixed or incompatible measure representations (discrete vs grid,
    mismatched grids)."""


class BalanceError(KantLabError):
    """Marginal masses of a transport instance do not match."""


class ContractError(KantLabError):
    """A precondition on the calling contract was violated (missing duals,
    cost-kind mismatch)."""


class AlignmentError(KantLabError):
    """Grid or atom alignment requirement violated."""


class InfeasibleError(KantLabError):
    """A linear program required to be feasible is not."""


class OrderViolationError(KantLabError):
    """Convex dominance required by an operation fails.

    Carries the negative certificate produced by the convex-order checker.
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class NonconvergenceError(KantLabError):
    """An iterative solver hit its iteration budget before reaching the
    requested tolerance."""
