"""Exception types raised by branchflow operations."""


class BranchflowError(Exception):
    """Base class for all library errors."""


class NegativeWeight(BranchflowError, ValueError):
    pass


class MissingBoundaryVertex(BranchflowError, LookupError):
    """A source or sink atom does not coincide with any graph vertex."""


class PreconditionUnmet(BranchflowError):
    """A reduction or corridor operation was applied outside its hypothesis."""


class DegenerateJunction(BranchflowError):
    pass


class NoConvergence(BranchflowError, RuntimeError):
    pass


class TooLarge(BranchflowError):
    """Instance exceeds the brute-force oracle's limits."""


class Infeasible(BranchflowError):
    pass


class UnsupportedDimension(BranchflowError, ValueError):
    pass


class ParseError(BranchflowError, ValueError):
    """Malformed problem or graph file."""
