class DataError(ValueError):
    """Input data or configuration violates a documented invariant."""


class NumericalError(ArithmeticError):
    """A computation hit a degenerate or non-finite state."""


class DegenerateLikelihoodError(NumericalError):
    """The likelihood is flat or its curvature is nonpositive where it must not be."""
