class InfoselError(Exception):
    """Base class for library errors."""


class InvalidArgument(InfoselError, ValueError):
    pass


class NumericalFailure(InfoselError, ArithmeticError):
    """A factorization or Monte Carlo summation could not be carried out."""


class EmptyLagError(InvalidArgument):
    """No location pair realizes the requested lag."""


class EmptyVariogramError(InfoselError, ValueError):
    """Every distance bin is empty."""
