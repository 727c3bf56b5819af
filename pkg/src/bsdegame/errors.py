"""Exception and warning types raised by the solvers."""


class LatticeError(ValueError):
    """Invalid lattice parameters or a node field living on the wrong level."""


class PositivityViolation(ValueError):
    """A Gamma multiplier can become non-positive; refine the time grid."""


class ObstacleViolation(ValueError):
    """The obstacle exceeds the terminal condition at some terminal node."""


class BudgetExceeded(RuntimeError):
    """Brute-force enumeration would exceed its combinatorial budget."""


class GridError(ValueError):
    """Empty or malformed control grid."""


class ComparisonWarning(UserWarning):
    """Time step too coarse for the explicit scheme to be monotone."""
