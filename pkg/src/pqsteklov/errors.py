"""Exception types raised by the solver."""


class PQSteklovError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(PQSteklovError, ValueError):
    pass


class InvalidProblemError(PQSteklovError, ValueError):
    """The exponents or weights violate (h_pq) or (h_ab)."""


class UnsupportedProblemError(PQSteklovError, ValueError):
    pass


class SingularGradientError(PQSteklovError, ArithmeticError):
    """|grad u|^(r-2) grad u requested with r < 2, no smoothing and a flat element."""


class DegenerateDirectionError(PQSteklovError, ArithmeticError):
    """The weighted q-norm vanishes, so the quotient is +inf."""


class InfeasibleDirectionError(PQSteklovError, ArithmeticError):
    """lambda * B(u) - J_q(u) <= 0: no positive scaling reaches the Nehari set."""


class GenerationFailureError(PQSteklovError, RuntimeError):
    pass


class NoFeasibleStartError(PQSteklovError, RuntimeError):
    pass
