"""Exception types"""


class PtwError(Exception):
    """Base error for all ptw failures."""


class InvalidParameter(PtwError, ValueError):
    """Model or numerical parameter outside its admissible range."""


class ConfigError(PtwError, ValueError):
    """Invalid experiment configuration.

    Attributes:
        field (str): Dotted path of the offending field, e.g. 'model.R'.
    """

    def __init__(self, message, field=None):
        self.field = field
        prefix = f"{field}: " if field else ""
        super().__init__(f"{prefix}{message}")


class EmptySamplePlan(PtwError, ValueError):
    pass


class NonFiniteEvaluation(PtwError, ArithmeticError):
    pass


class GridTooCoarse(PtwError, ValueError):
    pass


class NotCooperative(PtwError, ValueError):
    pass


class ZeroVector(PtwError, ValueError):
    pass


class SpeedBelowMinimal(PtwError, ValueError):
    pass


class SpeedNotSupercritical(PtwError, ValueError):
    pass


class WindowOutsideValidity(PtwError, ValueError):
    pass


class HypothesisUnmet(PtwError, ValueError):
    pass


class NoConvergence(PtwError, RuntimeError):
    """Iteration did not meet its tolerance.

    Attributes:
        iterations (int): Iterations performed.
        residual (float): Last residual.
        trace (list): Residual history, when one was recorded.
    """

    def __init__(self, message, iterations=None, residual=None, trace=None):
        self.iterations = iterations
        self.residual = residual
        self.trace = trace
        super().__init__(
            f"{message} (iterations={iterations}, residual={residual})"
        )


class SignFailure(PtwError, RuntimeError):
    pass


class BracketFailure(PtwError, RuntimeError):
    pass


class UnstableZeroState(PtwError, RuntimeError):
    pass


class DegenerateDelta(PtwError, RuntimeError):
    pass


class EigenDerivativeUnstable(PtwError, RuntimeError):
    pass


class CFLViolation(PtwError, RuntimeError):
    pass


class NonpositiveIterate(PtwError, RuntimeError):
    pass


class EnvelopeCollapse(PtwError, RuntimeError):
    pass


class LinearSolveFailure(PtwError, RuntimeError):
    pass


class NegativeOvershoot(PtwError, RuntimeError):
    pass


class FrontHitWall(PtwError, RuntimeError):
    pass


class FrontNotFormed(PtwError, RuntimeError):
    pass
