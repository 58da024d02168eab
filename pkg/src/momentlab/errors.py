"""Exception hierarchy shared by every momentlab module."""


class MomentLabError(Exception):
    """Base class for all errors raised by momentlab."""


class NonPositiveParameter(MomentLabError, ValueError):
    pass


class DuplicateAtom(MomentLabError, ValueError):
    pass


class NotNormalized(MomentLabError, ValueError):
    pass


class AsymmetricInput(MomentLabError, ValueError):
    pass


class NegativeWeight(MomentLabError, ValueError):
    pass


class TailTooHeavy(MomentLabError, ValueError):
    pass


class EpsilonOutOfRange(MomentLabError, ValueError):
    pass


class RegimeError(MomentLabError, ValueError):
    """The exponent r lies outside the range an operation supports."""


class InvalidDomain(MomentLabError, ValueError):
    pass


class ExprSyntaxError(MomentLabError, ValueError):
    """Malformed expression text.

    ``position`` is 1-based and points at the offending character.
    """

    def __init__(self, message, position, expected=None):
        self.position = position
        self.expected = expected
        detail = f"{message} at position {position}"
        if expected:
            detail += f" (expected {expected})"
        super().__init__(detail)


class DomainError(MomentLabError, ArithmeticError):
    """An expression was evaluated outside its mathematical domain."""

    def __init__(self, message, subexpression=None):
        self.subexpression = subexpression
        if subexpression is not None:
            message = f"{message} in {subexpression}"
        super().__init__(message)


class SchemaError(MomentLabError, ValueError):
    def __init__(self, message, path="."):
        self.path = path
        super().__init__(f"{path}: {message}")


class UnboundedProbe(MomentLabError, ValueError):
    pass


class ToleranceNotMet(MomentLabError, RuntimeError):
    def __init__(self, message, achieved=None):
        self.achieved = achieved
        if achieved is not None:
            message = f"{message} (achieved error {achieved:.3g})"
        super().__init__(message)


class RejectionInefficiency(MomentLabError, RuntimeError):
    pass


class ChannelMismatch(MomentLabError, RuntimeError):
    pass
