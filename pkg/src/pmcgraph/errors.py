"""Exception types shared across the package."""


class PmcError(Exception):
    """Base class for all package errors."""


class ParseError(PmcError, ValueError):
    """Malformed expression text.

    ``offset`` is the byte offset into the UTF-8 encoded input where the
    problem was detected.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.reason = message


class UnknownIdentifierError(ParseError):
    pass


class VariableRangeError(ParseError):
    pass


class NonConstantExponentError(ParseError):
    pass


class DomainError(PmcError, ValueError):
    """Evaluation outside the domain of an elementary function or the chart."""


class JetError(PmcError, ValueError):
    """Incompatible jets or an invalid jet operation."""


class GeometryError(PmcError, ArithmeticError):
    """Degenerate geometric construction (singular metric, frame breakdown)."""


class FlatnessError(PmcError):
    """A check that requires a flat normal bundle was given a non-flat graph."""


class HypothesisViolation(PmcError):
    """A theorem hypothesis (ball containment, exponent window, dimension) fails."""
