"""Exception hierarchy shared by every sheafkit module."""

from __future__ import annotations


class SheafKitError(Exception):
    """Base class for all library errors."""


# poset
class UnknownElement(SheafKitError, KeyError):
    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return Exception.__str__(self)


class CycleDetected(SheafKitError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__("cycle in order relation: " + " < ".join(self.cycle))


class TopologyError(SheafKitError):
    pass


class TopologyTooLarge(TopologyError):
    pass


class EmptyInput(SheafKitError):
    pass


class NotOrderPreserving(SheafKitError):
    pass


# linalg
class ShapeMismatch(SheafKitError):
    pass


class FieldMismatch(SheafKitError):
    pass


class SingularMatrix(SheafKitError):
    pass


# expr
class ExprSyntaxError(SheafKitError):
    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} at position {position}")


class UnknownFunction(SheafKitError):
    pass


class UnknownVariable(SheafKitError):
    pass


class DivideByZero(SheafKitError, ZeroDivisionError):
    pass


class DomainError(SheafKitError):
    pass


# sheaf
class MissingStalk(SheafKitError):
    pass


class MissingMap(SheafKitError):
    pass


class PartialTable(MissingStalk):
    pass


class AmbiguousComposite(SheafKitError):
    pass


class ValueOutsideStalk(SheafKitError):
    pass


class ModeUnsupported(SheafKitError):
    pass


class ArityMismatch(SheafKitError):
    pass


class NotASection(SheafKitError):
    pass


class BaseMismatch(SheafKitError):
    pass


# transport
class FiberSectionSpaceEmpty(SheafKitError, UserWarning):
    """Issued as a warning: an empty stalk is legal, just suspicious."""


class InconsistentQuotient(SheafKitError):
    pass


class PushforwardUndefined(SheafKitError):
    pass


# systems
class UnrepresentablePredicate(SheafKitError):
    pass


class InvalidSystem(SheafKitError):
    """Malformed equation system (unknown variables, bad selector...)."""


# cohomology
class NotLinear(SheafKitError):
    pass


class NonDifferentiable(SheafKitError):
    pass


# models
class ExtentTooSmall(SheafKitError):
    pass


class BadStencil(SheafKitError):
    pass


class IndexOutOfRange(SheafKitError, IndexError):
    pass


class NonStochastic(SheafKitError):
    pass


class ZeroWavenumber(SheafKitError):
    pass


# io
class ParseError(SheafKitError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class SchemaError(SheafKitError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")
