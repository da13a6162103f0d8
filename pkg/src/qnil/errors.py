"""Exception hierarchy shared by all qnil modules."""

from __future__ import annotations


class QnilError(Exception):
    """Base class for every error raised by qnil."""


class NoPositiveCoordinate(QnilError):
    """Raised when a cone vector has no coordinate above tolerance."""


class SupportOverflow(QnilError):
    """Raised when a banded action would push support past the index cap."""

    def __init__(self, index: int, cap: int):
        super().__init__(f"support index {index} exceeds cap {cap}")
        self.index = index
        self.cap = cap


class DimensionMismatch(QnilError):
    """Raised when finite-matrix dimensions disagree with an input."""


class BadWordIndex(QnilError):
    """Raised when a word letter is outside ``1..N``."""


class BudgetExceeded(QnilError):
    """Raised when an enumeration would exceed its application budget.

    ``deepest`` is the last depth that was completed exactly and
    ``partial`` carries whatever was computed up to that depth.
    """

    def __init__(self, msg: str, deepest: int = 0, partial=None):
        super().__init__(msg)
        self.deepest = deepest
        self.partial = partial


class InvalidSeed(QnilError):
    """Raised when a diagnostic is asked to start from the zero vector."""


class ConstantTermPresent(QnilError):
    """Raised when a polynomial carries a constant (empty-word) monomial."""


class ZeroPatternViolation(QnilError):
    """Raised when ``t_ij`` is nonzero where ``a_ij`` vanishes."""

    def __init__(self, i: int, j: int):
        super().__init__(f"entry ({i}, {j}) is nonzero outside the reference zero pattern")
        self.i = i
        self.j = j


class HypothesisRefuted(QnilError):
    """Raised when a construction is handed a refuted quasinilpotence verdict."""


class NotPositive(QnilError):
    """Raised when a tuple member fails the entrywise positivity probe."""

    def __init__(self, member: int, witness=None):
        super().__init__(f"member {member} is not positive on the probe window (witness {witness})")
        self.member = member
        self.witness = witness


class ParseError(QnilError):
    """Raised for malformed scenario input; ``where`` is a line or JSON path."""

    def __init__(self, msg: str, where: str = ""):
        super().__init__(f"{where}: {msg}" if where else msg)
        self.where = where


class UnknownOperatorKind(ParseError):
    pass


class DanglingReference(ParseError):
    def __init__(self, name: str, where: str = ""):
        super().__init__(f"undeclared reference {name!r}", where)
        self.name = name
