"""Exception hierarchy shared by every civi module."""

from __future__ import annotations


class CiviError(Exception):
    """Base class for all toolkit errors."""


class SpecError(CiviError):
    """A problem with user-supplied specification text or structure."""

    def __init__(self, message: str, loc=None):
        self.loc = loc
        if loc is not None:
            message = f"{loc}: {message}"
        super().__init__(message)


class ParseError(SpecError):
    def __init__(self, message: str, loc=None, expected=()):
        self.expected = tuple(expected)
        if self.expected:
            message = f"{message} (expected one of: {', '.join(self.expected)})"
        super().__init__(message, loc)


class DuplicateName(SpecError):
    pass


class UnboundName(SpecError):
    def __init__(self, name: str, loc=None):
        self.name = name
        super().__init__(f"unbound name {name!r}", loc)


class IllSorted(SpecError):
    def __init__(self, message: str, loc=None, expected=None, found=None):
        self.expected = expected
        self.found = found
        if expected is not None or found is not None:
            message = f"{message}: expected {expected}, found {found}"
        super().__init__(message, loc)


class ArityMismatch(SpecError):
    pass


class UnknownFluent(SpecError):
    pass


class FreeVariable(SpecError):
    def __init__(self, name: str, loc=None):
        self.name = name
        super().__init__(f"free variable {name!r} in SFL formula", loc)


class EvalError(CiviError):
    pass


class MissingNextState(EvalError):
    pass


class OutOfBounds(EvalError):
    pass


class StateSpaceOverflow(CiviError):
    def __init__(self, count: int, ceiling: int, what: str = "state space"):
        self.count = count
        self.ceiling = ceiling
        super().__init__(f"{what} of size {count} exceeds ceiling {ceiling}")


class CompositionError(CiviError):
    pass


class SharedVariable(CompositionError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"components share state variable {name!r}")


class ParamMismatch(CompositionError):
    pass


class SignatureMismatch(CompositionError):
    def __init__(self, action: str, left, right):
        self.action = action
        super().__init__(f"action {action!r} has formal sorts {left} vs {right}")


class AlphabetViolation(CiviError):
    pass


class BridgeMismatch(CiviError):
    pass


class RuleSideConditionFailed(CiviError):
    pass


class ChainIllFormed(CiviError):
    pass


class RecheckFailed(CiviError):
    pass


class NonDeterministicFluent(CiviError):
    pass


class NoInitialState(CiviError):
    pass
