"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI prints as
``error: <code>: <detail>``.
"""

from __future__ import annotations


class IpsError(Exception):
    code = "Error"

    def __init__(self, detail: str = ""):
        super().__init__(detail)
        self.detail = detail


class ValidationError(IpsError):
    """Bad user input. The CLI maps these to exit status 2."""

    code = "ValidationError"


class OutOfRange(ValidationError):
    code = "OutOfRange"

    def __init__(self, field: str, value=None, detail: str = ""):
        self.field = field
        self.value = value
        super().__init__(detail or f"{field}={value!r} outside its admissible range")


class OrderingViolation(ValidationError):
    code = "OrderingViolation"

    def __init__(self, detail: str = "mean link requires pi_plus >= pi_minus"):
        super().__init__(detail)


class InvalidParams(ValidationError):
    """Aggregate of one or more parameter violations."""

    def __init__(self, violations: list[ValidationError]):
        self.violations = list(violations)
        self.code = self.violations[0].code if self.violations else "InvalidParams"
        super().__init__("; ".join(v.detail for v in self.violations))


class SeriesTooShort(ValidationError):
    code = "SeriesTooShort"


class EmptySample(ValidationError):
    code = "EmptySample"


class ReducibleChain(IpsError):
    code = "ReducibleChain"


class ChainTooLarge(IpsError):
    code = "ChainTooLarge"


class NoConvergence(IpsError):
    code = "NoConvergence"


class IoFailure(IpsError):
    code = "IoFailure"
