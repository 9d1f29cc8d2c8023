"""Exception hierarchy.

Everything derives from :class:`SecureZoneError`.  The CLI maps
:class:`ValidationError` subclasses to exit code 2 and :class:`CryptoError`
subclasses to exit code 3.
"""


class SecureZoneError(Exception):
    pass


class ValidationError(SecureZoneError, ValueError):
    pass


class CryptoError(SecureZoneError):
    pass


# policy

class PolicySyntaxError(ValidationError):
    def __init__(self, position: int, expected: str, found: str = ""):
        self.position = position
        self.expected = expected
        self.found = found
        msg = f"at position {position}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class InvalidThreshold(ValidationError):
    pass


class InvalidAttribute(ValidationError):
    pass


# abe

class UnsupportedBackend(ValidationError):
    pass


class EmptyAttributeSet(ValidationError):
    pass


class ExpirationInPast(ValidationError):
    pass


class PolicyNotSatisfied(CryptoError):
    pass


class IntegrityFailure(CryptoError):
    pass


# token

class ClockBeforeEpoch(ValidationError):
    pass


# pki

class DuplicateZoneId(ValidationError):
    pass


class UnknownAttributeInPolicy(ValidationError):
    pass


class UnknownAttribute(ValidationError):
    pass


class UnknownFirearm(ValidationError):
    pass


class InvalidSignature(CryptoError):
    pass


# wire / beacon

class DecodeError(ValidationError):
    def __init__(self, offset: int, reason: str):
        self.offset = offset
        self.reason = reason
        super().__init__(f"decode error at offset {offset}: {reason}")


class PayloadTooLarge(ValidationError):
    pass


class NotProvisioned(ValidationError):
    pass


# sim

class ScenarioValidationError(ValidationError):
    pass


class InvalidAttackWindow(ScenarioValidationError):
    pass
