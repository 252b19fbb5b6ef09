"""Exception types shared across the package.

Class names double as the reason strings written into traces, so renaming
one changes the trace format.
"""


class HybridItsError(Exception):
    """Base class for every error raised by this package."""

    @property
    def reason(self) -> str:
        return type(self).__name__


# core model
class KindPlaneMismatch(HybridItsError):
    pass


class DuplicateId(HybridItsError):
    pass


class NodeUnknown(HybridItsError):
    pass


class WorldSealed(HybridItsError):
    pass


# channels
class UnsupportedAddress(HybridItsError):
    pass


class NoBackChannel(HybridItsError):
    pass


class OutOfCoverage(HybridItsError):
    pass


class OutOfRange(HybridItsError):
    pass


# security platform
class WrongPurpose(HybridItsError):
    pass


class UnknownHandle(HybridItsError):
    pass


class AuthFailure(HybridItsError):
    pass


# credentials
class InvalidCredential(HybridItsError):
    pass


class RevokedCredential(HybridItsError):
    pass


class AlreadyRevoked(HybridItsError):
    pass


class InvalidEnrollment(HybridItsError):
    pass


class RevokedEnrollment(HybridItsError):
    pass


class PoolExhausted(HybridItsError):
    pass


# privacy
class PurposeMismatch(HybridItsError):
    pass


class UnknownSubject(HybridItsError):
    pass


class UnknownRecord(HybridItsError):
    pass


class SchemaMismatch(HybridItsError):
    pass


class EmptyTrace(HybridItsError):
    pass


# network plane
class InvalidProviderCertificate(HybridItsError):
    pass


class DuplicateServiceId(HybridItsError):
    pass


class UnknownService(HybridItsError):
    pass


class NoViableChannel(HybridItsError):
    pass


# simulation
class ScenarioInvalid(HybridItsError):
    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.location = location


class MalformedTrace(HybridItsError):
    pass
