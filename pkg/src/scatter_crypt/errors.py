"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class ScatterCryptError(Exception):
    exit_code = 1


class ValidationError(ScatterCryptError):
    exit_code = 2


class NumericalError(ScatterCryptError):
    exit_code = 3


class IoFailure(ScatterCryptError):
    exit_code = 4


class AuthError(ScatterCryptError):
    exit_code = 5


class InvalidGeometry(ValidationError):
    pass


class CoincidentPoints(ValidationError):
    pass


class GeometryMismatch(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class WindowTooLarge(ValidationError):
    pass


class InvalidSubsetSize(ValidationError):
    pass


class SubsetMismatch(ValidationError):
    pass


class UnknownUser(ValidationError):
    pass


class InsufficientUsers(ValidationError):
    pass


class SingularSystemError(NumericalError):
    pass


class NumericalFailure(NumericalError):
    pass


class EmptySpectrum(NumericalError):
    pass


class BadMagic(IoFailure):
    pass


class BadChecksum(IoFailure):
    pass


class UnsupportedVersion(IoFailure):
    pass


class AuthFailure(AuthError):
    pass


class DigestMismatch(AuthError):
    pass


class UnknownReceipt(AuthError):
    pass


class CarrierOverlap(UserWarning):
    """Carrier too close to the pass-band; twin/zero-order terms leak in."""
