"""Exception types raised across the package."""


class BpirError(Exception):
    """Base class for all package errors."""


class SingularMatrixError(BpirError, ValueError):
    pass


class FieldTooSmallError(BpirError, ValueError):
    """The field cannot host the required number of distinct evaluation points."""


class PunctureError(BpirError, ValueError):
    pass


class DecodeFailure(BpirError):
    """No codeword lies within the decoding radius of the received word.

    Under the Byzantine model this cannot happen, so it signals an adversary
    that exceeded its budget or a bug upstream.
    """

    def __init__(self, message, layer=None, erasures=0, radius=None):
        super().__init__(message)
        self.layer = layer
        self.erasures = erasures
        self.radius = radius


class RegimeError(BpirError, ValueError):
    pass


class InstanceTooLarge(BpirError, ValueError):
    pass


class NoMajorityError(BpirError):
    pass


class RngExhausted(BpirError, RuntimeError):
    pass


class ConfigError(BpirError, ValueError):
    """Malformed configuration file or flag value."""
