"""Exception vocabulary shared across the package.

Everything raised on purpose derives from EvabsError so callers (and the
CLI exit-code mapping) can tell our failures from genuine bugs.
"""


class EvabsError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInput(EvabsError):
    """A primitive received a malformed argument (wrong length, empty MAC data)."""


class InvalidSeed(EvabsError):
    """Nonce generator state collapsed to the all-zero fixed point."""


class FrameError(EvabsError):
    """A wire frame could not be built or decoded."""


class HandshakeError(EvabsError):
    """A protocol step failed; .reason carries the wire-level failure code."""

    def __init__(self, reason, detail=""):
        self.reason = reason
        super().__init__(detail or getattr(reason, "label", str(reason)))


class ClockSkew(EvabsError):
    """A later protocol timestamp was smaller than an earlier one."""


class DuplicateVehicle(EvabsError):
    """Registration with an id or lookup key that is already enrolled."""


class NotFound(EvabsError):
    """No enrolled vehicle matches the given identifier."""


class InvalidReport(EvabsError):
    """A charge report failed validation (e.g. end time before start time)."""


class StorageError(EvabsError):
    """Registry persistence failed or a stored file is corrupt."""


class ScriptError(EvabsError):
    """An adversary script or scenario file is malformed or unsatisfiable."""


class ConfigError(EvabsError):
    """Bad run configuration (missing registry, unusable option values)."""
