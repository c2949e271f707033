"""Exception types shared across the package."""


class MrfrfError(Exception):
    """Base class for all package errors."""


class LtiError(MrfrfError):
    """Invalid system description or incompatible system/signal pairing."""


class PoleOnGridError(LtiError):
    """A pole coincides with a requested evaluation frequency."""


class RateError(MrfrfError):
    """Sample-rate or record-length mismatch in multirate operations."""


class SimulationError(MrfrfError):
    """Closed-loop simulation failed (instability or ill-posed loop)."""


class LocalFitError(MrfrfError):
    """Local rational fit could not be computed at a bin."""


class DataFormatError(MrfrfError):
    """Malformed data file; carries the offending row when known."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ConfigError(MrfrfError):
    """Invalid scenario or configuration document."""
