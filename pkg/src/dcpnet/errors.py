"""Exception types shared across the package."""


class DcpError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(DcpError):
    """Tensor shapes incompatible with the requested operation."""


class ContractError(DcpError):
    """An operation was called outside its contract (e.g. non-scalar loss)."""


class InputError(DcpError):
    """Invalid user-supplied value (class id out of range, bad mode, ...)."""


class ConfigError(DcpError):
    """Inconsistent or out-of-bounds configuration."""


class FormatError(DcpError):
    """Corrupt or truncated on-disk / on-wire bytes."""


class ProtocolError(DcpError):
    """Violation of the collaboration message protocol."""
