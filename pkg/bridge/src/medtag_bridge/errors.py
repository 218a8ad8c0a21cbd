"""Bridge exception hierarchy."""


class BridgeError(Exception):
    """Base class for bridge errors."""


class ModelLoadError(BridgeError):
    """The requested model backend cannot be constructed or loaded."""


class DataError(BridgeError):
    """Input tokens file is malformed or inconsistent."""


class SequenceOverflowError(DataError):
    """A tweet's subtoken count exceeds the configured maximum.

    Raised instead of truncating: silently dropped tokens would corrupt the
    one-row-per-token contract.
    """
