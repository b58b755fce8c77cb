"""Exception types shared across the toolkit."""


class DeparaError(ValueError):
    """Invalid input, incomparable graphs, or a violated precondition."""


class FormatError(DeparaError):
    """Malformed, truncated, or corrupt DEPB/DEPN byte stream."""
