"""Exception types shared across the package."""


class EegraphError(Exception):
    """Base class for all package errors."""


class LayoutError(EegraphError):
    """Electrode geometry is unusable (duplicate coordinates, too few sites, ...)."""


class ConfigError(EegraphError):
    """Invalid configuration: unknown names, out-of-range values, bad schema."""


class IsolatedNodeError(EegraphError):
    """A channel has zero total connection weight, so degree normalization fails."""


class CorruptBundleError(EegraphError):
    """A dataset bundle or checkpoint file does not match its declared layout."""


class DivergenceError(EegraphError):
    """Training produced a non-finite loss or gradient."""
