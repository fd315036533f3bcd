"""Exception types raised across the package."""


class AdrTagError(Exception):
    """Base class for all package errors."""


class ValidationError(AdrTagError, ValueError):
    """Input data violates a structural invariant (bad spans, unknown class, ...)."""


class ConfigurationError(AdrTagError, ValueError):
    """Hyperparameters, resources or run configuration are inconsistent."""


class TrainingError(AdrTagError, RuntimeError):
    """Optimisation diverged (non-finite loss) or otherwise failed."""
