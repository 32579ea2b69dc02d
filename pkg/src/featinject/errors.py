"""Exception hierarchy shared across the toolkit."""


class FeatureInjectError(Exception):
    """Base class for all toolkit errors."""


class DecodeError(FeatureInjectError):
    """Image payload could not be decoded."""


class IngestionError(FeatureInjectError):
    """Dataset directory is missing or not in the expected layout."""


class SplitError(FeatureInjectError):
    """Train/test split cannot be produced."""


class ExtractionError(FeatureInjectError):
    """A feature extractor rejected its input."""


class ContractError(FeatureInjectError):
    """An operation was called with arguments violating its contract."""


class ValidationError(FeatureInjectError):
    """Data failed validation against its declared contract."""


class FormatError(ValidationError):
    """A serialized payload is structurally invalid."""


class JoinError(FeatureInjectError):
    """Dataset, embeddings, and feature cache could not be joined."""


class ConfigError(FeatureInjectError):
    """Invalid run configuration."""


class GradCheckError(FeatureInjectError):
    """Gradient check could not be evaluated."""
