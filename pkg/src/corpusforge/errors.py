"""Exception types shared across the toolkit."""


class CorpusError(Exception):
    """Base class for all toolkit errors."""


class DecodeError(CorpusError):
    """Audio container or codec could not be decoded."""


class ParseError(CorpusError):
    """Structured input (manifest, transcript, config) violates its schema."""


class ManifestError(CorpusError):
    """Dataset manifest violates an invariant (duplicate ids, bad labels)."""


class SnrUndefinedError(CorpusError):
    """Signal has no usable speech/noise split (silence, constant signal)."""


class NotFoundError(CorpusError):
    """Referenced session or trial does not exist."""


class ConflictError(CorpusError):
    """Attempt to answer a trial that already has a response."""


class ConfigError(CorpusError):
    """Pipeline configuration is invalid or references missing paths."""
