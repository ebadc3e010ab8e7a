"""Exception hierarchy for the extraction pipeline."""

from __future__ import annotations


class ExtractorError(Exception):
    """Base class for all extraction and synthesis failures."""


class MissingWeights(ExtractorError):
    """Backbone weights were requested but cannot be loaded."""


class UnreadableImage(ExtractorError):
    """An image file exists but cannot be decoded."""


class InvalidJob(ExtractorError):
    """A job description is inconsistent or points at unusable data."""
