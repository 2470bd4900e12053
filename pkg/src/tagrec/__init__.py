"""Hashtag recommendation for short texts.

The pipeline: clean raw tweets (ingest), train word embeddings
(embedding), train a small feedforward classifier whose hidden layer
is the tweet feature space (supervised), then rank unseen hashtags
with one of three zero-shot methods (zsl) and score everything
(evaluate). The cli module wires it all together.
"""

from .errors import (
    DataError,
    MalformedRecordError,
    NotPositiveDefiniteError,
    NumericalError,
    TagrecError,
    UsageError,
)

__all__ = [
    "DataError",
    "MalformedRecordError",
    "NotPositiveDefiniteError",
    "NumericalError",
    "TagrecError",
    "UsageError",
]

__version__ = "0.1.0"
