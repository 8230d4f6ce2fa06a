"""dvcurate: dataset-composition toolkit for imitation-learning corpora.

Parse and sample task specifications over dimensions of variation, ingest and
annotate demonstration corpora, measure and classify DV supports, retrieve
DV-aligned subsets, emit re-balanced sample streams, and synthesize
trajectories from re-anchored segments.
"""

__version__ = "0.1.0"

from .errors import DVCurateError

__all__ = ["DVCurateError", "__version__"]
