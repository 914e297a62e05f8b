"""Corpus frequency analysis: multi-pattern scanning and co-occurrence counts.

The inner scan loop runs through a compiled Cython kernel when available
and a pure-Python automaton otherwise; ``HAVE_EXTENSION`` says which.
"""

from .automaton import SENTENCE_DELIMITERS
from .buckets import (
    DEFAULT_EDGES,
    CorrelationResult,
    ProbeOutcome,
    bucket_index,
    bucket_joint,
    bucket_label,
    correlate_hits,
)
from .matcher import HAVE_EXTENSION, PhraseMatcher, compile_patterns
from .scan import PairFrequency, read_pair_list, scan_corpus, write_pair_frequencies

__all__ = [
    "SENTENCE_DELIMITERS",
    "DEFAULT_EDGES",
    "CorrelationResult",
    "ProbeOutcome",
    "bucket_index",
    "bucket_joint",
    "bucket_label",
    "correlate_hits",
    "HAVE_EXTENSION",
    "PhraseMatcher",
    "compile_patterns",
    "PairFrequency",
    "read_pair_list",
    "scan_corpus",
    "write_pair_frequencies",
]
