"""Cloze-style knowledge probing toolkit.

Turns knowledge-base triples into masked natural-language prompts, scores
them against pluggable language-model scorers, and computes the probing
metric suite (hits@K, Overlap@K, Miss@K, top-word repetition), corpus
co-occurrence statistics, and reading-comprehension knowledge integration.
"""

__version__ = "0.1.0"
