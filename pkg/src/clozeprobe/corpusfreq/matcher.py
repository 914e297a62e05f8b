"""Phrase matcher: single-pass multi-pattern search with word boundaries.

``compile_patterns`` builds a matcher over a phrase set. The hot
sentence-presence path runs through the compiled kernel when the extension
is importable and falls back to the pure-Python automaton otherwise; both
produce identical events, and the backend can be forced for comparison.
"""

from __future__ import annotations

import re
from itertools import groupby
from typing import Iterable, Iterator

import numpy as np

from .automaton import SENTENCE_DELIMITERS, CharTrie, DenseDFA, build_dense_dfa

try:
    from . import _scan

    HAVE_EXTENSION = True
except ImportError:  # extension not built: pure Python only
    _scan = None
    HAVE_EXTENSION = False

_SENTENCE_RE = re.compile("[%s]" % re.escape(SENTENCE_DELIMITERS))
_DELIMITER_BYTES = tuple(d.encode() for d in SENTENCE_DELIMITERS)

# Reads are cut at sentence delimiters so kernel calls never split a match.
CHUNK_BYTES = 4 << 20


def _iter_text_chunks(path) -> Iterator[str]:
    """Lowercased text chunks of a file, each ending at a sentence delimiter."""
    carry = b""
    with open(path, "rb") as handle:
        while True:
            block = handle.read(CHUNK_BYTES)
            data = carry + block
            if not data:
                return
            if block:
                cut = max(data.rfind(d) for d in _DELIMITER_BYTES)
                if cut < 0:
                    carry = data  # sentence longer than the chunk: keep reading
                    continue
                chunk, carry = data[: cut + 1], data[cut + 1 :]
            else:
                chunk, carry = data, b""
            yield chunk.decode("utf-8", errors="replace").lower()
            if not block:
                return


class PhraseMatcher:
    """Compiled phrase set; see :func:`compile_patterns`."""

    def __init__(self, phrases: Iterable[str], backend: str | None = None):
        normalized = []
        seen = set()
        for phrase in phrases:
            phrase = " ".join(phrase.lower().split())
            if not phrase:
                raise ValueError("phrases must be non-empty")
            if phrase not in seen:
                seen.add(phrase)
                normalized.append(phrase)
        if not normalized:
            raise ValueError("at least one phrase is required")
        self.phrases: list[str] = normalized
        self.index: dict[str, int] = {p: i for i, p in enumerate(normalized)}

        if backend is None:
            backend = "cython" if HAVE_EXTENSION else "python"
        if backend == "cython" and not HAVE_EXTENSION:
            raise RuntimeError("compiled scan kernel is not available")
        if backend not in ("cython", "python"):
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend

        self._trie = CharTrie(normalized)
        self._dfa: DenseDFA | None = build_dense_dfa(normalized) if backend == "cython" else None

    def find_all(self, text: str) -> list[tuple[str, int]]:
        """All boundary-honoring occurrences as (phrase, start); overlaps allowed."""
        lowered = text.lower()
        return sorted(
            ((self.phrases[pid], start) for pid, start in self._trie.boundary_matches(lowered)),
            key=lambda item: (item[1], item[0]),
        )

    def match_set(self, text: str) -> set[str]:
        """Distinct phrases present in ``text`` (no sentence segmentation)."""
        lowered = text.lower()
        return {self.phrases[pid] for pid, _ in self._trie.boundary_matches(lowered)}

    def iter_sentence_sets(self, text: str) -> Iterator[set[int]]:
        """Phrase-id presence per sentence, skipping sentences with no match."""
        lowered = text.lower()
        if self.backend == "cython":
            state = _KernelState(self)
            yield from state.feed(lowered)
        else:
            for sentence in _SENTENCE_RE.split(lowered):
                present = {pid for pid, _ in self._trie.boundary_matches(sentence)}
                if present:
                    yield present

    def iter_file_sentence_sets(self, path) -> Iterator[set[int]]:
        """Per-sentence presence for a whole file, streaming in chunks."""
        if self.backend == "cython":
            state = _KernelState(self)
            for chunk in _iter_text_chunks(path):
                yield from state.feed(chunk)
        else:
            for chunk in _iter_text_chunks(path):
                for sentence in _SENTENCE_RE.split(chunk):
                    present = {pid for pid, _ in self._trie.boundary_matches(sentence)}
                    if present:
                        yield present

    def file_events(self, path) -> tuple[np.ndarray, np.ndarray]:
        """All (sentence_id, phrase_id) presence events of a file.

        Kernel-backend fast path: events are deduplicated per sentence and
        sentence ids are non-decreasing, so downstream counting can stay in
        numpy.
        """
        if self.backend != "cython":
            raise RuntimeError("file_events requires the compiled kernel")
        state = _KernelState(self)
        sid_blocks, pid_blocks = [], []
        for chunk in _iter_text_chunks(path):
            sids, pids = state.feed_raw(chunk)
            if len(sids):
                sid_blocks.append(sids)
                pid_blocks.append(pids)
        if not sid_blocks:
            return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int32)
        return np.concatenate(sid_blocks), np.concatenate(pid_blocks)


class _KernelState:
    """Running sentence id, automaton state and dedup table for one stream."""

    def __init__(self, matcher: PhraseMatcher):
        self._dfa = matcher._dfa
        self._last_seen = np.full(len(matcher.phrases), -1, dtype=np.int64)
        self._sid = 0
        self._state = 0

    def feed_raw(self, lowered_text: str) -> tuple[np.ndarray, np.ndarray]:
        dfa = self._dfa
        sids, pids, self._sid, self._state = _scan.scan_chunk(
            np.frombuffer(lowered_text.encode("utf-8"), dtype=np.uint8),
            dfa.delta,
            dfa.out_offsets,
            dfa.out_phrases,
            dfa.has_out,
            dfa.phrase_byte_lengths,
            self._last_seen,
            self._sid,
            self._state,
        )
        return sids, pids

    def feed(self, lowered_text: str) -> Iterator[set[int]]:
        sids, pids = self.feed_raw(lowered_text)
        for _, group in groupby(range(len(sids)), key=lambda i: sids[i]):
            yield {int(pids[i]) for i in group}


def compile_patterns(phrases: Iterable[str], backend: str | None = None) -> PhraseMatcher:
    """Build a single-pass multi-pattern matcher honoring word boundaries."""
    return PhraseMatcher(phrases, backend=backend)
