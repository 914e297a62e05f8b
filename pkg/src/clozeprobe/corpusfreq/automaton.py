"""Multi-pattern string automaton used by the corpus scanner.

Builds an Aho-Corasick trie over the phrase set and, for the compiled
kernel, flattens it into a dense byte-level DFA (goto table with failure
transitions pre-resolved). A phrase only counts as matched when flanked by
non-letter characters or text edges; letters are ASCII ``a-z`` because all
text is lowercased before matching.

The dense table spends 1 KiB per trie state, which is fine for phrase sets
up to a few hundred thousand entries; beyond that, prefer the pure-Python
matcher or shard the phrase set.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

SENTENCE_DELIMITERS = ".!?\n"

_LETTERS = frozenset("abcdefghijklmnopqrstuvwxyz")


def is_letter(char: str) -> bool:
    return char in _LETTERS


class _Node:
    __slots__ = ("children", "fail", "out")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.fail: _Node | None = None
        self.out: list[int] = []


class CharTrie:
    """Character-level Aho-Corasick automaton (the pure-Python kernel)."""

    def __init__(self, phrases: list[str]):
        self.phrases = phrases
        self.lengths = [len(p) for p in phrases]
        self.root = _Node()
        for index, phrase in enumerate(phrases):
            node = self.root
            for char in phrase:
                node = node.children.setdefault(char, _Node())
            node.out.append(index)
        self._link()

    def _link(self) -> None:
        queue = deque()
        for child in self.root.children.values():
            child.fail = self.root
            queue.append(child)
        while queue:
            node = queue.popleft()
            for char, child in node.children.items():
                queue.append(child)
                fail = node.fail
                while fail is not None and char not in fail.children:
                    fail = fail.fail
                child.fail = fail.children[char] if fail and char in fail.children else self.root
                child.out = child.out + child.fail.out

    def iter_matches(self, text: str):
        """Yield (phrase_index, end_position) for every raw occurrence."""
        node = self.root
        for position, char in enumerate(text):
            while node is not self.root and char not in node.children:
                node = node.fail
            node = node.children.get(char, self.root)
            for phrase_index in node.out:
                yield phrase_index, position + 1

    def boundary_matches(self, text: str):
        """Yield (phrase_index, start) for occurrences flanked by non-letters."""
        n = len(text)
        for phrase_index, end in self.iter_matches(text):
            start = end - self.lengths[phrase_index]
            if start > 0 and is_letter(text[start - 1]):
                continue
            if end < n and is_letter(text[end]):
                continue
            yield phrase_index, start


@dataclass
class DenseDFA:
    """Byte-level DFA tables consumed by the compiled scan kernel."""

    delta: np.ndarray  # int32, shape (n_states * 256,)
    out_offsets: np.ndarray  # int32, shape (n_states + 1,)
    out_phrases: np.ndarray  # int32, concatenated output phrase ids
    has_out: np.ndarray  # uint8 flag per state
    phrase_byte_lengths: np.ndarray  # int32 per phrase
    n_states: int


def build_dense_dfa(phrases: list[str]) -> DenseDFA:
    """Flatten the phrase set into goto/output tables over UTF-8 bytes."""
    encoded = [p.encode("utf-8") for p in phrases]
    children: list[dict[int, int]] = [{}]
    out: list[list[int]] = [[]]
    for index, phrase in enumerate(encoded):
        state = 0
        for byte in phrase:
            nxt = children[state].get(byte)
            if nxt is None:
                nxt = len(children)
                children[state][byte] = nxt
                children.append({})
                out.append([])
            state = nxt
        out[state].append(index)

    n_states = len(children)
    delta = np.zeros(n_states * 256, dtype=np.int32)
    fail = np.zeros(n_states, dtype=np.int32)

    queue = deque()
    for byte, child in children[0].items():
        delta[byte] = child
        queue.append(child)
    while queue:
        state = queue.popleft()
        base = state * 256
        fail_base = int(fail[state]) * 256
        delta[base : base + 256] = delta[fail_base : fail_base + 256]
        for byte, child in children[state].items():
            queue.append(child)
            fail[child] = delta[fail_base + byte]
            delta[base + byte] = child
            out[child] = out[child] + out[int(fail[child])]

    offsets = np.zeros(n_states + 1, dtype=np.int32)
    for state in range(n_states):
        offsets[state + 1] = offsets[state] + len(out[state])
    flat_out = np.fromiter(
        (pid for state_out in out for pid in state_out), dtype=np.int32, count=int(offsets[-1])
    )
    has_out = (offsets[1:] > offsets[:-1]).astype(np.uint8)
    lengths = np.array([len(p) for p in encoded], dtype=np.int32)
    return DenseDFA(
        delta=delta,
        out_offsets=offsets,
        out_phrases=flat_out,
        has_out=has_out,
        phrase_byte_lengths=lengths,
        n_states=n_states,
    )
