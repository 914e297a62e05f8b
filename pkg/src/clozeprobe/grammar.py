"""Grammar diversification of instantiated cloze sentences.

Injecting a raw phrase into a template often yields an ungrammatical
sentence, so candidate variants are generated and the scorer later picks the
most natural one by perplexity:

1. subject starts with an adjective/noun (or a verb followed by a
   noun/adjective): prepend an indefinite and a definite article,
2. subject starts with an infinitive verb: use its gerund,
3. subject starts with a number: pluralize the following word,
4. a copula right after the subject: swap singular/plural agreement.

Tagging uses a bundled lexicon (first listed tag wins) with suffix
heuristics and a noun default, which is all the coarse rules above need.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

POS_TAGS = ("noun", "verb", "adjective", "number", "other")

_DIGIT_RE = re.compile(r"^\d+([.,]\d+)?$")
_ADJ_SUFFIXES = ("ous", "ful", "ive")
_VOWELS = "aeiou"
_COPULA_SWAP = {"is": "are", "are": "is", "was": "were", "were": "was"}


@lru_cache(maxsize=1)
def _lexicon() -> dict[str, str]:
    table: dict[str, str] = {}
    text = resources.files("clozeprobe.data").joinpath("pos_lexicon.txt").read_text("utf-8")
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, _, tag = line.partition("\t")
        table.setdefault(word, tag)  # first listed tag wins
    return table


def lexicon_words() -> list[str]:
    """Sorted words of the bundled lexicon (used as a default vocabulary)."""
    return sorted(_lexicon())


def pos_tag(word: str) -> str:
    """Coarse tag for one lowercase word: lexicon, then suffixes, then noun."""
    if not word:
        raise ValueError("cannot tag an empty word")
    word = word.lower()
    tag = _lexicon().get(word)
    if tag is not None:
        return tag
    if _DIGIT_RE.match(word):
        return "number"
    if word.endswith("ly"):
        return "other"
    if any(word.endswith(suffix) for suffix in _ADJ_SUFFIXES):
        return "adjective"
    return "noun"


def gerund(verb: str) -> str:
    """make -> making, run -> running, play -> playing."""
    if verb.endswith("e") and not verb.endswith("ee"):
        return verb[:-1] + "ing"
    if (
        len(verb) >= 3
        and verb[-1] not in _VOWELS + "wxy"
        and verb[-2] in _VOWELS
        and verb[-3] not in _VOWELS
    ):
        return verb + verb[-1] + "ing"
    return verb + "ing"


def pluralize(noun: str) -> str:
    """leg -> legs, box -> boxes, city -> cities."""
    if noun.endswith(("s", "x", "z", "ch", "sh")):
        return noun + "es"
    if len(noun) >= 2 and noun.endswith("y") and noun[-2] not in _VOWELS:
        return noun[:-1] + "ies"
    return noun + "s"


def indefinite_article(phrase: str) -> str:
    return "an" if phrase[:1].lower() in _VOWELS else "a"


def _find_subject_span(tokens: list[str], subject_tokens: list[str]) -> int | None:
    """Index of the first occurrence of the subject token run, or None."""
    n, m = len(tokens), len(subject_tokens)
    for start in range(n - m + 1):
        if tokens[start : start + m] == subject_tokens:
            return start
    return None


def expand_grammar(sentence: str, subject: str) -> list[str]:
    """All grammatical variants of ``sentence``, the unmodified one first.

    Each rule is applied independently to the base sentence; duplicates are
    removed keeping first occurrence. When no rule applies, only the input
    sentence is returned.
    """
    tokens = sentence.split()
    subject_tokens = subject.split()
    variants = [" ".join(tokens)]
    if not subject_tokens:
        return variants

    start = _find_subject_span(tokens, subject_tokens)
    if start is None:
        return variants
    end = start + len(subject_tokens)

    first_tag = pos_tag(subject_tokens[0])
    second_tag = pos_tag(subject_tokens[1]) if len(subject_tokens) > 1 else None

    def add(new_tokens: list[str]) -> None:
        text = " ".join(new_tokens)
        if text not in variants:
            variants.append(text)

    # Rule 1: article variants.
    if first_tag in ("adjective", "noun") or (
        first_tag == "verb" and second_tag in ("noun", "adjective")
    ):
        add(tokens[:start] + [indefinite_article(subject_tokens[0])] + tokens[start:])
        add(tokens[:start] + ["the"] + tokens[start:])

    # Rule 2: infinitive verb to gerund.
    if first_tag == "verb":
        add(tokens[:start] + [gerund(subject_tokens[0])] + tokens[start + 1 :])

    # Rule 3: number followed by a word to pluralize.
    if first_tag == "number" and len(subject_tokens) > 1:
        add(
            tokens[: start + 1]
            + [pluralize(subject_tokens[1])]
            + tokens[start + 2 :]
        )

    # Rule 4: subject-verb agreement on the copula after the subject.
    if end < len(tokens) and tokens[end] in _COPULA_SWAP:
        add(tokens[:end] + [_COPULA_SWAP[tokens[end]]] + tokens[end + 1 :])

    return variants
