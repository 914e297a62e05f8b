"""Language-model scorers: fill-mask ranking, perplexity, capabilities.

Three implementations share one interface:

* :class:`FixtureScorer` plays back recorded predictions from a table and
  falls back to a stable hash-derived ranking for unseen prompts, so test
  and demo runs are fully deterministic with no external model.
* :class:`NGramScorer` is a word-bigram model with add-one smoothing and a
  character-level fallback for unseen words. It decodes left to right, so
  like generative models it only accepts prompts whose mask comes last.
* :class:`RemoteScorer` speaks the HTTP wire protocol of the model server.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
import time
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence, runtime_checkable

import requests

from .errors import CapabilityError, TransportError

DEFAULT_MASK = "[MASK]"

_WORD_RE = re.compile(r"[a-z0-9']+")
_SENT_SPLIT_RE = re.compile(r"[.!?\n]")


@dataclass(frozen=True)
class ScorerCapabilities:
    mask_anywhere: bool
    mask_token: str
    vocab_size: int
    model_name: str

    def __post_init__(self):
        if self.vocab_size <= 0:
            raise ValueError("vocab_size must be positive")
        if not self.mask_token:
            raise ValueError("mask_token must be non-empty")


@dataclass(frozen=True)
class RankedPredictions:
    """Candidate tokens for one prompt, ordered by log-probability."""

    prompt: str
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self):
        tokens = [token for token, _ in self.entries]
        if len(tokens) != len(set(tokens)):
            raise ValueError("duplicate tokens in predictions")
        logprobs = [lp for _, lp in self.entries]
        if any(a < b for a, b in zip(logprobs, logprobs[1:])):
            raise ValueError("predictions must be sorted by logprob descending")

    @property
    def tokens(self) -> list[str]:
        return [token for token, _ in self.entries]

    def top(self, k: int) -> list[str]:
        return self.tokens[:k]


@runtime_checkable
class Scorer(Protocol):
    def capabilities(self) -> ScorerCapabilities: ...

    def score_fill(
        self, prompt: str, top_n: int, candidates: Iterable[str] | None = None
    ) -> RankedPredictions: ...

    def perplexity(self, sentence: str) -> float: ...


def _require_mask(prompt: str, mask_token: str) -> None:
    if prompt.count(mask_token) != 1:
        raise ValueError(
            f"prompt must contain the mask token {mask_token!r} exactly once: {prompt!r}"
        )


def _rank(scores: dict[str, float], top_n: int) -> tuple[tuple[str, float], ...]:
    """Sort tokens by score descending, ties broken by token, keep top_n."""
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return tuple(ordered[:top_n])


class FixtureScorer:
    """Playback scorer: recorded tables first, stable hashes otherwise.

    The table maps prompt -> [(token, logprob), ...] for fills and
    sentence -> value for perplexities. Prompts missing from the table get a
    ranking derived from sha256(prompt, token), which is reproducible across
    runs and platforms; pass ``strict=True`` to forbid the fallback.
    """

    def __init__(
        self,
        fill_table: dict[str, Sequence[tuple[str, float]]] | None = None,
        perplexity_table: dict[str, float] | None = None,
        vocab: Sequence[str] | None = None,
        strict: bool = False,
        mask_token: str = DEFAULT_MASK,
    ):
        self._fill_table = {k: tuple((t, float(p)) for t, p in v) for k, v in (fill_table or {}).items()}
        self._perplexity_table = dict(perplexity_table or {})
        if vocab is None:
            from .grammar import lexicon_words

            vocab = lexicon_words()
        self._vocab = list(dict.fromkeys(vocab))
        self._strict = strict
        self._mask_token = mask_token

    @classmethod
    def from_file(cls, path: str | Path, **kwargs) -> "FixtureScorer":
        with open(path, encoding="utf-8") as handle:
            table = json.load(handle)
        return cls(
            fill_table={k: [tuple(e) for e in v] for k, v in table.get("fill", {}).items()},
            perplexity_table=table.get("perplexity", {}),
            vocab=table.get("vocab"),
            **kwargs,
        )

    def capabilities(self) -> ScorerCapabilities:
        return ScorerCapabilities(
            mask_anywhere=True,
            mask_token=self._mask_token,
            vocab_size=len(self._vocab),
            model_name="builtin:fixture",
        )

    @staticmethod
    def _hash_unit(*parts: str) -> float:
        """Stable pseudo-random float in [0, 1) from the given strings."""
        digest = hashlib.sha256("\x00".join(parts).encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big") / 2**64

    def score_fill(
        self, prompt: str, top_n: int, candidates: Iterable[str] | None = None
    ) -> RankedPredictions:
        if top_n < 1:
            raise ValueError("top_n must be >= 1")
        _require_mask(prompt, self._mask_token)
        candidate_set = set(candidates) if candidates is not None else None

        recorded = self._fill_table.get(prompt)
        if recorded is not None:
            entries = [
                (token, lp)
                for token, lp in recorded
                if candidate_set is None or token in candidate_set
            ]
            return RankedPredictions(prompt=prompt, entries=tuple(entries[:top_n]))
        if self._strict:
            raise KeyError(f"no fixture entry for prompt {prompt!r}")

        pool = sorted(candidate_set) if candidate_set is not None else self._vocab
        scores = {token: -20.0 * self._hash_unit(prompt, token) for token in pool}
        return RankedPredictions(prompt=prompt, entries=_rank(scores, top_n))

    def perplexity(self, sentence: str) -> float:
        normalized = " ".join(sentence.split())
        if not normalized:
            raise ValueError("cannot score an empty sentence")
        if normalized in self._perplexity_table:
            return float(self._perplexity_table[normalized])
        if sentence in self._perplexity_table:
            return float(self._perplexity_table[sentence])
        if self._strict:
            raise KeyError(f"no fixture perplexity for {sentence!r}")
        return 1.0 + self._hash_unit("ppl", normalized) * (len(self._vocab) - 1)


class NGramScorer:
    """Word-bigram model with add-one smoothing over a supplied corpus.

    Sentences are split at ``. ! ?`` and newlines; words are lowercase
    ``[a-z0-9']`` runs scored against the previous word (begin-of-sentence
    for the first). Unseen words fall back to the unknown slot scaled by a
    smoothed character-unigram likelihood, so different unseen words still
    get distinct, deterministic probabilities.

    Like a left-to-right generative model it cannot condition on the right
    context, so ``mask_anywhere`` is false and fills require the mask to be
    the final content token.
    """

    _BOS = "<s>"
    _UNK = "<unk>"

    def __init__(
        self,
        corpus_text: str,
        vocab: Sequence[str] | None = None,
        unk_slot: bool = True,
        mask_token: str = DEFAULT_MASK,
    ):
        self._mask_token = mask_token
        self._bigrams: dict[str, Counter] = defaultdict(Counter)
        self._context_totals: Counter = Counter()
        char_counts: Counter = Counter()
        words_seen: set[str] = set(vocab or ())

        for sentence in _SENT_SPLIT_RE.split(corpus_text.lower()):
            words = _WORD_RE.findall(sentence)
            if not words:
                continue
            previous = self._BOS
            for word in words:
                words_seen.add(word)
                self._bigrams[previous][word] += 1
                self._context_totals[previous] += 1
                char_counts.update(word)
                previous = word

        if not words_seen:
            raise ValueError("n-gram scorer needs a non-empty corpus or vocab")
        self._vocab = sorted(words_seen)
        self._vocab_set = words_seen
        # Effective vocabulary for add-one smoothing, including the unknown slot.
        self._v = len(self._vocab) + (1 if unk_slot else 0)
        self._char_counts = char_counts
        self._char_total = sum(char_counts.values())
        self._char_alphabet = len(char_counts) + 1

    def capabilities(self) -> ScorerCapabilities:
        return ScorerCapabilities(
            mask_anywhere=False,
            mask_token=self._mask_token,
            vocab_size=len(self._vocab),
            model_name="builtin:ngram",
        )

    def _char_likelihood(self, word: str) -> float:
        log_p = 0.0
        for char in word:
            log_p += math.log(
                (self._char_counts.get(char, 0) + 1)
                / (self._char_total + self._char_alphabet)
            )
        return log_p

    def _logprob(self, word: str, previous: str) -> float:
        if previous not in self._context_totals and previous not in (self._BOS,):
            previous = self._UNK
        total = self._context_totals.get(previous, 0)
        counts = self._bigrams.get(previous, Counter())
        if word in self._vocab_set:
            return math.log((counts.get(word, 0) + 1) / (total + self._v))
        # Unknown word: unknown-slot mass spread by character plausibility.
        unk_mass = math.log(1 / (total + self._v))
        return unk_mass + self._char_likelihood(word)

    def _tokenize(self, sentence: str) -> list[str]:
        return _WORD_RE.findall(sentence.lower())

    def score_fill(
        self, prompt: str, top_n: int, candidates: Iterable[str] | None = None
    ) -> RankedPredictions:
        if top_n < 1:
            raise ValueError("top_n must be >= 1")
        _require_mask(prompt, self._mask_token)
        before, after = prompt.split(self._mask_token)
        if self._tokenize(after):
            raise CapabilityError(
                "left-to-right scorer requires the mask to be the final content token"
            )
        context = self._tokenize(before)
        previous = context[-1] if context else self._BOS

        if candidates is not None:
            scores = {}
            for candidate in set(candidates):
                tokens = self._tokenize(candidate)
                if not tokens:
                    continue
                if len(tokens) == 1:
                    scores[candidate] = self._logprob(tokens[0], previous)
                else:
                    # Mean per-token log-likelihood for multi-token candidates.
                    step, logps = previous, []
                    for token in tokens:
                        logps.append(self._logprob(token, step))
                        step = token
                    scores[candidate] = sum(logps) / len(logps)
        else:
            scores = {word: self._logprob(word, previous) for word in self._vocab}
        return RankedPredictions(prompt=prompt, entries=_rank(scores, top_n))

    def perplexity(self, sentence: str) -> float:
        total_logp, count = 0.0, 0
        for chunk in _SENT_SPLIT_RE.split(sentence.lower()):
            words = _WORD_RE.findall(chunk)
            previous = self._BOS
            for word in words:
                total_logp += self._logprob(word, previous)
                previous = word
                count += 1
        if count == 0:
            raise ValueError("sentence is empty after tokenization")
        return math.exp(-total_logp / count)


class RemoteScorer:
    """HTTP client for a model server speaking the scorer wire protocol.

    Requests are retried up to three times with exponential backoff (they
    are all idempotent reads); a bounded semaphore caps in-flight requests
    so the client can be shared across worker threads.
    """

    RETRIES = 3
    BACKOFF_SECONDS = 0.5

    def __init__(self, base_url: str, timeout: float = 60.0, max_in_flight: int = 4):
        self._base_url = base_url.rstrip("/")
        self._timeout = timeout
        self._session = requests.Session()
        self._gate = threading.BoundedSemaphore(max_in_flight)
        self._capabilities: ScorerCapabilities | None = None

    def _request(self, method: str, path: str, body: dict | None = None) -> dict:
        url = f"{self._base_url}{path}"
        last_error: Exception | None = None
        for attempt in range(self.RETRIES):
            if attempt:
                time.sleep(self.BACKOFF_SECONDS * 2 ** (attempt - 1))
            try:
                with self._gate:
                    response = self._session.request(
                        method, url, json=body, timeout=self._timeout
                    )
                response.raise_for_status()
                return response.json()
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
        raise TransportError(f"{method} {url} failed after {self.RETRIES} attempts: {last_error}")

    def capabilities(self) -> ScorerCapabilities:
        if self._capabilities is None:
            payload = self._request("GET", "/v1/capabilities")
            self._capabilities = ScorerCapabilities(
                mask_anywhere=bool(payload["mask_anywhere"]),
                mask_token=payload["mask_token"],
                vocab_size=int(payload["vocab_size"]),
                model_name=payload["model_name"],
            )
        return self._capabilities

    def score_fill(
        self, prompt: str, top_n: int, candidates: Iterable[str] | None = None
    ) -> RankedPredictions:
        if top_n < 1:
            raise ValueError("top_n must be >= 1")
        _require_mask(prompt, self.capabilities().mask_token)
        payload = self._request(
            "POST",
            "/v1/fill",
            {
                "sentence": prompt,
                "top_n": top_n,
                "candidates": sorted(candidates) if candidates is not None else None,
            },
        )
        entries = tuple((p["token"], float(p["logprob"])) for p in payload["predictions"])
        return RankedPredictions(prompt=prompt, entries=entries)

    def perplexity(self, sentence: str) -> float:
        if not sentence.strip():
            raise ValueError("cannot score an empty sentence")
        payload = self._request("POST", "/v1/perplexity", {"sentence": sentence})
        return float(payload["perplexity"])

    def finetune(self, triples_train: str, triples_val: str, epochs: int) -> str:
        """Kick off fine-tuning on triple folds; returns the checkpoint path."""
        payload = self._request(
            "POST",
            "/v1/finetune",
            {"triples_train": triples_train, "triples_val": triples_val, "epochs": epochs},
        )
        return payload["checkpoint"]


def resolve_scorer(spec: str, **kwargs) -> Scorer:
    """Build a scorer from a CLI spec: URL, ``builtin:fixture[:path]``, ``builtin:ngram:path``."""
    if spec.startswith(("http://", "https://")):
        return RemoteScorer(spec, **kwargs)
    if spec == "builtin:fixture":
        return FixtureScorer()
    if spec.startswith("builtin:fixture:"):
        return FixtureScorer.from_file(spec.split(":", 2)[2])
    if spec.startswith("builtin:ngram:"):
        corpus_path = spec.split(":", 2)[2]
        return NGramScorer(Path(corpus_path).read_text("utf-8"))
    if spec == "builtin:ngram":
        raise ValueError("builtin:ngram requires a training corpus: builtin:ngram:<path>")
    raise ValueError(f"unrecognized scorer spec {spec!r}")
