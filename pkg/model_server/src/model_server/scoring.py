"""Model backends: fill-mask ranking and perplexity for real checkpoints.

Masked models score the blank directly from the mask-position logits and
report pseudo-perplexity (each token masked in turn). Causal models decode
left to right, so they advertise ``mask_anywhere = false``, accept prompts
whose mask is the final content token, and score the blank from the
next-token distribution.

Both backends run in inference mode on a fixed device; results for a fixed
checkpoint are deterministic.
"""

from __future__ import annotations

import string

import torch
from transformers import AutoModelForCausalLM, AutoModelForMaskedLM, AutoTokenizer

PROTOCOL_MASK = "[MASK]"
_TRAILING_JUNK = set(string.whitespace + string.punctuation)


class MaskedModel:
    """Fill-mask scoring through a masked language model."""

    def __init__(self, model_id: str, device: str = "cpu", max_length: int = 128,
                 batch_size: int = 32):
        self.model_id = model_id
        self.device = torch.device(device)
        self.max_length = max_length
        self.batch_size = batch_size
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        if self.tokenizer.mask_token_id is None:
            raise ValueError(f"{model_id} has no mask token; serve it as a causal model")
        self.model = AutoModelForMaskedLM.from_pretrained(model_id).to(self.device)
        self.model.eval()

    def capabilities(self) -> dict:
        return {
            "mask_anywhere": True,
            "mask_token": self.tokenizer.mask_token,
            "vocab_size": int(self.tokenizer.vocab_size),
            "model_name": self.model_id,
        }

    def _encode(self, sentence: str) -> dict:
        return self.tokenizer(
            sentence, return_tensors="pt", truncation=True, max_length=self.max_length
        ).to(self.device)

    def _mask_position(self, input_ids: torch.Tensor) -> int:
        positions = (input_ids[0] == self.tokenizer.mask_token_id).nonzero().flatten()
        if len(positions) != 1:
            raise ValueError("sentence must contain the mask token exactly once")
        return int(positions[0])

    @torch.no_grad()
    def fill(self, sentence: str, top_n: int, candidates: list[str] | None = None) -> list:
        if top_n < 1:
            raise ValueError("top_n must be >= 1")
        encoded = self._encode(sentence)
        position = self._mask_position(encoded["input_ids"])
        log_probs = torch.log_softmax(self.model(**encoded).logits[0, position], dim=-1)

        if candidates is None:
            special = set(self.tokenizer.all_special_ids)
            scores, ids = torch.topk(log_probs, min(top_n + len(special), len(log_probs)))
            entries = [
                (self.tokenizer.convert_ids_to_tokens(int(i)), float(s))
                for s, i in zip(scores, ids)
                if int(i) not in special
            ]
            return entries[:top_n]

        by_length: dict[int, list[tuple[str, list[int]]]] = {}
        for candidate in dict.fromkeys(candidates):
            ids = self.tokenizer(candidate, add_special_tokens=False)["input_ids"]
            if ids:
                by_length.setdefault(len(ids), []).append((candidate, ids))

        scored: list[tuple[str, float]] = []
        for length, group in sorted(by_length.items()):
            if length == 1:
                for candidate, ids in group:
                    scored.append((candidate, float(log_probs[ids[0]])))
                continue
            # Multi-token candidate: widen the blank to `length` masks and
            # average the per-position log-likelihoods (one forward per width).
            ids_row = encoded["input_ids"][0].tolist()
            widened = ids_row[:position] + [self.tokenizer.mask_token_id] * length + ids_row[position + 1 :]
            widened = widened[: self.max_length]
            inputs = torch.tensor([widened], device=self.device)
            logits = self.model(input_ids=inputs).logits[0]
            span = torch.log_softmax(logits[position : position + length], dim=-1)
            for candidate, ids in group:
                token_scores = [float(span[offset, token_id]) for offset, token_id in enumerate(ids)]
                scored.append((candidate, sum(token_scores) / len(token_scores)))

        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:top_n]

    @torch.no_grad()
    def perplexity(self, sentence: str) -> float:
        encoded = self.tokenizer(
            sentence,
            return_tensors="pt",
            truncation=True,
            max_length=self.max_length,
            return_special_tokens_mask=True,
        )
        input_ids = encoded["input_ids"][0]
        content = (encoded["special_tokens_mask"][0] == 0).nonzero().flatten().tolist()
        if not content:
            raise ValueError("sentence is empty after tokenization")

        total = 0.0
        for start in range(0, len(content), self.batch_size):
            positions = content[start : start + self.batch_size]
            batch = input_ids.repeat(len(positions), 1)
            for row, position in enumerate(positions):
                batch[row, position] = self.tokenizer.mask_token_id
            logits = self.model(input_ids=batch.to(self.device)).logits
            for row, position in enumerate(positions):
                log_probs = torch.log_softmax(logits[row, position], dim=-1)
                total += float(log_probs[input_ids[position]])
        return float(torch.exp(torch.tensor(-total / len(content))))


class CausalModel:
    """Next-token scoring through a left-to-right language model."""

    def __init__(self, model_id: str, device: str = "cpu", max_length: int = 128):
        self.model_id = model_id
        self.device = torch.device(device)
        self.max_length = max_length
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModelForCausalLM.from_pretrained(model_id).to(self.device)
        self.model.eval()

    def capabilities(self) -> dict:
        return {
            "mask_anywhere": False,
            "mask_token": PROTOCOL_MASK,
            "vocab_size": int(self.tokenizer.vocab_size),
            "model_name": self.model_id,
        }

    def _split_prompt(self, sentence: str) -> str:
        if sentence.count(PROTOCOL_MASK) != 1:
            raise ValueError("sentence must contain the mask token exactly once")
        before, after = sentence.split(PROTOCOL_MASK)
        if set(after) - _TRAILING_JUNK:
            raise ValueError("a left-to-right model needs the mask at the end of the sentence")
        return before.rstrip()

    def _context_ids(self, context: str) -> list[int]:
        ids = self.tokenizer(context, add_special_tokens=False)["input_ids"]
        if self.tokenizer.bos_token_id is not None:
            ids = [self.tokenizer.bos_token_id] + ids
        if not ids:
            raise ValueError("empty context before the mask")
        return ids[-self.max_length :]

    @torch.no_grad()
    def fill(self, sentence: str, top_n: int, candidates: list[str] | None = None) -> list:
        if top_n < 1:
            raise ValueError("top_n must be >= 1")
        context = self._split_prompt(sentence)
        context_ids = self._context_ids(context)
        inputs = torch.tensor([context_ids], device=self.device)
        log_probs = torch.log_softmax(self.model(input_ids=inputs).logits[0, -1], dim=-1)

        if candidates is None:
            special = set(self.tokenizer.all_special_ids)
            scores, ids = torch.topk(log_probs, min(top_n * 2 + len(special), len(log_probs)))
            entries: list[tuple[str, float]] = []
            seen: set[str] = set()
            for score, token_id in zip(scores, ids):
                if int(token_id) in special:
                    continue
                token = self.tokenizer.decode([int(token_id)]).strip()
                if not token or token in seen:
                    continue
                seen.add(token)
                entries.append((token, float(score)))
                if len(entries) == top_n:
                    break
            return entries

        scored = []
        prefix = " " if context else ""
        for candidate in dict.fromkeys(candidates):
            ids = self.tokenizer(prefix + candidate, add_special_tokens=False)["input_ids"]
            if not ids:
                continue
            if len(ids) == 1:
                scored.append((candidate, float(log_probs[ids[0]])))
                continue
            full = torch.tensor([context_ids + ids], device=self.device)
            logits = self.model(input_ids=full).logits[0]
            start = len(context_ids) - 1
            token_scores = [
                float(torch.log_softmax(logits[start + offset], dim=-1)[token_id])
                for offset, token_id in enumerate(ids)
            ]
            scored.append((candidate, sum(token_scores) / len(token_scores)))
        scored.sort(key=lambda item: (-item[1], item[0]))
        return scored[:top_n]

    @torch.no_grad()
    def perplexity(self, sentence: str) -> float:
        ids = self.tokenizer(sentence, add_special_tokens=False)["input_ids"]
        if not ids:
            raise ValueError("sentence is empty after tokenization")
        if self.tokenizer.bos_token_id is not None:
            ids = [self.tokenizer.bos_token_id] + ids
        elif len(ids) < 2:
            raise ValueError("need at least two tokens to score without a BOS token")
        ids = ids[: self.max_length]
        inputs = torch.tensor([ids], device=self.device)
        logits = self.model(input_ids=inputs).logits[0]
        log_probs = torch.log_softmax(logits[:-1], dim=-1)
        targets = torch.tensor(ids[1:], device=self.device)
        token_log_probs = log_probs[torch.arange(len(targets)), targets]
        return float(torch.exp(-token_log_probs.mean()))


def load_backend(model_id: str, family: str = "auto", device: str = "cpu",
                 max_length: int = 128):
    """Pick the backend for a checkpoint: masked when it has a mask token."""
    if family not in ("auto", "masked", "causal"):
        raise ValueError(f"unknown model family {family!r}")
    if family == "masked":
        return MaskedModel(model_id, device=device, max_length=max_length)
    if family == "causal":
        return CausalModel(model_id, device=device, max_length=max_length)
    tokenizer = AutoTokenizer.from_pretrained(model_id)
    if tokenizer.mask_token_id is not None:
        return MaskedModel(model_id, device=device, max_length=max_length)
    return CausalModel(model_id, device=device, max_length=max_length)
