"""Reading-comprehension utilities.

Covers TF-IDF question/context similarity, the standard exact-match and
token-F1 answer scores (official evaluator normalization: lowercase, strip
punctuation and articles, collapse whitespace), and insertion-only
knowledge integration: a triple is verbalized and spliced into the
question or context right after the first occurrence of its subject, or
appended as an ``@highlight`` line for cloze-style passages.
"""

from __future__ import annotations

import json
import math
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ConfigurationError, DatasetParseError
from .kb import Triple
from .templates import RelationTemplate, relative_clause, verbalize

QUESTION_TYPE_LABELS = (
    "synonymy",
    "commonsense",
    "no_semantic_variation",
    "multi_sentence",
    "typo",
    "others",
)

_PUNCT_TABLE = str.maketrans("", "", string.punctuation)
_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_TOKEN_RE = re.compile(r"[a-z0-9]+")


@dataclass
class QAExample:
    id: str
    question: str
    context: str
    gold_answers: list[str]
    dataset_style: str  # "squad" | "record"
    is_impossible: bool = False
    entities: list[str] = field(default_factory=list)
    type_labels: set[str] = field(default_factory=set)


# --- TF-IDF similarity -----------------------------------------------------


def tokenize(text: str) -> list[str]:
    """Lowercase unigrams split on non-alphanumeric characters."""
    return _TOKEN_RE.findall(text.lower())


class DocumentFrequencies:
    """Unigram document frequencies over an evaluation split."""

    def __init__(self, df: Mapping[str, int], n_documents: int):
        if n_documents < 1:
            raise ValueError("document-frequency table needs at least one document")
        self.df = dict(df)
        self.n_documents = n_documents

    @classmethod
    def from_texts(cls, texts: Iterable[str]) -> "DocumentFrequencies":
        df: Counter = Counter()
        n = 0
        for text in texts:
            n += 1
            df.update(set(tokenize(text)))
        return cls(df, n)

    @classmethod
    def from_examples(cls, examples: Iterable[QAExample]) -> "DocumentFrequencies":
        texts = []
        for example in examples:
            texts.append(example.question)
            texts.append(example.context)
        return cls.from_texts(texts)

    def idf(self, token: str) -> float:
        return math.log(self.n_documents / (1 + self.df.get(token, 0))) + 1.0


def tfidf_cosine(question: str, context: str, corpus_stats: DocumentFrequencies) -> float:
    """Cosine similarity of TF-IDF weighted unigram bag-of-words vectors."""
    if not question or not context:
        raise ValueError("texts must be non-empty")
    q_counts = Counter(tokenize(question))
    c_counts = Counter(tokenize(context))
    q_vec = {t: count * corpus_stats.idf(t) for t, count in q_counts.items()}
    c_vec = {t: count * corpus_stats.idf(t) for t, count in c_counts.items()}
    q_norm = math.sqrt(math.fsum(w * w for w in q_vec.values()))
    c_norm = math.sqrt(math.fsum(w * w for w in c_vec.values()))
    if q_norm == 0 or c_norm == 0:
        return 0.0
    dot = math.fsum(q_vec[t] * c_vec[t] for t in q_vec.keys() & c_vec.keys())
    return dot / (q_norm * c_norm)


# --- EM / F1 ----------------------------------------------------------------


def normalize_answer(text: str) -> str:
    """Lowercase, strip punctuation and articles, collapse whitespace."""
    text = text.lower().translate(_PUNCT_TABLE)
    text = _ARTICLE_RE.sub(" ", text)
    return " ".join(text.split())


def _gold_or_empty(gold: Sequence[str]) -> list[str]:
    # No-answer questions are scored against the empty string.
    return list(gold) if gold else [""]


def em(prediction: str, gold: Sequence[str]) -> int:
    """1 when the normalized prediction equals any normalized gold answer."""
    normalized = normalize_answer(prediction)
    return int(any(normalized == normalize_answer(g) for g in _gold_or_empty(gold)))


def _f1_single(prediction: str, gold: str) -> float:
    pred_tokens = normalize_answer(prediction).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    common = Counter(pred_tokens) & Counter(gold_tokens)
    matched = sum(common.values())
    if matched == 0:
        return 0.0
    precision = matched / len(pred_tokens)
    recall = matched / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def f1(prediction: str, gold: Sequence[str]) -> float:
    """Token-bag F1 against the best-matching gold answer."""
    return max(_f1_single(prediction, g) for g in _gold_or_empty(gold))


# --- Knowledge integration ---------------------------------------------------


@dataclass(frozen=True)
class AppliedInsertion:
    triple: Triple
    site: str  # "question" | "context" | "highlight"
    start: int  # offset of the inserted span in the augmented text
    inserted: str


@dataclass
class AugmentedPair:
    question: str
    context: str
    applied: list[AppliedInsertion] = field(default_factory=list)
    skipped: list[Triple] = field(default_factory=list)


def _find_first(text: str, phrase: str) -> tuple[int, int] | None:
    """First whole-word, case-insensitive occurrence as (start, end)."""
    pattern = re.compile(
        r"(?<![a-z0-9])" + re.escape(phrase.lower()) + r"(?![a-z0-9])"
    )
    match = pattern.search(text.lower())
    return (match.start(), match.end()) if match else None


def _insert_clause(text: str, subject: str, clause: str) -> tuple[str, AppliedInsertion] | None:
    span = _find_first(text, subject)
    if span is None:
        return None
    _, end = span
    inserted = f", {clause},"
    return text[:end] + inserted + text[end:], (end, inserted)


def integrate_knowledge(
    example: QAExample,
    triples: Sequence[Triple],
    templates: Mapping[str, RelationTemplate],
) -> AugmentedPair:
    """Enrich a question/context pair with verbalized triples.

    Cloze-style (ReCoRD) examples get an ``@highlight`` statement appended
    to the context. Extractive (SQuAD) examples get a comma-delimited
    relative clause inserted after the first occurrence of the subject, in
    the question when the object sits in the context and vice versa.
    Triples matching neither guard are reported in ``skipped``.
    """
    result = AugmentedPair(question=example.question, context=example.context)
    for triple in triples:
        if triple.relation not in templates:
            raise ConfigurationError(f"no clause template for relation {triple.relation!r}")
        if example.dataset_style == "record":
            line = "@highlight " + verbalize(
                triple.relation, triple.subject, triple.object, templates
            )
            start = len(result.context)
            inserted = "\n" + line
            result.context += inserted
            result.applied.append(
                AppliedInsertion(triple=triple, site="highlight", start=start, inserted=inserted)
            )
            continue

        clause = relative_clause(triple.relation, triple.object, templates)
        subject_in_question = _find_first(result.question, triple.subject) is not None
        subject_in_context = _find_first(result.context, triple.subject) is not None
        object_in_question = _find_first(result.question, triple.object) is not None
        object_in_context = _find_first(result.context, triple.object) is not None

        if subject_in_question and object_in_context:
            updated = _insert_clause(result.question, triple.subject, clause)
            if updated:
                result.question, (start, inserted) = updated
                result.applied.append(
                    AppliedInsertion(triple=triple, site="question", start=start, inserted=inserted)
                )
                continue
        elif subject_in_context and object_in_question:
            updated = _insert_clause(result.context, triple.subject, clause)
            if updated:
                result.context, (start, inserted) = updated
                result.applied.append(
                    AppliedInsertion(triple=triple, site="context", start=start, inserted=inserted)
                )
                continue
        result.skipped.append(triple)
    return result


# --- Dataset readers ----------------------------------------------------------


def read_squad(path: str | Path) -> list[QAExample]:
    """Flatten the official SQuAD 1.1/2.0 JSON layout."""
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if not isinstance(payload, dict) or "data" not in payload:
        raise DatasetParseError("missing top-level 'data' array", "$")
    examples = []
    for a_index, article in enumerate(payload["data"]):
        paragraphs = article.get("paragraphs")
        if paragraphs is None:
            raise DatasetParseError("missing 'paragraphs'", f"data[{a_index}]")
        for p_index, paragraph in enumerate(paragraphs):
            where = f"data[{a_index}].paragraphs[{p_index}]"
            context = paragraph.get("context")
            qas = paragraph.get("qas")
            if context is None or qas is None:
                raise DatasetParseError("missing 'context' or 'qas'", where)
            for q_index, qa in enumerate(qas):
                q_where = f"{where}.qas[{q_index}]"
                if "id" not in qa or "question" not in qa:
                    raise DatasetParseError("missing 'id' or 'question'", q_where)
                impossible = bool(qa.get("is_impossible", False))
                answers = [] if impossible else [a["text"] for a in qa.get("answers", [])]
                examples.append(
                    QAExample(
                        id=str(qa["id"]),
                        question=qa["question"],
                        context=context,
                        gold_answers=answers,
                        dataset_style="squad",
                        is_impossible=impossible,
                    )
                )
    return examples


def read_record(path: str | Path) -> list[QAExample]:
    """Flatten the official ReCoRD JSON layout, keeping entity candidates."""
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if not isinstance(payload, dict) or "data" not in payload:
        raise DatasetParseError("missing top-level 'data' array", "$")
    examples = []
    for d_index, item in enumerate(payload["data"]):
        where = f"data[{d_index}]"
        passage = item.get("passage")
        if passage is None or "text" not in passage:
            raise DatasetParseError("missing 'passage.text'", where)
        text = passage["text"]
        entities = []
        for e_index, span in enumerate(passage.get("entities", [])):
            try:
                # Official layout: end offsets are inclusive.
                entities.append(text[int(span["start"]) : int(span["end"]) + 1])
            except (KeyError, TypeError, ValueError):
                raise DatasetParseError(
                    "bad entity span", f"{where}.passage.entities[{e_index}]"
                ) from None
        for q_index, qa in enumerate(item.get("qas", [])):
            q_where = f"{where}.qas[{q_index}]"
            if "id" not in qa or "query" not in qa:
                raise DatasetParseError("missing 'id' or 'query'", q_where)
            answers = sorted({a["text"] for a in qa.get("answers", [])})
            examples.append(
                QAExample(
                    id=str(qa["id"]),
                    question=qa["query"],
                    context=text,
                    gold_answers=answers,
                    dataset_style="record",
                    entities=entities,
                )
            )
    return examples


def attach_type_labels(examples: Iterable[QAExample], labels: Mapping[str, Iterable[str]]) -> None:
    """Attach externally provided question-type labels by example id."""
    for example in examples:
        given = set(labels.get(example.id, ()))
        unknown = given - set(QUESTION_TYPE_LABELS)
        if unknown:
            raise ValueError(f"unknown type labels for {example.id}: {sorted(unknown)}")
        example.type_labels = given


# --- Similarity/performance table ---------------------------------------------

SIMILARITY_EDGES = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6)


@dataclass(frozen=True)
class SimilarityBucketRow:
    lower: float
    upper: float | None  # None marks the unbounded overflow bucket
    count: int
    mean_em: float
    mean_f1: float


def similarity_performance_table(
    records: Iterable[tuple[float, float, float]],
    edges: Sequence[float] = SIMILARITY_EDGES,
) -> list[SimilarityBucketRow]:
    """Bucket (similarity, em, f1) records and average scores per bucket."""
    if len(edges) < 2 or any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValueError("edges must be strictly increasing")
    buckets: list[list[tuple[float, float]]] = [[] for _ in range(len(edges))]
    for similarity, em_score, f1_score in records:
        index = len(edges) - 1
        for i in range(len(edges) - 1):
            if edges[i] <= similarity < edges[i + 1]:
                index = i
                break
        buckets[index].append((em_score, f1_score))
    rows = []
    for i, bucket in enumerate(buckets):
        upper = edges[i + 1] if i + 1 < len(edges) else None
        count = len(bucket)
        mean_em = math.fsum(e for e, _ in bucket) / count if count else 0.0
        mean_f1 = math.fsum(f for _, f in bucket) / count if count else 0.0
        rows.append(
            SimilarityBucketRow(
                lower=edges[i], upper=upper, count=count, mean_em=mean_em, mean_f1=mean_f1
            )
        )
    return rows
