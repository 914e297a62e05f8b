"""Probing metrics: hits@K, micro/macro aggregation, Overlap@K, Miss@K.

Answer matching is exact string equality after lowercasing and whitespace
normalization; there is no stemming. All reductions are order-independent
(compensated float summation), so results can be computed over queries in
any order or in parallel.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .kb import ProbeQuery
from .scorers import RankedPredictions


def normalize_token(text: str) -> str:
    return " ".join(text.lower().split())


def hits_at_k(predictions: RankedPredictions, answers: Iterable[str], k: int) -> float:
    """Fraction of the true answers found among the top K predicted tokens."""
    if k < 1:
        raise ValueError("K must be >= 1")
    answers = set(answers)
    if not answers:
        raise ValueError("answers must be non-empty")
    top = {normalize_token(token) for token in predictions.top(k)}
    found = sum(1 for answer in answers if normalize_token(answer) in top)
    return found / len(answers)


def overlap_at_k(
    preds_a: RankedPredictions, preds_b: RankedPredictions, k: int
) -> float:
    """Fraction of shared tokens between two top-K prediction lists.

    The denominator is min(K, longer list length) so the ratio stays
    well-defined when a scorer returns fewer than K entries.
    """
    if k < 1:
        raise ValueError("K must be >= 1")
    if not preds_a.entries or not preds_b.entries:
        raise ValueError("both prediction lists must be non-empty")
    top_a = {normalize_token(t) for t in preds_a.top(k)}
    top_b = {normalize_token(t) for t in preds_b.top(k)}
    denominator = min(k, max(len(preds_a.entries), len(preds_b.entries)))
    return len(top_a & top_b) / denominator


def miss_at_k(
    predictions: RankedPredictions, opposite_answers: Iterable[str], k: int
) -> float:
    """hits@K graded against the opposite relation's answers: a definite-error rate."""
    return hits_at_k(predictions, opposite_answers, k)


def hit_within_answer_count(
    predictions: RankedPredictions, answers: Iterable[str]
) -> bool:
    """True when any answer shows up within the top |answers| predictions."""
    answers = set(answers)
    if not answers:
        raise ValueError("answers must be non-empty")
    top = {normalize_token(token) for token in predictions.top(len(answers))}
    return any(normalize_token(answer) in top for answer in answers)


def top_word_frequencies(
    per_query_topk: Iterable[Sequence[str]], m: int
) -> list[tuple[str, float]]:
    """Tokens ranked by the fraction of queries whose top-K list contains them."""
    if m < 1:
        raise ValueError("m must be >= 1")
    lists = [
        {normalize_token(token) for token in tokens} for tokens in per_query_topk
    ]
    if not lists:
        return []
    appearances: dict[str, int] = defaultdict(int)
    for tokens in lists:
        for token in tokens:
            appearances[token] += 1
    n = len(lists)
    ranked = sorted(appearances.items(), key=lambda item: (-item[1], item[0]))
    return [(token, count / n) for token, count in ranked[:m]]


@dataclass(frozen=True)
class QueryResult:
    """Scored predictions and per-K hit ratios for one probe query."""

    query: ProbeQuery
    predictions: RankedPredictions
    hits: Mapping[int, float]


def score_query(
    query: ProbeQuery, predictions: RankedPredictions, k_list: Sequence[int]
) -> QueryResult:
    return QueryResult(
        query=query,
        predictions=predictions,
        hits={k: hits_at_k(predictions, query.answers, k) for k in k_list},
    )


def _mean_sem(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    variance = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(variance) / math.sqrt(n)


@dataclass
class AggregateReport:
    """Per-relation, micro (query-weighted) and macro (relation-equal) means."""

    k_list: tuple[int, ...]
    per_relation: dict[str, dict[int, tuple[float, float]]]
    relation_counts: dict[str, int]
    micro: dict[int, tuple[float, float]] = field(default_factory=dict)
    macro: dict[int, tuple[float, float]] = field(default_factory=dict)


def aggregate(results: Sequence[QueryResult], k_list: Sequence[int]) -> AggregateReport:
    """Fold per-query hit ratios into relation, micro and macro summaries."""
    if not results:
        raise ValueError("cannot aggregate an empty result collection")
    by_relation: dict[str, list[QueryResult]] = defaultdict(list)
    for result in results:
        by_relation[result.query.relation].append(result)

    report = AggregateReport(
        k_list=tuple(k_list),
        per_relation={},
        relation_counts={rel: len(items) for rel, items in by_relation.items()},
    )
    for relation in sorted(by_relation):
        items = by_relation[relation]
        report.per_relation[relation] = {
            k: _mean_sem([r.hits[k] for r in items]) for k in k_list
        }
    for k in k_list:
        report.micro[k] = _mean_sem([r.hits[k] for r in results])
        relation_means = [report.per_relation[rel][k][0] for rel in sorted(by_relation)]
        report.macro[k] = _mean_sem(relation_means)
    return report
