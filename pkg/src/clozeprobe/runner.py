"""Batch probing: queries through prompt selection, scoring and metrics.

Relations a scorer cannot handle (a left-to-right model with no
suffix-position template, say) are skipped and reported rather than
aborting a long run. Scorer calls for independent queries can run on a
bounded thread pool; results are reassembled in query order so output is
deterministic for deterministic scorers.
"""

from __future__ import annotations

import concurrent.futures
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import CapabilityError
from .kb import OppositeProbe, ProbeQuery
from .metrics import (
    QueryResult,
    hit_within_answer_count,
    miss_at_k,
    overlap_at_k,
    score_query,
)
from .prompts import MaskedPrompt, candidate_sentences, select_masked_prompt
from .scorers import Scorer
from .templates import RelationTemplate

logger = logging.getLogger(__name__)


@dataclass
class ProbeRecord:
    """Everything worth persisting about one probed query."""

    query: ProbeQuery
    prompt: MaskedPrompt
    result: QueryResult

    def as_dict(self) -> dict:
        return {
            "subject": self.query.subject,
            "relation": self.query.relation,
            "answers": sorted(self.query.answers),
            "prompt": self.prompt.text,
            "template": self.prompt.chosen_template,
            "variant": self.prompt.chosen_variant,
            "prompt_perplexity": self.prompt.perplexity,
            "hits": {str(k): v for k, v in sorted(self.result.hits.items())},
            "topk": self.result.predictions.tokens,
            "hit_within_answer_count": hit_within_answer_count(
                self.result.predictions, self.query.answers
            ),
        }


@dataclass
class ProbeRun:
    records: list[ProbeRecord] = field(default_factory=list)
    skipped_relations: dict[str, str] = field(default_factory=dict)

    @property
    def results(self) -> list[QueryResult]:
        return [record.result for record in self.records]


def run_probe(
    queries: Sequence[ProbeQuery],
    templates: Mapping[str, RelationTemplate],
    scorer: Scorer,
    k_list: Sequence[int] = (1, 10, 100),
    workers: int = 1,
) -> ProbeRun:
    run = ProbeRun()
    top_n = max(k_list)

    def probe_one(query: ProbeQuery) -> ProbeRecord | CapabilityError:
        try:
            prompt = select_masked_prompt(query, templates, scorer)
            predictions = scorer.score_fill(prompt.text, top_n=top_n)
            return ProbeRecord(
                query=query,
                prompt=prompt,
                result=score_query(query, predictions, k_list),
            )
        except CapabilityError as exc:
            return exc

    if workers <= 1:
        outcomes = [probe_one(query) for query in queries]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(probe_one, queries))

    for query, outcome in zip(queries, outcomes):
        if isinstance(outcome, CapabilityError):
            if query.relation not in run.skipped_relations:
                run.skipped_relations[query.relation] = str(outcome)
                logger.warning("skipping relation %s: %s", query.relation, outcome)
            continue
        run.records.append(outcome)
    return run


@dataclass
class OppositeRecord:
    probe: OppositeProbe
    overlap: dict[int, float]
    # miss[(graded, opposite)][k]
    miss: dict[tuple[str, str], dict[int, float]]


@dataclass
class OppositeRun:
    records: list[OppositeRecord] = field(default_factory=list)
    skipped_pairs: dict[str, str] = field(default_factory=dict)

    def pair_names(self) -> list[str]:
        return sorted({f"{r.probe.relation_pos}/{r.probe.relation_neg}" for r in self.records})


def run_opposite(
    probes: Sequence[OppositeProbe],
    templates: Mapping[str, RelationTemplate],
    scorer: Scorer,
    k_list: Sequence[int] = (1, 10, 100),
    miss_pairs: Sequence[tuple[str, str]] = (("Synonym", "Antonym"),),
) -> OppositeRun:
    """Probe both sides of each opposite pair; compute Overlap@K and Miss@K.

    Miss@K is only meaningful when the two answer sets cannot legitimately
    share members, so it is restricted to ``miss_pairs`` (both directions).
    """
    run = OppositeRun()
    top_n = max(k_list)
    miss_set = {tuple(pair) for pair in miss_pairs}
    for probe in probes:
        pair_name = f"{probe.relation_pos}/{probe.relation_neg}"
        if pair_name in run.skipped_pairs:
            continue
        try:
            preds = {}
            for relation, answers in (
                (probe.relation_pos, probe.answers_pos),
                (probe.relation_neg, probe.answers_neg),
            ):
                query = ProbeQuery(subject=probe.subject, relation=relation, answers=answers)
                prompt = select_masked_prompt(query, templates, scorer)
                preds[relation] = scorer.score_fill(prompt.text, top_n=top_n)
        except CapabilityError as exc:
            run.skipped_pairs[pair_name] = str(exc)
            logger.warning("skipping opposite pair %s: %s", pair_name, exc)
            continue

        overlap = {
            k: overlap_at_k(preds[probe.relation_pos], preds[probe.relation_neg], k)
            for k in k_list
        }
        miss: dict[tuple[str, str], dict[int, float]] = {}
        for graded, opposite in (
            (probe.relation_pos, probe.relation_neg),
            (probe.relation_neg, probe.relation_pos),
        ):
            if (graded, opposite) in miss_set or (opposite, graded) in miss_set:
                opposite_answers = (
                    probe.answers_neg if opposite == probe.relation_neg else probe.answers_pos
                )
                miss[(graded, opposite)] = {
                    k: miss_at_k(preds[graded], opposite_answers, k) for k in k_list
                }
        run.records.append(OppositeRecord(probe=probe, overlap=overlap, miss=miss))
    return run


def _mean_sem(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    variance = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(variance) / math.sqrt(n)


def summarize_opposite(run: OppositeRun, k_list: Sequence[int]) -> dict:
    """Per-pair Overlap@K and per-direction Miss@K, as mean and sem."""
    overlap_summary: dict[str, dict] = {}
    miss_summary: dict[str, dict] = {}
    by_pair: dict[str, list[OppositeRecord]] = {}
    for record in run.records:
        name = f"{record.probe.relation_pos}/{record.probe.relation_neg}"
        by_pair.setdefault(name, []).append(record)

    for name in sorted(by_pair):
        records = by_pair[name]
        overlap_summary[name] = {
            "n": len(records),
            "overlap": [
                {"k": k, "mean": m, "sem": s}
                for k in k_list
                for m, s in [_mean_sem([r.overlap[k] for r in records])]
            ],
        }
        directions = sorted({d for r in records for d in r.miss})
        for graded, opposite in directions:
            rows = [r for r in records if (graded, opposite) in r.miss]
            miss_summary[f"{graded}/{opposite}"] = {
                "n": len(rows),
                "miss": [
                    {"k": k, "mean": m, "sem": s}
                    for k in k_list
                    for m, s in [_mean_sem([r.miss[(graded, opposite)][k] for r in rows])]
                ],
            }
    return {"overlap": overlap_summary, "miss": miss_summary}


def probe_all_candidates(
    query: ProbeQuery,
    templates: Mapping[str, RelationTemplate],
    scorer: Scorer,
    k_list: Sequence[int] = (1, 10, 100),
) -> list[tuple[str, dict[int, float]]]:
    """Hit ratios for every candidate sentence of a query (not just the pick)."""
    template = templates[query.relation]
    capabilities = scorer.capabilities()
    indices = (
        list(range(len(template.originals)))
        if capabilities.mask_anywhere
        else template.suffix_indices()
    )
    if not indices:
        raise CapabilityError(f"no usable template for {query.relation!r}")
    top_n = max(k_list)
    rows = []
    for candidate in candidate_sentences(query, template, capabilities.mask_token, indices):
        predictions = scorer.score_fill(candidate.text, top_n=top_n)
        rows.append(
            (candidate.text, {k: score_query(query, predictions, [k]).hits[k] for k in k_list})
        )
    return rows


def selected_vs_average(
    queries: Sequence[ProbeQuery],
    templates: Mapping[str, RelationTemplate],
    scorer: Scorer,
    k_list: Sequence[int] = (1, 10, 100),
) -> dict:
    """Compare the selected prompt's hits against the all-candidate average.

    Quantifies how much the perplexity-based sentence selection helps: for
    each query, "selected" scores the chosen prompt and "average" is the
    unweighted mean over every candidate sentence of every usable template.
    Queries the scorer cannot handle are skipped (reported in the result).
    """
    selected: dict[int, list[float]] = {k: [] for k in k_list}
    average: dict[int, list[float]] = {k: [] for k in k_list}
    skipped: dict[str, str] = {}
    top_n = max(k_list)
    for query in queries:
        if query.relation in skipped:
            continue
        try:
            prompt = select_masked_prompt(query, templates, scorer)
            rows = probe_all_candidates(query, templates, scorer, k_list)
        except CapabilityError as exc:
            skipped[query.relation] = str(exc)
            continue
        predictions = scorer.score_fill(prompt.text, top_n=top_n)
        chosen = score_query(query, predictions, k_list)
        for k in k_list:
            selected[k].append(chosen.hits[k])
            average[k].append(math.fsum(hits[k] for _, hits in rows) / len(rows))
    return {
        "n_queries": len(next(iter(selected.values()), [])),
        "selected": {k: _mean_sem(values) for k, values in selected.items()},
        "average": {k: _mean_sem(values) for k, values in average.items()},
        "skipped_relations": skipped,
    }
