"""Masked-prompt selection: template instantiation plus two-stage scoring.

For a probe query, every template is instantiated, grammatically
diversified, and scored by perplexity with the object slot filled by the
neutral token "thing" (so selection does not depend on a particular
answer). Stage one keeps the most natural variant of each template, stage
two keeps the most natural candidate overall; ties go to the lower
(template, variant) index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import CapabilityError, ConfigurationError
from .grammar import expand_grammar
from .kb import ProbeQuery
from .scorers import Scorer
from .templates import OBJ, RelationTemplate, instantiate

NEUTRAL_FILLER = "thing"


@dataclass(frozen=True)
class CandidateSentence:
    """One grammatical variant of one template, with its score once known."""

    text: str
    template_index: int
    variant_index: int
    perplexity: float | None = None


@dataclass(frozen=True)
class MaskedPrompt:
    """The selected cloze sentence for a (subject, relation) query."""

    text: str
    subject: str
    relation: str
    answers: frozenset[str]
    chosen_template: int
    chosen_variant: int
    perplexity: float


def candidate_sentences(
    query: ProbeQuery,
    template: RelationTemplate,
    mask_token: str,
    template_indices: list[int] | None = None,
) -> list[CandidateSentence]:
    """All (template, variant) candidates for a query, mask in place."""
    indices = template_indices if template_indices is not None else range(len(template.originals))
    candidates = []
    for t_index in indices:
        base = instantiate(template.originals[t_index], query.subject, mask_token)
        for v_index, variant in enumerate(expand_grammar(base, query.subject)):
            candidates.append(
                CandidateSentence(text=variant, template_index=t_index, variant_index=v_index)
            )
    return candidates


def select_masked_prompt(
    query: ProbeQuery,
    templates: Mapping[str, RelationTemplate],
    scorer: Scorer,
) -> MaskedPrompt:
    """Pick the lowest-perplexity candidate, per template then across them."""
    template = templates.get(query.relation)
    if template is None:
        raise ConfigurationError(f"no templates for relation {query.relation!r}")

    capabilities = scorer.capabilities()
    if capabilities.mask_anywhere:
        usable = list(range(len(template.originals)))
    else:
        usable = template.suffix_indices()
        if not usable:
            raise CapabilityError(
                f"scorer {capabilities.model_name!r} needs the mask at the end of the "
                f"sentence, but no {query.relation!r} template ends with {OBJ}"
            )

    mask = capabilities.mask_token
    scored = [
        CandidateSentence(
            text=candidate.text,
            template_index=candidate.template_index,
            variant_index=candidate.variant_index,
            perplexity=scorer.perplexity(candidate.text.replace(mask, NEUTRAL_FILLER)),
        )
        for candidate in candidate_sentences(query, template, mask, usable)
    ]

    # Stage 1: the most natural variant of each template.
    stage_one: dict[int, CandidateSentence] = {}
    for candidate in scored:
        best = stage_one.get(candidate.template_index)
        if best is None or candidate.perplexity < best.perplexity:
            stage_one[candidate.template_index] = candidate

    # Stage 2: the most natural candidate across templates.
    winner = min(
        stage_one.values(),
        key=lambda c: (c.perplexity, c.template_index, c.variant_index),
    )
    return MaskedPrompt(
        text=winner.text,
        subject=query.subject,
        relation=query.relation,
        answers=query.answers,
        chosen_template=winner.template_index,
        chosen_variant=winner.variant_index,
        perplexity=winner.perplexity,
    )
