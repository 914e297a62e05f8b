"""Knowledge-repository ingestion: triples, probe queries, opposite probes, folds.

Input is either the ConceptNet assertions dump (5-column TSV with ``/c/`` and
``/r/`` URIs) or a simplified 3-column ``subject<TAB>relation<TAB>object``
file used for fixtures. Surface forms are lowercased and underscores become
spaces; everything downstream treats triples as immutable values.
"""

from __future__ import annotations

import logging
import random
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

# The 32 relations probed by the experiments, in the order of the template
# table. ConceptNet URIs are `/r/<name>` with the same CamelCase names.
RELATIONS = (
    "RelatedTo",
    "HasContext",
    "IsA",
    "DerivedFrom",
    "Synonym",
    "FormOf",
    "SimilarTo",
    "EtymologicallyRelatedTo",
    "AtLocation",
    "MannerOf",
    "Antonym",
    "HasProperty",
    "PartOf",
    "UsedFor",
    "DistinctFrom",
    "HasPrerequisite",
    "HasSubevent",
    "Causes",
    "HasA",
    "InstanceOf",
    "CapableOf",
    "MotivatedByGoal",
    "MadeOf",
    "Entails",
    "Desires",
    "NotHasProperty",
    "CreatedBy",
    "NotDesires",
    "DefinedAs",
    "NotCapableOf",
    "LocatedNear",
    "EtymologicallyDerivedFrom",
)

RELATION_URI_TABLE = {f"/r/{name}": name for name in RELATIONS}

# Opposite-relation pairs used for the controlled Overlap@K / Miss@K probes.
OPPOSITE_PAIRS = (
    ("Synonym", "Antonym"),
    ("HasProperty", "NotHasProperty"),
    ("Desires", "NotDesires"),
    ("CapableOf", "NotCapableOf"),
)


@dataclass(frozen=True, order=True)
class Triple:
    subject: str
    relation: str
    object: str

    def __post_init__(self):
        if not self.subject or not self.object:
            raise ValueError(f"empty subject/object in triple {self!r}")


@dataclass(frozen=True)
class ProbeQuery:
    """One (subject, relation) probe with the full set of true answers."""

    subject: str
    relation: str
    answers: frozenset[str]


@dataclass(frozen=True)
class OppositeProbe:
    """A subject with answers under both relations of an opposite pair."""

    subject: str
    relation_pos: str
    relation_neg: str
    answers_pos: frozenset[str]
    answers_neg: frozenset[str]


@dataclass
class IngestResult:
    """Triples plus the warnings produced while reading them."""

    triples: list[Triple]
    warnings: list[str] = field(default_factory=list)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def __len__(self) -> int:
        return len(self.triples)


def _normalize_surface(term: str) -> str:
    return " ".join(term.replace("_", " ").lower().split())


def _parse_concept_uri(uri: str) -> tuple[str, str] | None:
    """Return (language, surface form) from a `/c/<lang>/<term>[/...]` URI."""
    parts = uri.split("/")
    if len(parts) < 4 or parts[0] != "" or parts[1] != "c" or not parts[2] or not parts[3]:
        return None
    return parts[2], _normalize_surface(parts[3])


def ingest_conceptnet(
    path: str | Path,
    relations: Iterable[str] = RELATIONS,
    language: str = "en",
    strict: bool = False,
) -> IngestResult:
    """Read triples from an assertions TSV, keeping only wanted relations.

    Rows whose relation is outside ``relations`` or whose endpoints carry a
    different language tag are filtered silently; structurally malformed rows
    are skipped with a counted warning (or raise in strict mode). Duplicate
    (subject, relation, object) rows are removed; edge weights are ignored.
    """
    path = Path(path)
    wanted = set(relations)
    unknown = wanted - set(RELATIONS)
    if unknown:
        raise ConfigurationError(f"unknown relations requested: {sorted(unknown)}")

    triples: list[Triple] = []
    seen: set[Triple] = set()
    warnings: list[str] = []

    def warn(lineno: int, reason: str) -> None:
        message = f"{path.name}:{lineno}: {reason}"
        if strict:
            raise ValueError(message)
        warnings.append(message)
        logger.warning("skipping malformed row %s", message)

    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) >= 4 and cols[1].startswith("/r/"):
                # Full dump layout: uri, relation, start, end, json-metadata.
                relation = RELATION_URI_TABLE.get(cols[1])
                if relation is None or relation not in wanted:
                    continue
                start = _parse_concept_uri(cols[2])
                end = _parse_concept_uri(cols[3])
                if start is None or end is None:
                    warn(lineno, "bad concept uri")
                    continue
                if start[0] != language or end[0] != language:
                    continue
                subject, obj = start[1], end[1]
            elif len(cols) == 3:
                # Simplified fixture layout: subject, relation, object.
                subject, relation, obj = (
                    _normalize_surface(cols[0]),
                    cols[1].strip(),
                    _normalize_surface(cols[2]),
                )
                if relation not in RELATION_URI_TABLE.values():
                    warn(lineno, f"unknown relation {relation!r}")
                    continue
                if relation not in wanted:
                    continue
            else:
                warn(lineno, f"expected 3 or >=4 columns, got {len(cols)}")
                continue

            if not subject or not obj:
                warn(lineno, "empty surface form")
                continue
            triple = Triple(subject, relation, obj)
            if triple in seen:
                continue
            seen.add(triple)
            triples.append(triple)

    return IngestResult(triples=triples, warnings=warnings)


def group_queries(triples: Iterable[Triple]) -> list[ProbeQuery]:
    """Group triples into one query per distinct (subject, relation).

    Every triple lands in exactly one query's answer set, so the sum of
    answer counts equals the number of distinct triples.
    """
    grouped: dict[tuple[str, str], set[str]] = defaultdict(set)
    for triple in triples:
        grouped[(triple.subject, triple.relation)].add(triple.object)
    return [
        ProbeQuery(subject=subject, relation=relation, answers=frozenset(answers))
        for (subject, relation), answers in sorted(
            grouped.items(), key=lambda item: (item[0][1], item[0][0])
        )
    ]


def build_opposite_probes(
    triples: Iterable[Triple],
    pair_table: Sequence[tuple[str, str]] = OPPOSITE_PAIRS,
) -> list[OppositeProbe]:
    """Build controlled probes: subjects answered under BOTH pair relations."""
    for pair in pair_table:
        for relation in pair:
            if relation not in RELATIONS:
                raise ConfigurationError(f"unknown relation in pair table: {relation!r}")

    by_subject_relation: dict[tuple[str, str], set[str]] = defaultdict(set)
    for triple in triples:
        by_subject_relation[(triple.subject, triple.relation)].add(triple.object)

    probes = []
    for rel_pos, rel_neg in pair_table:
        subjects = sorted(
            {s for (s, r) in by_subject_relation if r == rel_pos}
            & {s for (s, r) in by_subject_relation if r == rel_neg}
        )
        for subject in subjects:
            probes.append(
                OppositeProbe(
                    subject=subject,
                    relation_pos=rel_pos,
                    relation_neg=rel_neg,
                    answers_pos=frozenset(by_subject_relation[(subject, rel_pos)]),
                    answers_neg=frozenset(by_subject_relation[(subject, rel_neg)]),
                )
            )
    return probes


@dataclass
class FoldAssignment:
    """Random partition of triples into folds, with the evaluation rotations."""

    n_folds: int
    assignment: dict[Triple, int]
    seed: int

    def members(self, fold: int) -> list[Triple]:
        return sorted(t for t, f in self.assignment.items() if f == fold)

    def rotations(self) -> list[tuple[int, int, int]]:
        """(train, validation, test) fold indices; each fold is test once."""
        n = self.n_folds
        return [(i, (i + 1) % n, (i + 2) % n) for i in range(n)]


def split_folds(triples: Iterable[Triple], n_folds: int = 3, seed: int = 0) -> FoldAssignment:
    """Deterministically shuffle triples into ``n_folds`` near-equal folds."""
    if n_folds < 2:
        raise ValueError("n_folds must be >= 2")
    ordered = sorted(set(triples))
    if n_folds > len(ordered):
        raise ValueError(f"n_folds={n_folds} exceeds number of triples ({len(ordered)})")
    rng = random.Random(seed)
    rng.shuffle(ordered)
    assignment = {triple: index % n_folds for index, triple in enumerate(ordered)}
    return FoldAssignment(n_folds=n_folds, assignment=assignment, seed=seed)


def write_triples_tsv(triples: Iterable[Triple], path: str | Path) -> None:
    """Write triples in the simplified 3-column layout."""
    with open(path, "w", encoding="utf-8") as handle:
        for triple in triples:
            handle.write(f"{triple.subject}\t{triple.relation}\t{triple.object}\n")


def relation_stats(queries: Iterable[ProbeQuery]) -> dict[str, tuple[int, float]]:
    """Per relation: (number of queries, average answers per query).

    Reproduces the sample-count / average-answer columns of the template
    table when run over a full repository dump.
    """
    counts: dict[str, int] = defaultdict(int)
    answers: dict[str, int] = defaultdict(int)
    for query in queries:
        counts[query.relation] += 1
        answers[query.relation] += len(query.answers)
    return {
        relation: (counts[relation], answers[relation] / counts[relation])
        for relation in sorted(counts)
    }
