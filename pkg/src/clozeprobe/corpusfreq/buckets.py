"""Frequency bucketing and the frequency/performance correlation grids.

Default buckets follow log decades: {0}, [1,10), [10,100), [100,1000),
[1000, inf). The correlation views only consider pairs observed together at
least once, mirroring the probe analysis protocol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .scan import PairFrequency

DEFAULT_EDGES = (0, 1, 10, 100, 1000)


def _check_edges(edges: Sequence[int]) -> None:
    if not edges or edges[0] != 0:
        raise ValueError("bucket edges must start at 0")
    if any(a >= b for a, b in zip(edges, edges[1:])):
        raise ValueError("bucket edges must be strictly increasing")


def bucket_index(value: int, edges: Sequence[int]) -> int:
    """Index of the bucket holding ``value``; the last bucket is unbounded."""
    for index in range(len(edges) - 1):
        if edges[index] <= value < edges[index + 1]:
            return index
    return len(edges) - 1


def bucket_label(index: int, edges: Sequence[int]) -> str:
    if index + 1 < len(edges):
        if edges[index + 1] == edges[index] + 1:
            return str(edges[index])
        return f"{edges[index]}-{edges[index + 1] - 1}"
    return f"{edges[index]}+"


def bucket_joint(
    pairs: Iterable[PairFrequency], edges: Sequence[int] = DEFAULT_EDGES
) -> list[int]:
    """Histogram of pairs over joint-count buckets; sums to the pair count."""
    _check_edges(edges)
    histogram = [0] * len(edges)
    for pair in pairs:
        histogram[bucket_index(pair.joint_count, edges)] += 1
    return histogram


@dataclass(frozen=True)
class ProbeOutcome:
    """One probed triple joined against its corpus pair frequency.

    ``object_hit`` says whether this object was in the top-100 predictions;
    ``query_hit`` whether any of the query's answers appeared within the
    top-|answers| predictions.
    """

    subject: str
    object: str
    object_hit: bool
    query_hit: bool


@dataclass
class CorrelationResult:
    mode: str
    joint_edges: tuple[int, ...]
    subject_edges: tuple[int, ...]
    # Per joint bucket: (hits, total); buckets with total 0 mean "no data".
    bar: list[tuple[int, int]] = field(default_factory=list)
    # heatmap[joint_bucket][subject_bucket] = (hits, total).
    heatmap: list[list[tuple[int, int]]] = field(default_factory=list)
    residue: list[tuple[str, str]] = field(default_factory=list)

    def bar_proportions(self) -> list[float | None]:
        return [hits / total if total else None for hits, total in self.bar]

    def heatmap_proportions(self) -> list[list[float | None]]:
        return [
            [hits / total if total else None for hits, total in row]
            for row in self.heatmap
        ]


def correlate_hits(
    pairs: Iterable[PairFrequency],
    outcomes: Iterable[ProbeOutcome],
    mode: str = "top100",
    joint_edges: Sequence[int] = DEFAULT_EDGES,
    subject_edges: Sequence[int] = DEFAULT_EDGES,
) -> CorrelationResult:
    """Bucket probe hits by joint frequency, and by (joint, subject) grid.

    Only pairs with joint count >= 1 participate; outcomes that cannot be
    joined to a scanned pair land in ``residue`` rather than being dropped
    silently.
    """
    if mode not in ("top100", "top_answer_count"):
        raise ValueError(f"unknown mode {mode!r}")
    _check_edges(joint_edges)
    _check_edges(subject_edges)

    frequency: Mapping[tuple[str, str], PairFrequency] = {
        (p.subject, p.object): p for p in pairs
    }
    n_joint, n_subject = len(joint_edges), len(subject_edges)
    result = CorrelationResult(
        mode=mode,
        joint_edges=tuple(joint_edges),
        subject_edges=tuple(subject_edges),
        bar=[(0, 0)] * n_joint,
        heatmap=[[(0, 0)] * n_subject for _ in range(n_joint)],
    )

    for outcome in outcomes:
        pair = frequency.get((outcome.subject, outcome.object))
        if pair is None:
            result.residue.append((outcome.subject, outcome.object))
            continue
        if pair.joint_count < 1:
            continue
        hit = outcome.object_hit if mode == "top100" else outcome.query_hit
        j = bucket_index(pair.joint_count, joint_edges)
        s = bucket_index(pair.subject_count, subject_edges)
        hits, total = result.bar[j]
        result.bar[j] = (hits + int(hit), total + 1)
        hits, total = result.heatmap[j][s]
        result.heatmap[j][s] = (hits + int(hit), total + 1)
    return result
