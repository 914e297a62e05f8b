"""Streaming corpus scan: sentence-level phrase counts and co-occurrences.

Counts are numbers of sentences containing a phrase (not raw occurrences),
and a pair's joint count increments once per sentence containing both
members, which keeps the naive per-sentence oracle exact and guarantees
``joint <= min(subject_count, object_count)``.

Files are scanned independently (sentences never span files), so shards
can be distributed across worker processes and merged by summation; the
result does not depend on worker scheduling.
"""

from __future__ import annotations

import concurrent.futures
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .matcher import PhraseMatcher, compile_patterns


@dataclass(frozen=True)
class PairFrequency:
    subject: str
    object: str
    subject_count: int
    object_count: int
    joint_count: int

    def __post_init__(self):
        if self.joint_count > min(self.subject_count, self.object_count):
            raise ValueError(f"joint count exceeds marginals: {self!r}")


def _normalize_pairs(pairs: Iterable[tuple[str, str]]) -> list[tuple[str, str]]:
    normalized = []
    seen = set()
    for subject, obj in pairs:
        pair = (" ".join(subject.lower().split()), " ".join(obj.lower().split()))
        if pair not in seen:
            seen.add(pair)
            normalized.append(pair)
    return normalized


def _scan_one_file(
    path: Path, matcher: PhraseMatcher, pairs_by_subject: dict[int, list[tuple[int, int]]]
) -> tuple[np.ndarray, np.ndarray]:
    """Per-file phrase sentence counts and per-pair joint counts."""
    n_phrases = len(matcher.phrases)
    n_pairs = sum(len(v) for v in pairs_by_subject.values())
    try:
        if matcher.backend == "cython":
            return _count_events(*matcher.file_events(path), n_phrases, pairs_by_subject)
        phrase_counts = np.zeros(n_phrases, dtype=np.int64)
        joint_counts = np.zeros(n_pairs, dtype=np.int64)
        for present in matcher.iter_file_sentence_sets(path):
            for pid in present:
                phrase_counts[pid] += 1
                for pair_index, object_pid in pairs_by_subject.get(pid, ()):
                    if object_pid in present:
                        joint_counts[pair_index] += 1
        return phrase_counts, joint_counts
    except OSError as exc:
        raise OSError(f"failed to read corpus shard {path}: {exc}") from exc


def _count_events(
    sids: np.ndarray,
    pids: np.ndarray,
    n_phrases: int,
    pairs_by_subject: dict[int, list[tuple[int, int]]],
) -> tuple[np.ndarray, np.ndarray]:
    """Reduce deduplicated (sentence, phrase) events to the count tables."""
    n_pairs = sum(len(v) for v in pairs_by_subject.values())
    phrase_counts = np.bincount(pids, minlength=n_phrases).astype(np.int64)
    joint_counts = np.zeros(n_pairs, dtype=np.int64)
    if len(sids):
        # Stable sort by phrase keeps each phrase's sentence ids ascending.
        order = np.argsort(pids, kind="stable")
        sorted_pids = pids[order]
        sorted_sids = sids[order]
        starts = np.searchsorted(sorted_pids, np.arange(n_phrases + 1, dtype=np.int32))
        sentences_of = [sorted_sids[starts[p] : starts[p + 1]] for p in range(n_phrases)]
        for subject_pid, pair_list in pairs_by_subject.items():
            subject_sids = sentences_of[subject_pid]
            if not len(subject_sids):
                continue
            for pair_index, object_pid in pair_list:
                object_sids = sentences_of[object_pid]
                if len(object_sids):
                    joint_counts[pair_index] = np.intersect1d(
                        subject_sids, object_sids, assume_unique=True
                    ).size
    return phrase_counts, joint_counts


_WORKER_MATCHER: PhraseMatcher | None = None
_WORKER_PAIRS: dict[int, list[tuple[int, int]]] | None = None


def _worker_init(phrases: list[str], backend: str, pair_ids: list[tuple[int, int]]) -> None:
    global _WORKER_MATCHER, _WORKER_PAIRS
    _WORKER_MATCHER = compile_patterns(phrases, backend=backend)
    _WORKER_PAIRS = _index_pairs(pair_ids)

def _worker_scan(path_text: str) -> tuple[np.ndarray, np.ndarray]:
    return _scan_one_file(Path(path_text), _WORKER_MATCHER, _WORKER_PAIRS)


def _index_pairs(pair_ids: Sequence[tuple[int, int]]) -> dict[int, list[tuple[int, int]]]:
    by_subject: dict[int, list[tuple[int, int]]] = defaultdict(list)
    for pair_index, (subject_pid, object_pid) in enumerate(pair_ids):
        by_subject[subject_pid].append((pair_index, object_pid))
    return dict(by_subject)


def scan_corpus(
    corpus: Iterable[str | Path],
    matcher: PhraseMatcher,
    pairs: Iterable[tuple[str, str]],
    workers: int = 1,
) -> list[PairFrequency]:
    """Count subjects, objects and co-occurring sentences over text files.

    The matcher must have been compiled over (at least) every subject and
    object phrase; files may be scanned by ``workers`` processes.
    """
    files = sorted(Path(p) for p in corpus)
    pair_list = _normalize_pairs(pairs)
    missing = {p for pair in pair_list for p in pair if p not in matcher.index}
    if missing:
        raise ValueError(f"pair phrases missing from the matcher: {sorted(missing)[:5]}")
    pair_ids = [(matcher.index[s], matcher.index[o]) for s, o in pair_list]

    n_phrases = len(matcher.phrases)
    phrase_counts = np.zeros(n_phrases, dtype=np.int64)
    joint_counts = np.zeros(len(pair_list), dtype=np.int64)

    if workers <= 1 or len(files) <= 1:
        pairs_by_subject = _index_pairs(pair_ids)
        for path in files:
            file_phrases, file_joints = _scan_one_file(path, matcher, pairs_by_subject)
            phrase_counts += file_phrases
            joint_counts += file_joints
    else:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=workers,
            initializer=_worker_init,
            initargs=(matcher.phrases, matcher.backend, pair_ids),
        ) as pool:
            for file_phrases, file_joints in pool.map(_worker_scan, map(str, files)):
                phrase_counts += file_phrases
                joint_counts += file_joints

    return [
        PairFrequency(
            subject=subject,
            object=obj,
            subject_count=int(phrase_counts[matcher.index[subject]]),
            object_count=int(phrase_counts[matcher.index[obj]]),
            joint_count=int(joint_counts[pair_index]),
        )
        for pair_index, (subject, obj) in enumerate(pair_list)
    ]


def write_pair_frequencies(pairs: Sequence[PairFrequency], path: str | Path) -> None:
    """TSV export: subject, object, subject_count, object_count, joint_count."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("subject\tobject\tsubject_count\tobject_count\tjoint_count\n")
        for pair in pairs:
            handle.write(
                f"{pair.subject}\t{pair.object}\t{pair.subject_count}"
                f"\t{pair.object_count}\t{pair.joint_count}\n"
            )


def read_pair_list(path: str | Path) -> list[tuple[str, str]]:
    """Read a 2-column subject/object TSV."""
    pairs = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) < 2:
                raise ValueError(f"{path}:{lineno}: expected 2 columns")
            pairs.append((cols[0], cols[1]))
    return pairs
