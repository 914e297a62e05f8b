import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clozeprobe.corpusfreq import (
    HAVE_EXTENSION,
    PairFrequency,
    ProbeOutcome,
    bucket_index,
    bucket_joint,
    compile_patterns,
    correlate_hits,
    read_pair_list,
    scan_corpus,
    write_pair_frequencies,
)

BACKENDS = ["python"] + (["cython"] if HAVE_EXTENSION else [])


# Naive oracle: per-sentence double loop with a hand-rolled boundary check.
def _is_letter(ch):
    return "a" <= ch <= "z"


def _phrase_in_sentence(sentence, phrase):
    start = 0
    while True:
        index = sentence.find(phrase, start)
        if index < 0:
            return False
        end = index + len(phrase)
        left_ok = index == 0 or not _is_letter(sentence[index - 1])
        right_ok = end == len(sentence) or not _is_letter(sentence[end])
        if left_ok and right_ok:
            return True
        start = index + 1


def naive_counts(text, phrases, pairs):
    sentences = re.split(r"[.!?\n]", text.lower())
    phrase_counts = {p: 0 for p in phrases}
    joint_counts = {pair: 0 for pair in pairs}
    for sentence in sentences:
        present = {p for p in phrases if _phrase_in_sentence(sentence, p)}
        for p in present:
            phrase_counts[p] += 1
        for subject, obj in pairs:
            if subject in present and obj in present:
                joint_counts[(subject, obj)] += 1
    return phrase_counts, joint_counts


class TestMatcher:
    def test_word_boundary_excludes_substring(self):
        matcher = compile_patterns({"cat"})
        assert matcher.find_all("concatenate") == []

    def test_overlapping_patterns_both_match(self):
        matcher = compile_patterns({"cat", "cat sat"})
        found = matcher.find_all("the cat sat")
        assert ("cat", 4) in found
        assert ("cat sat", 4) in found

    def test_whole_sentence_pattern(self):
        matcher = compile_patterns({"the cat sat"})
        assert matcher.find_all("the cat sat") == [("the cat sat", 0)]

    def test_case_insensitive(self):
        matcher = compile_patterns({"cat"})
        assert matcher.match_set("The CAT sat") == {"cat"}

    def test_digit_flank_is_boundary(self):
        # Boundaries are non-letters, so digits terminate a word.
        matcher = compile_patterns({"cat"})
        assert matcher.match_set("cat2") == {"cat"}

    def test_empty_phrase_rejected(self):
        with pytest.raises(ValueError):
            compile_patterns({"cat", ""})
        with pytest.raises(ValueError):
            compile_patterns(set())

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_sentence_sets(self, backend):
        matcher = compile_patterns({"cat", "dog"}, backend=backend)
        sets = list(matcher.iter_sentence_sets("the cat sat. a dog ran. nothing."))
        as_names = [{matcher.phrases[i] for i in s} for s in sets]
        assert as_names == [{"cat"}, {"dog"}]

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_backends_agree_on_tricky_text(self, backend):
        phrases = {"cat", "cat sat", "at", "concatenate", "sat on", "énergie"}
        text = (
            "the cat sat on the mat! concatenate at will?\n"
            "cat cat cat. énergie éolienne. the scatter plot."
        )
        matcher = compile_patterns(phrases, backend=backend)
        sets = [frozenset(s) for s in matcher.iter_sentence_sets(text)]
        reference = compile_patterns(phrases, backend="python")
        expected = [frozenset(s) for s in reference.iter_sentence_sets(text)]
        assert sets == expected


def _synthetic_corpus(seed, n_sentences, words):
    rng = random.Random(seed)
    sentences = []
    for _ in range(n_sentences):
        length = rng.randint(1, 12)
        sentence = " ".join(rng.choice(words) for _ in range(length))
        sentences.append(sentence + rng.choice([".", "!", "?", ".\n"]))
    return " ".join(sentences)


WORDS = [
    "cat", "dog", "bird", "catalog", "concatenate", "sat", "mat", "the", "a",
    "ran", "cl音", "wood", "metal", "butter", "milk", "ice", "cream", "ice cream",
]
PHRASES = ["cat", "cat sat", "dog", "wood", "butter", "milk", "ice cream", "the cat"]
PAIRS = [("cat", "dog"), ("butter", "milk"), ("ice cream", "milk"), ("cat", "cat")]


class TestScanCorpus:
    def test_hand_scanned_example(self, tmp_path):
        (tmp_path / "c.txt").write_text("the cat sat. a dog ran.")
        matcher = compile_patterns({"cat", "dog"})
        [pair] = scan_corpus([tmp_path / "c.txt"], matcher, [("cat", "dog")])
        assert (pair.subject_count, pair.object_count, pair.joint_count) == (1, 1, 0)

    def test_per_sentence_increment(self, tmp_path):
        (tmp_path / "c.txt").write_text("cat cat dog")
        matcher = compile_patterns({"cat", "dog"})
        [pair] = scan_corpus([tmp_path / "c.txt"], matcher, [("cat", "dog")])
        assert pair.joint_count == 1

    def test_empty_corpus(self, tmp_path):
        (tmp_path / "c.txt").write_text("")
        matcher = compile_patterns({"cat", "dog"})
        [pair] = scan_corpus([tmp_path / "c.txt"], matcher, [("cat", "dog")])
        assert (pair.subject_count, pair.object_count, pair.joint_count) == (0, 0, 0)

    def test_unreadable_shard_named(self, tmp_path):
        matcher = compile_patterns({"cat"})
        with pytest.raises(OSError, match="missing.txt"):
            scan_corpus([tmp_path / "missing.txt"], matcher, [("cat", "cat")])

    def test_missing_pair_phrase_rejected(self, tmp_path):
        (tmp_path / "c.txt").write_text("x.")
        matcher = compile_patterns({"cat"})
        with pytest.raises(ValueError, match="missing"):
            scan_corpus([tmp_path / "c.txt"], matcher, [("cat", "dog")])

    @pytest.mark.parametrize("backend", BACKENDS)
    def test_matches_naive_oracle(self, tmp_path, backend):
        text = _synthetic_corpus(seed=13, n_sentences=400, words=WORDS)
        (tmp_path / "corpus.txt").write_text(text)
        matcher = compile_patterns(PHRASES, backend=backend)
        results = scan_corpus([tmp_path / "corpus.txt"], matcher, PAIRS)
        phrase_counts, joint_counts = naive_counts(text, PHRASES, PAIRS)
        for pair in results:
            assert pair.subject_count == phrase_counts[pair.subject]
            assert pair.object_count == phrase_counts[pair.object]
            assert pair.joint_count == joint_counts[(pair.subject, pair.object)]

    def test_invariant_joint_below_marginals(self, tmp_path):
        text = _synthetic_corpus(seed=5, n_sentences=300, words=WORDS)
        (tmp_path / "corpus.txt").write_text(text)
        matcher = compile_patterns(PHRASES)
        for pair in scan_corpus([tmp_path / "corpus.txt"], matcher, PAIRS):
            assert pair.joint_count <= min(pair.subject_count, pair.object_count)

    def test_shard_parallel_equals_serial(self, tmp_path):
        for index in range(4):
            text = _synthetic_corpus(seed=20 + index, n_sentences=150, words=WORDS)
            (tmp_path / f"shard{index}.txt").write_text(text)
        files = sorted(tmp_path.glob("*.txt"))
        matcher = compile_patterns(PHRASES)
        serial = scan_corpus(files, matcher, PAIRS, workers=1)
        parallel = scan_corpus(files, matcher, PAIRS, workers=3)
        assert serial == parallel

    def test_chunked_reads_match_single_read(self, tmp_path, monkeypatch):
        import clozeprobe.corpusfreq.matcher as matcher_module

        text = _synthetic_corpus(seed=31, n_sentences=500, words=WORDS)
        (tmp_path / "corpus.txt").write_text(text)
        matcher = compile_patterns(PHRASES)
        whole = scan_corpus([tmp_path / "corpus.txt"], matcher, PAIRS)
        monkeypatch.setattr(matcher_module, "CHUNK_BYTES", 256)
        chunked = scan_corpus([tmp_path / "corpus.txt"], compile_patterns(PHRASES), PAIRS)
        assert whole == chunked

    def test_tsv_roundtrip(self, tmp_path):
        pairs = [PairFrequency("a", "b", 3, 2, 1)]
        path = tmp_path / "pairs.tsv"
        write_pair_frequencies(pairs, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "subject\tobject\tsubject_count\tobject_count\tjoint_count"
        assert lines[1] == "a\tb\t3\t2\t1"

    def test_read_pair_list(self, tmp_path):
        path = tmp_path / "pairs.tsv"
        path.write_text("cat\tdog\nbutter\tmilk\n")
        assert read_pair_list(path) == [("cat", "dog"), ("butter", "milk")]

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_property_oracle_equivalence(self, seed):
        text = _synthetic_corpus(seed=seed, n_sentences=60, words=WORDS)
        matcher = compile_patterns(PHRASES)
        phrase_counts, joint_counts = naive_counts(text, PHRASES, PAIRS)
        seen = {p: 0 for p in PHRASES}
        joints = {pair: 0 for pair in PAIRS}
        for present in matcher.iter_sentence_sets(text):
            names = {matcher.phrases[i] for i in present}
            for name in names:
                seen[name] += 1
            for subject, obj in PAIRS:
                if subject in names and obj in names:
                    joints[(subject, obj)] += 1
        assert seen == phrase_counts
        assert joints == joint_counts


def _freq(subject, obj, s, o, j):
    return PairFrequency(subject, obj, s, o, j)


class TestBuckets:
    def test_default_edges_assignment(self):
        pairs = [_freq("a", "b", 9, 9, 0), _freq("c", "d", 9, 9, 3), _freq("e", "f", 99, 99, 12)]
        assert bucket_joint(pairs) == [1, 1, 1, 0, 0]

    def test_all_zero(self):
        pairs = [_freq(f"s{i}", "o", 1, 1, 0) for i in range(5)]
        assert bucket_joint(pairs) == [5, 0, 0, 0, 0]

    def test_histogram_sums_to_pair_count(self):
        pairs = [_freq(f"s{i}", "o", 2000, 2000, i * 7) for i in range(40)]
        assert sum(bucket_joint(pairs)) == 40

    def test_bad_edges(self):
        with pytest.raises(ValueError):
            bucket_joint([], edges=(1, 10))
        with pytest.raises(ValueError):
            bucket_joint([], edges=(0, 10, 10))

    def test_bucket_index_unbounded_tail(self):
        assert bucket_index(10_000_000, (0, 1, 10, 100, 1000)) == 4


class TestCorrelateHits:
    def test_bucket_proportion(self):
        pairs = [_freq("s1", "o1", 5, 5, 2), _freq("s2", "o2", 5, 5, 3)]
        outcomes = [
            ProbeOutcome("s1", "o1", object_hit=True, query_hit=True),
            ProbeOutcome("s2", "o2", object_hit=False, query_hit=False),
        ]
        result = correlate_hits(pairs, outcomes, mode="top100")
        assert result.bar[1] == (1, 2)
        assert result.bar_proportions()[1] == 0.5

    def test_zero_joint_excluded(self):
        pairs = [_freq("s1", "o1", 5, 5, 0)]
        outcomes = [ProbeOutcome("s1", "o1", object_hit=True, query_hit=True)]
        result = correlate_hits(pairs, outcomes)
        assert all(total == 0 for _, total in result.bar)

    def test_single_populated_heatmap_cell(self):
        pairs = [_freq("s1", "o1", 5, 5, 2)]
        outcomes = [ProbeOutcome("s1", "o1", object_hit=True, query_hit=False)]
        result = correlate_hits(pairs, outcomes, mode="top100")
        cells = result.heatmap_proportions()
        populated = [(j, s) for j, row in enumerate(cells) for s, v in enumerate(row) if v is not None]
        assert populated == [(1, 1)]
        assert cells[1][1] == 1.0

    def test_unjoinable_goes_to_residue(self):
        result = correlate_hits([], [ProbeOutcome("x", "y", True, True)])
        assert result.residue == [("x", "y")]

    def test_query_hit_mode(self):
        pairs = [_freq("s1", "o1", 5, 5, 2)]
        outcomes = [ProbeOutcome("s1", "o1", object_hit=False, query_hit=True)]
        top100 = correlate_hits(pairs, outcomes, mode="top100")
        topk = correlate_hits(pairs, outcomes, mode="top_answer_count")
        assert top100.bar[1] == (0, 1)
        assert topk.bar[1] == (1, 1)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            correlate_hits([], [], mode="bogus")
