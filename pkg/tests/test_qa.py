import json
import math

import pytest

from clozeprobe.errors import ConfigurationError, DatasetParseError
from clozeprobe.kb import Triple
from clozeprobe.qa import (
    DocumentFrequencies,
    QAExample,
    attach_type_labels,
    em,
    f1,
    integrate_knowledge,
    normalize_answer,
    read_record,
    read_squad,
    similarity_performance_table,
    tfidf_cosine,
    tokenize,
)


class TestTfidfCosine:
    def test_identity(self):
        stats = DocumentFrequencies.from_texts(["cat dog", "bird", "cat bird"])
        assert tfidf_cosine("cat dog", "cat dog", stats) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_vocabularies(self):
        stats = DocumentFrequencies.from_texts(["cat dog", "bird fish"])
        assert tfidf_cosine("cat dog", "bird fish", stats) == 0.0

    def test_hand_built_vector_oracle(self):
        # Three-document table; similarity recomputed with explicit vectors.
        docs = ["cat dog", "cat bird", "fish"]
        stats = DocumentFrequencies.from_texts(docs)
        question, context = "cat dog", "cat bird"

        def idf(token):
            df = sum(1 for d in docs if token in d.split())
            return math.log(len(docs) / (1 + df)) + 1

        q = {"cat": idf("cat"), "dog": idf("dog")}
        c = {"cat": idf("cat"), "bird": idf("bird")}
        dot = q["cat"] * c["cat"]
        norm_q = math.sqrt(sum(v * v for v in q.values()))
        norm_c = math.sqrt(sum(v * v for v in c.values()))
        assert tfidf_cosine(question, context, stats) == pytest.approx(dot / (norm_q * norm_c))

    def test_zero_norm_convention(self):
        stats = DocumentFrequencies.from_texts(["cat"])
        assert tfidf_cosine("???", "cat", stats) == 0.0

    def test_range(self):
        stats = DocumentFrequencies.from_texts(["a b c", "b c d", "c d e"])
        value = tfidf_cosine("a b c d", "c d e", stats)
        assert 0.0 <= value <= 1.0

    def test_tokenize(self):
        assert tokenize("The ozone-layer, 1698!") == ["the", "ozone", "layer", "1698"]

    def test_empty_text_rejected(self):
        stats = DocumentFrequencies.from_texts(["x"])
        with pytest.raises(ValueError):
            tfidf_cosine("", "x", stats)


class TestEm:
    def test_article_and_case_normalization(self):
        assert em("The cat", ["cat"]) == 1

    def test_no_stemming(self):
        assert em("cats", ["cat"]) == 0

    def test_numeric_answer(self):
        assert em("1698", ["1698"]) == 1

    def test_punctuation_stripped(self):
        assert em("cat.", ["cat"]) == 1

    def test_no_answer_convention(self):
        assert em("", []) == 1
        assert em("something", []) == 0


class TestF1:
    def test_identical(self):
        assert f1("exact words here", ["exact words here"]) == 1.0

    def test_two_thirds_case(self):
        # pred normalizes to "cat" (article stripped): P=1/1, R=1/2.
        assert f1("the cat", ["cat sat"]) == 2 / 3

    def test_disjoint(self):
        assert f1("dog", ["cat"]) == 0.0

    def test_max_over_golds(self):
        assert f1("cat", ["dog", "cat"]) == 1.0

    def test_symmetry_single_gold(self):
        assert f1("big cat", ["cat sat"]) == f1("cat sat", ["big cat"])

    def test_em_one_implies_f1_one(self):
        for prediction, gold in [("The cat", ["cat"]), ("1698", ["1698"])]:
            if em(prediction, gold):
                assert f1(prediction, gold) == 1.0

    def test_no_answer_convention(self):
        assert f1("", []) == 1.0
        assert f1("word", []) == 0.0

    def test_normalize_answer(self):
        assert normalize_answer("The  Cat's,  hat!") == "cats hat"


class TestIntegrateKnowledge:
    def test_squad_style_insertion(self, templates):
        example = QAExample(
            id="x",
            question="How frequent is snow in the Southwest of the state?",
            context="But snow is very rare in the Southwest of the state.",
            gold_answers=["very rare"],
            dataset_style="squad",
        )
        triple = Triple("rare", "Antonym", "frequent")
        pair = integrate_knowledge(example, [triple], templates)
        assert "rare, which is the opposite of frequent, in" in pair.context
        assert pair.question == example.question
        assert pair.applied[0].site == "context"

    def test_record_style_highlight(self, templates):
        example = QAExample(
            id="x",
            question="How frequent is snow?",
            context="But snow is very rare in the Southwest of the state.",
            gold_answers=["rare"],
            dataset_style="record",
        )
        triple = Triple("rare", "Antonym", "frequent")
        pair = integrate_knowledge(example, [triple], templates)
        assert pair.context.endswith("\n@highlight rare is the opposite of frequent")

    def test_question_site_when_subject_in_question(self, templates):
        example = QAExample(
            id="x",
            question="Why would one want to give more punishment?",
            context="The judge increased her sentence from 40 to 60 days.",
            gold_answers=["sentence"],
            dataset_style="squad",
        )
        triple = Triple("punishment", "RelatedTo", "sentence")
        pair = integrate_knowledge(example, [triple], templates)
        assert "punishment, which is related to sentence," in pair.question
        assert pair.context == example.context

    def test_unmatched_triple_skipped(self, templates):
        example = QAExample(
            id="x", question="Where is it?", context="Nothing here.",
            gold_answers=[], dataset_style="squad",
        )
        triple = Triple("zebra", "IsA", "animal")
        pair = integrate_knowledge(example, [triple], templates)
        assert pair.question == example.question
        assert pair.context == example.context
        assert pair.skipped == [triple]

    def test_insertion_only_recoverable(self, templates):
        example = QAExample(
            id="x",
            question="How frequent is snow?",
            context="Snow is rare here.",
            gold_answers=["rare"],
            dataset_style="squad",
        )
        pair = integrate_knowledge(example, [Triple("rare", "Antonym", "frequent")], templates)
        for insertion in pair.applied:
            assert insertion.site == "context"
            restored = (
                pair.context[: insertion.start]
                + pair.context[insertion.start + len(insertion.inserted) :]
            )
            assert restored == example.context

    def test_first_occurrence_only(self, templates):
        example = QAExample(
            id="x",
            question="Is frequent rain common?",
            context="rare things stay rare.",
            gold_answers=[],
            dataset_style="squad",
        )
        pair = integrate_knowledge(example, [Triple("rare", "Antonym", "frequent")], templates)
        assert pair.context.startswith("rare, which is the opposite of frequent, things")
        assert pair.context.count("which is the opposite of") == 1

    def test_whole_word_guard(self, templates):
        # "rare" inside "rarely" must not trigger an insertion.
        example = QAExample(
            id="x",
            question="Is frequent rain common?",
            context="It rarely rains.",
            gold_answers=[],
            dataset_style="squad",
        )
        pair = integrate_knowledge(example, [Triple("rare", "Antonym", "frequent")], templates)
        assert pair.context == example.context
        assert pair.skipped

    def test_case_insensitive_match_preserves_original(self, templates):
        example = QAExample(
            id="x",
            question="What helps the biosphere from UV?",
            context="The ozone layer protects from ultraviolet radiation.",
            gold_answers=[],
            dataset_style="squad",
        )
        triple = Triple("uv", "Synonym", "ultraviolet radiation")
        pair = integrate_knowledge(example, [triple], templates)
        assert "UV, which is the same as ultraviolet radiation," in pair.question

    def test_missing_clause_template(self):
        example = QAExample("x", "q rare", "c frequent", [], "squad")
        with pytest.raises(ConfigurationError):
            integrate_knowledge(example, [Triple("rare", "Antonym", "frequent")], {})


class TestReaders:
    def test_read_squad_mini(self, data_dir):
        examples = read_squad(data_dir / "squad_mini.json")
        assert len(examples) == 3
        by_id = {e.id: e for e in examples}
        assert by_id["q1"].gold_answers == ["1698"]
        assert "1698" in by_id["q1"].context

    def test_read_squad_no_answer_flagged(self, data_dir):
        by_id = {e.id: e for e in read_squad(data_dir / "squad_mini.json")}
        assert by_id["q3"].is_impossible is True
        assert by_id["q3"].gold_answers == []

    def test_answer_is_context_substring(self, data_dir):
        for example in read_squad(data_dir / "squad_mini.json"):
            for answer in example.gold_answers:
                assert answer in example.context

    def test_read_record_mini(self, data_dir):
        examples = read_record(data_dir / "record_mini.json")
        assert len(examples) == 1
        example = examples[0]
        assert example.dataset_style == "record"
        assert example.gold_answers == ["ozone layer"]
        assert example.entities == ["ozone layer", "ultraviolet radiation"]

    def test_read_squad_schema_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"data": [{"paragraphs": [{"qas": [{}]}]}]}))
        with pytest.raises(DatasetParseError, match=r"data\[0\]\.paragraphs\[0\]"):
            read_squad(bad)

    def test_read_record_schema_error(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"data": [{"passage": {}}]}))
        with pytest.raises(DatasetParseError):
            read_record(bad)

    def test_attach_type_labels(self, data_dir):
        examples = read_squad(data_dir / "squad_mini.json")
        attach_type_labels(examples, {"q1": ["commonsense", "synonymy"]})
        by_id = {e.id: e for e in examples}
        assert by_id["q1"].type_labels == {"commonsense", "synonymy"}
        assert by_id["q2"].type_labels == set()
        with pytest.raises(ValueError):
            attach_type_labels(examples, {"q1": ["bogus_label"]})


class TestSimilarityTable:
    def test_single_bucket(self):
        rows = similarity_performance_table([(0.05, 1.0, 1.0), (0.08, 0.0, 0.5)])
        populated = [r for r in rows if r.count]
        assert len(populated) == 1
        assert populated[0].lower == 0.0

    def test_bucket_mean(self):
        rows = similarity_performance_table(
            [(0.15, 1.0, 1.0), (0.15, 0.0, 0.0), (0.15, 0.0, 0.5), (0.15, 1.0, 1.0)]
        )
        bucket = next(r for r in rows if r.lower == pytest.approx(0.1))
        assert bucket.mean_em == 0.5
        assert bucket.mean_f1 == pytest.approx(0.625)

    def test_hand_fixture_across_buckets(self):
        records = [
            (0.05, 1.0, 1.0),
            (0.05, 0.0, 0.0),
            (0.25, 1.0, 1.0),
            (0.25, 1.0, 0.8),
            (0.95, 0.0, 0.1),
            (0.95, 1.0, 0.9),
        ]
        rows = similarity_performance_table(records)
        by_lower = {r.lower: r for r in rows}
        assert by_lower[0.0].count == 2 and by_lower[0.0].mean_em == 0.5
        assert by_lower[0.2].count == 2 and by_lower[0.2].mean_f1 == pytest.approx(0.9)
        overflow = rows[-1]
        assert overflow.upper is None
        assert overflow.count == 2
        assert overflow.mean_f1 == pytest.approx(0.5)

    def test_bad_edges(self):
        with pytest.raises(ValueError):
            similarity_performance_table([], edges=(0.3, 0.1))
