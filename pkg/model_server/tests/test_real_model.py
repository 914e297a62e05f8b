"""Acceptance checks that need a real pretrained checkpoint.

These run only when the environment provides one (no network in CI):

* ``CLOZEPROBE_MODEL_DIR``  - path or hub id of a BERT-base-class masked model
* ``CLOZEPROBE_TRIPLES``    - triples TSV (full dump or 3-column) with MadeOf rows

Criteria covered: MadeOf micro hits@10 in the published ballpark, the
marginal-prediction phenomenon (wood/metal/glass dominating top-10 lists),
and fine-tuning lifting test-fold macro hits@100 by a wide margin.
"""

import os

import pytest

clozeprobe_scorers = pytest.importorskip("clozeprobe.scorers")

MODEL = os.environ.get("CLOZEPROBE_MODEL_DIR")
TRIPLES = os.environ.get("CLOZEPROBE_TRIPLES")

pytestmark = pytest.mark.skipif(
    not (MODEL and TRIPLES),
    reason="set CLOZEPROBE_MODEL_DIR and CLOZEPROBE_TRIPLES to run real-model acceptance",
)


class LocalScorer:
    """In-process adapter giving a backend the toolkit's scorer interface."""

    def __init__(self, backend):
        self.backend = backend

    def capabilities(self):
        return clozeprobe_scorers.ScorerCapabilities(**self.backend.capabilities())

    def score_fill(self, prompt, top_n, candidates=None):
        entries = self.backend.fill(prompt, top_n, candidates)
        return clozeprobe_scorers.RankedPredictions(prompt=prompt, entries=tuple(entries))

    def perplexity(self, sentence):
        return self.backend.perplexity(sentence)


def _scorer(model_path):
    from model_server.scoring import MaskedModel

    return LocalScorer(MaskedModel(str(model_path), max_length=64))


@pytest.fixture(scope="module")
def made_of_run():
    from clozeprobe.kb import group_queries, ingest_conceptnet
    from clozeprobe.runner import run_probe
    from clozeprobe.templates import load_templates

    queries = group_queries(ingest_conceptnet(TRIPLES, relations=["MadeOf"]).triples)
    assert queries, "no MadeOf queries in the triples file"
    return run_probe(queries, load_templates(), _scorer(MODEL), k_list=[1, 10, 100])


def test_made_of_micro_hits10_in_published_ballpark(made_of_run):
    from clozeprobe.metrics import aggregate

    report = aggregate([r.result for r in made_of_run.records], [10])
    micro = 100 * report.micro[10][0]
    assert abs(micro - 53.01) <= 10.0, f"MadeOf micro hits@10 {micro:.2f} outside 53.01±10"


def test_marginal_prediction_phenomenon(made_of_run):
    lists = [record.result.predictions.top(10) for record in made_of_run.records]
    for word in ("wood", "metal", "glass"):
        share = sum(1 for tokens in lists if word in [t.lower() for t in tokens]) / len(lists)
        assert share >= 0.5, f"{word!r} in only {100 * share:.1f}% of top-10 lists"


def test_finetune_lifts_test_fold_macro_hits100(tmp_path):
    from clozeprobe.kb import group_queries, ingest_conceptnet, split_folds, write_triples_tsv
    from clozeprobe.metrics import aggregate
    from clozeprobe.runner import run_probe
    from clozeprobe.templates import load_templates
    from model_server.finetune import finetune

    ingest = ingest_conceptnet(TRIPLES)
    folds = split_folds(ingest.triples, n_folds=3, seed=0)
    train_fold, val_fold, test_fold = folds.rotations()[0]
    paths = {}
    for name, fold in (("train", train_fold), ("val", val_fold), ("test", test_fold)):
        paths[name] = tmp_path / f"{name}.tsv"
        write_triples_tsv(folds.members(fold), paths[name])

    checkpoint = finetune(
        MODEL, paths["train"], paths["val"], epochs=4, out_dir=tmp_path / "ckpt"
    )

    templates = load_templates()
    test_queries = group_queries(ingest_conceptnet(paths["test"]).triples)

    def macro_hits_100(model_path):
        run = run_probe(test_queries, templates, _scorer(model_path), k_list=[100])
        report = aggregate([r.result for r in run.records], [100])
        return 100 * report.macro[100][0]

    pretrained = macro_hits_100(MODEL)
    tuned = macro_hits_100(checkpoint)
    assert tuned - pretrained >= 20.0, f"macro hits@100 {pretrained:.2f} -> {tuned:.2f}"
