"""Umbrella command line: probe, opposite, freq, augment, score-rc, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, kb, qa
from .config import Config
from .corpusfreq import (
    DEFAULT_EDGES,
    ProbeOutcome,
    bucket_joint,
    bucket_label,
    compile_patterns,
    correlate_hits,
    read_pair_list,
    scan_corpus,
    write_pair_frequencies,
)
from .metrics import aggregate, top_word_frequencies
from .report import (
    PlotData,
    RunManifest,
    emit_plot_data,
    emit_probe_report,
    write_json,
)
from .runner import run_opposite, run_probe, selected_vs_average, summarize_opposite
from .scorers import resolve_scorer
from .templates import load_templates

logger = logging.getLogger(__name__)

DEFAULT_K = (1, 10, 100)


def _shared_options() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="INI configuration file")
    shared.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    shared.add_argument(
        "--scorer",
        default=None,
        help="scorer: model-server URL, builtin:fixture[:table.json], builtin:ngram:corpus.txt",
    )
    shared.add_argument("--k", default=None, help="comma-separated K list (default 1,10,100)")
    shared.add_argument("--out", default="out", help="output directory")
    shared.add_argument("--workers", type=int, default=None, help="parallel workers")
    return shared


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clozeprobe",
        description="Cloze-style knowledge probing for language models",
    )
    parser.add_argument("--version", action="version", version=f"clozeprobe {__version__}")
    shared = _shared_options()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("probe", parents=[shared], help="run the knowledge probing test")
    p.add_argument("--triples", required=True, help="triples TSV (dump or 3-column)")
    p.add_argument("--templates", default=None, help="template file (default: bundled)")
    p.add_argument("--relations", default=None, help="comma-separated relation filter")
    p.add_argument("--language", default="en")
    p.add_argument("--limit", type=int, default=None, help="probe only the first N queries")
    p.add_argument("--top-words", type=int, default=10, help="top repeated words to report")
    p.add_argument(
        "--selection-analysis",
        action="store_true",
        help="also compare selected prompts against the all-candidate average",
    )

    p = sub.add_parser("opposite", parents=[shared], help="probe opposite relation pairs")
    p.add_argument("--triples", required=True)
    p.add_argument("--templates", default=None)
    p.add_argument("--language", default="en")
    p.add_argument(
        "--pairs",
        default=None,
        help="pairs as Pos:Neg[,Pos:Neg...] (default: the four controlled pairs)",
    )
    p.add_argument(
        "--miss-pairs",
        default="Synonym:Antonym",
        help="pairs whose Miss@K is computed (answers must be incompatible)",
    )

    p = sub.add_parser("freq", parents=[shared], help="corpus co-occurrence analysis")
    p.add_argument("--corpus", required=True, help="directory of .txt files")
    p.add_argument("--pairs", default=None, help="2-column subject/object TSV")
    p.add_argument("--triples", default=None, help="derive pairs from a triples TSV")
    p.add_argument("--language", default="en")
    p.add_argument("--edges", default=None, help="joint-count bucket edges (default 0,1,10,100,1000)")
    p.add_argument("--results", default=None, help="predictions.jsonl from a probe run to correlate")
    p.add_argument("--mode", choices=("top100", "top_answer_count"), default="top100")
    p.add_argument("--backend", choices=("cython", "python"), default=None)

    p = sub.add_parser("augment", parents=[shared], help="integrate triples into QA examples")
    p.add_argument("--dataset", required=True, help="SQuAD or ReCoRD JSON")
    p.add_argument("--style", choices=("squad", "record"), required=True)
    p.add_argument("--knowledge", required=True, help="JSON {example_id: [[s, r, o], ...]}")
    p.add_argument("--templates", default=None)

    p = sub.add_parser("score-rc", parents=[shared], help="score RC predictions (EM/F1)")
    p.add_argument("--dataset", required=True)
    p.add_argument("--style", choices=("squad", "record"), required=True)
    p.add_argument("--predictions", required=True, help="JSON {example_id: answer text}")
    p.add_argument("--labels", default=None, help="JSON {example_id: [type labels]}")
    p.add_argument("--similarity-edges", default=None)

    p = sub.add_parser("report", parents=[shared], help="re-render reports from raw predictions")
    p.add_argument("--raw", required=True, help="predictions.jsonl from a probe run")
    return parser


def _k_list(args, config: Config) -> list[int]:
    if args.k:
        return [int(part) for part in args.k.split(",") if part.strip()]
    return config.get_ints("probe", "k", list(DEFAULT_K))


def _seed(args, config: Config) -> int:
    if args.seed is not None:
        return args.seed
    return config.get_int("probe", "seed", 0)


def _scorer_spec(args, config: Config) -> str:
    return args.scorer or config.get("probe", "scorer", "builtin:fixture")


def _workers(args, config: Config, section: str) -> int:
    if args.workers is not None:
        return args.workers
    return config.get_int(section, "workers", 1)


def _load_queries(args, relations):
    ingest = kb.ingest_conceptnet(args.triples, relations=relations, language=args.language)
    for warning in ingest.warnings:
        logger.warning("%s", warning)
    return ingest


def _manifest(args, config: Config, scorer_spec: str, model_name: str, inputs: dict) -> RunManifest:
    # Output location and config path are not part of a run's identity.
    snapshot = {
        "command": args.command,
        "args": {
            key: value
            for key, value in sorted(vars(args).items())
            if key not in ("command", "config", "out") and value is not None
        },
        "file": config.snapshot(),
    }
    return RunManifest.collect(
        scorer=scorer_spec,
        model_name=model_name,
        seed=_seed(args, config),
        inputs=inputs,
        config=snapshot,
    )


def _cmd_probe(args, config: Config) -> int:
    relations = args.relations.split(",") if args.relations else kb.RELATIONS
    k_list = _k_list(args, config)
    scorer_spec = _scorer_spec(args, config)
    scorer = resolve_scorer(scorer_spec)
    templates = load_templates(args.templates or config.get("prompt-gen", "templates"))

    ingest = _load_queries(args, relations)
    queries = kb.group_queries(ingest.triples)
    if args.limit:
        queries = queries[: args.limit]
    if not queries:
        logger.error("no queries to probe")
        return 1

    run = run_probe(
        queries, templates, scorer, k_list, workers=_workers(args, config, "probe")
    )
    if not run.records:
        logger.error("all relations were skipped: %s", run.skipped_relations)
        return 1

    inputs = {"triples": args.triples}
    if args.templates:
        inputs["templates"] = args.templates
    manifest = _manifest(args, config, scorer_spec, scorer.capabilities().model_name, inputs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "predictions.jsonl", "w", encoding="utf-8", newline="\n") as handle:
        for record in run.records:
            handle.write(json.dumps(record.as_dict(), sort_keys=True, ensure_ascii=False))
            handle.write("\n")

    report = aggregate(run.results, k_list)
    json_path, csv_path = emit_probe_report(report, manifest, out, run.skipped_relations)

    plot = PlotData(manifest=manifest)
    top10 = [record.result.predictions.top(10) for record in run.records]
    plot.add_top_words("top_words_overall", top_word_frequencies(top10, args.top_words))
    for relation in sorted({r.query.relation for r in run.records}):
        lists = [
            record.result.predictions.top(10)
            for record in run.records
            if record.query.relation == relation
        ]
        plot.add_top_words(f"top_words_{relation}", top_word_frequencies(lists, args.top_words))
    plot_path = emit_plot_data(plot, out)

    if args.selection_analysis:
        comparison = selected_vs_average(queries, templates, scorer, k_list)
        payload = {
            "manifest": manifest.as_dict(),
            "n_queries": comparison["n_queries"],
            "skipped_relations": comparison["skipped_relations"],
            "selected": [
                {"k": k, "mean": m, "sem": s}
                for k, (m, s) in sorted(comparison["selected"].items())
            ],
            "average": [
                {"k": k, "mean": m, "sem": s}
                for k, (m, s) in sorted(comparison["average"].items())
            ],
        }
        write_json(payload, out / "selection_analysis.json")
        print(f"wrote {out / 'selection_analysis.json'}")

    print(f"probed {len(run.records)} queries over {len(report.per_relation)} relations")
    for k in k_list:
        micro, macro = report.micro[k], report.macro[k]
        print(
            f"hits@{k}: micro {100 * micro[0]:.2f}±{100 * micro[1]:.2f}"
            f"  macro {100 * macro[0]:.2f}±{100 * macro[1]:.2f}"
        )
    if run.skipped_relations:
        print(f"skipped relations: {', '.join(sorted(run.skipped_relations))}")
    print(f"wrote {json_path}, {csv_path}, {plot_path}")
    return 0


def _cmd_opposite(args, config: Config) -> int:
    k_list = _k_list(args, config)
    scorer_spec = _scorer_spec(args, config)
    scorer = resolve_scorer(scorer_spec)
    templates = load_templates(args.templates or config.get("prompt-gen", "templates"))

    def parse_pairs(text):
        return [tuple(p.split(":", 1)) for p in text.split(",") if p.strip()]

    pair_table = parse_pairs(args.pairs) if args.pairs else kb.OPPOSITE_PAIRS
    miss_pairs = parse_pairs(args.miss_pairs) if args.miss_pairs else ()

    relations = sorted({r for pair in pair_table for r in pair})
    ingest = _load_queries(args, relations)
    probes = kb.build_opposite_probes(ingest.triples, pair_table)
    if not probes:
        logger.error("no controlled opposite probes in the input")
        return 1

    run = run_opposite(probes, templates, scorer, k_list, miss_pairs=miss_pairs)
    summary = summarize_opposite(run, k_list)
    inputs = {"triples": args.triples}
    if args.templates:
        inputs["templates"] = args.templates
    manifest = _manifest(args, config, scorer_spec, scorer.capabilities().model_name, inputs)
    payload = {
        "manifest": manifest.as_dict(),
        "k_list": k_list,
        "n_probes": len(run.records),
        "skipped_pairs": run.skipped_pairs,
        **summary,
    }
    path = write_json(payload, Path(args.out) / "opposite_report.json")
    print(f"probed {len(run.records)} opposite probes; wrote {path}")
    return 0


def _cmd_freq(args, config: Config) -> int:
    if not args.pairs and not args.triples:
        logger.error("freq needs --pairs or --triples")
        return 2
    if args.pairs:
        pairs = read_pair_list(args.pairs)
        pairs_input = args.pairs
    else:
        ingest = kb.ingest_conceptnet(args.triples, language=args.language)
        pairs = [(t.subject, t.object) for t in ingest.triples]
        pairs_input = args.triples

    edges = (
        [int(part) for part in args.edges.split(",")]
        if args.edges
        else config.get_ints("corpus-freq", "edges", list(DEFAULT_EDGES))
    )
    corpus_dir = Path(args.corpus)
    files = sorted(corpus_dir.glob("*.txt"))
    if not files:
        logger.error("no .txt files under %s", corpus_dir)
        return 1

    phrases = sorted({p for pair in pairs for p in pair})
    matcher = compile_patterns(phrases, backend=args.backend)
    frequencies = scan_corpus(
        files, matcher, pairs, workers=_workers(args, config, "corpus-freq")
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tsv_path = out / "pair_frequencies.tsv"
    write_pair_frequencies(frequencies, tsv_path)

    manifest = _manifest(args, config, "n/a", "n/a", {"pairs": pairs_input})
    plot = PlotData(manifest=manifest)
    histogram = bucket_joint(frequencies, edges)
    labels = [bucket_label(i, edges) for i in range(len(edges))]
    plot.add_histogram("joint_frequency", labels, histogram)

    if args.results:
        outcomes = _load_outcomes(args.results)
        correlation = correlate_hits(frequencies, outcomes, mode=args.mode, joint_edges=edges)
        bar_labels = [bucket_label(i, edges) for i in range(len(edges))]
        plot.add_bar(
            f"hit_proportion_by_joint_{args.mode}",
            bar_labels,
            correlation.bar_proportions(),
            [total for _, total in correlation.bar],
        )
        plot.add_heatmap(
            f"hit_proportion_grid_{args.mode}",
            bar_labels,
            [bucket_label(i, correlation.subject_edges) for i in range(len(correlation.subject_edges))],
            correlation.heatmap_proportions(),
            [[total for _, total in row] for row in correlation.heatmap],
        )
        if correlation.residue:
            write_json(
                {"unjoinable": [list(pair) for pair in correlation.residue]},
                out / "correlation_residue.json",
            )
            print(f"{len(correlation.residue)} unjoinable probe results (see correlation_residue.json)")

    plot_path = emit_plot_data(plot, out, stem="freq_plot_data")
    print(f"scanned {len(files)} files, {len(frequencies)} pairs; wrote {tsv_path}, {plot_path}")
    return 0


def _load_outcomes(path: str) -> list[ProbeOutcome]:
    outcomes = []
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            topk = record["topk"]
            if len(topk) < 100:
                logger.warning(
                    "probe run stored only top-%d predictions; top100 mode needs 100",
                    len(topk),
                )
            top100 = {t.lower() for t in topk[:100]}
            answers = record["answers"]
            top_k_answers = {t.lower() for t in topk[: len(answers)]}
            for answer in answers:
                outcomes.append(
                    ProbeOutcome(
                        subject=record["subject"],
                        object=answer,
                        object_hit=answer.lower() in top100,
                        query_hit=record.get(
                            "hit_within_answer_count",
                            any(a.lower() in top_k_answers for a in answers),
                        ),
                    )
                )
    return outcomes


def _cmd_augment(args, config: Config) -> int:
    templates = load_templates(args.templates or config.get("prompt-gen", "templates"))
    with open(args.knowledge, encoding="utf-8") as handle:
        knowledge = json.load(handle)
    triples_by_id = {
        example_id: [kb.Triple(s, r, o) for s, r, o in rows]
        for example_id, rows in knowledge.items()
    }

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    applied, skipped = 0, 0
    if args.style == "squad":
        examples = qa.read_squad(args.dataset)
        augmented = {e.id: None for e in examples}
        for example in examples:
            triples = triples_by_id.get(example.id, [])
            if triples:
                pair = qa.integrate_knowledge(example, triples, templates)
                augmented[example.id] = pair
                applied += len(pair.applied)
                skipped += len(pair.skipped)
        payload = _rewrite_squad(args.dataset, augmented)
    else:
        examples = qa.read_record(args.dataset)
        augmented = {e.id: None for e in examples}
        for example in examples:
            triples = triples_by_id.get(example.id, [])
            if triples:
                pair = qa.integrate_knowledge(example, triples, templates)
                augmented[example.id] = pair
                applied += len(pair.applied)
                skipped += len(pair.skipped)
        payload = _rewrite_record(args.dataset, augmented)

    dataset_path = out / f"augmented_{Path(args.dataset).name}"
    write_json(payload, dataset_path)
    summary_path = write_json(
        {
            "dataset": str(args.dataset),
            "examples": len(examples),
            "insertions": applied,
            "skipped_triples": skipped,
        },
        out / "augment_report.json",
    )
    print(f"augmented {applied} site(s), skipped {skipped} triple(s); wrote {dataset_path}")
    print(f"wrote {summary_path}")
    return 0


def _rewrite_squad(path: str, augmented: dict) -> dict:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    for article in payload["data"]:
        for paragraph in article["paragraphs"]:
            context_pair = None
            for qa_item in paragraph["qas"]:
                pair = augmented.get(str(qa_item["id"]))
                if pair is None:
                    continue
                qa_item["question"] = pair.question
                context_pair = pair
                shift_points = [
                    (ins.start, len(ins.inserted))
                    for ins in pair.applied
                    if ins.site == "context"
                ]
                for answer_key in ("answers", "plausible_answers"):
                    for answer in qa_item.get(answer_key, []):
                        start = answer.get("answer_start")
                        if start is None:
                            continue
                        answer["answer_start"] = start + sum(
                            length for point, length in shift_points if point <= start
                        )
            if context_pair is not None:
                paragraph["context"] = context_pair.context
    return payload


def _rewrite_record(path: str, augmented: dict) -> dict:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    for item in payload["data"]:
        new_context = None
        for qa_item in item.get("qas", []):
            pair = augmented.get(str(qa_item["id"]))
            if pair is not None:
                qa_item["query"] = pair.question
                new_context = pair.context
        if new_context is not None:
            # Highlights are appended, so entity offsets stay valid.
            item["passage"]["text"] = new_context
    return payload


def _cmd_score_rc(args, config: Config) -> int:
    examples = qa.read_squad(args.dataset) if args.style == "squad" else qa.read_record(args.dataset)
    with open(args.predictions, encoding="utf-8") as handle:
        predictions = json.load(handle)
    if args.labels:
        with open(args.labels, encoding="utf-8") as handle:
            qa.attach_type_labels(examples, json.load(handle))

    edges = (
        [float(part) for part in args.similarity_edges.split(",")]
        if args.similarity_edges
        else config.get_floats("qa-augment", "similarity_edges", list(qa.SIMILARITY_EDGES))
    )

    stats = qa.DocumentFrequencies.from_examples(examples)
    rows, missing = [], 0
    per_label: dict[str, list[tuple[float, float]]] = {}
    for example in examples:
        if example.id not in predictions:
            missing += 1
            continue
        prediction = predictions[example.id]
        em_score = qa.em(prediction, example.gold_answers)
        f1_score = qa.f1(prediction, example.gold_answers)
        similarity = qa.tfidf_cosine(example.question, example.context, stats)
        rows.append((similarity, float(em_score), f1_score))
        for label in example.type_labels:
            per_label.setdefault(label, []).append((float(em_score), f1_score))

    if not rows:
        logger.error("no predictions matched dataset ids")
        return 1

    n = len(rows)
    table = qa.similarity_performance_table(rows, edges)
    payload = {
        "dataset": str(args.dataset),
        "n_scored": n,
        "n_missing_predictions": missing,
        "em": sum(r[1] for r in rows) / n,
        "f1": sum(r[2] for r in rows) / n,
        "similarity_buckets": [
            {
                "lower": row.lower,
                "upper": row.upper,
                "count": row.count,
                "mean_em": row.mean_em,
                "mean_f1": row.mean_f1,
            }
            for row in table
        ],
        "by_type_label": {
            label: {
                "n": len(scores),
                "em": sum(e for e, _ in scores) / len(scores),
                "f1": sum(f for _, f in scores) / len(scores),
            }
            for label, scores in sorted(per_label.items())
        },
    }
    path = write_json(payload, Path(args.out) / "rc_metrics.json")
    print(f"scored {n} examples (EM {payload['em']:.4f}, F1 {payload['f1']:.4f}); wrote {path}")
    return 0


def _cmd_report(args, config: Config) -> int:
    from .kb import ProbeQuery
    from .metrics import score_query
    from .scorers import RankedPredictions

    k_list = _k_list(args, config)
    results = []
    with open(args.raw, encoding="utf-8") as handle:
        for line in handle:
            if not line.strip():
                continue
            record = json.loads(line)
            query = ProbeQuery(
                subject=record["subject"],
                relation=record["relation"],
                answers=frozenset(record["answers"]),
            )
            # Stored ranks are what matters; reconstruct monotone logprobs.
            predictions = RankedPredictions(
                prompt=record["prompt"],
                entries=tuple((t, -float(i)) for i, t in enumerate(record["topk"])),
            )
            results.append(score_query(query, predictions, k_list))
    if not results:
        logger.error("no records in %s", args.raw)
        return 1
    report = aggregate(results, k_list)
    manifest = _manifest(args, config, "replay", "replay", {"raw": args.raw})
    json_path, csv_path = emit_probe_report(report, manifest, args.out, stem="probe_report")
    print(f"re-rendered {len(results)} records; wrote {json_path}, {csv_path}")
    return 0


_COMMANDS = {
    "probe": _cmd_probe,
    "opposite": _cmd_opposite,
    "freq": _cmd_freq,
    "augment": _cmd_augment,
    "score-rc": _cmd_score_rc,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s", level=logging.INFO)
    args = build_parser().parse_args(argv)
    config = Config.load(args.config)
    return _COMMANDS[args.command](args, config)


if __name__ == "__main__":
    sys.exit(main())
