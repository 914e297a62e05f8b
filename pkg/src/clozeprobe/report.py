"""Stable report serialization: JSON and CSV with fixed formatting.

Percentages are rendered to two decimals the way the result tables print
them, with full-precision raw values kept alongside. Output bytes are a
pure function of the inputs: keys are sorted, floats use repr round-trip,
and the manifest carries no timestamps.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import __version__
from .metrics import AggregateReport

MACRO_SEM_NOTE = (
    "macro sem is the sample standard deviation of per-relation means divided "
    "by sqrt(number of relations); the source tables may use a pooled variant"
)


def pct(value: float) -> str:
    """0.073863 -> '7.39' (percent, two decimals)."""
    return f"{100 * value:.2f}"


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run; equal manifests, equal bytes."""

    tool_version: str
    scorer: str
    model_name: str
    seed: int
    input_digests: Mapping[str, str]
    config: Mapping[str, Any]

    @classmethod
    def collect(
        cls,
        scorer: str,
        model_name: str,
        seed: int,
        inputs: Mapping[str, str | Path],
        config: Mapping[str, Any],
    ) -> "RunManifest":
        return cls(
            tool_version=__version__,
            scorer=scorer,
            model_name=model_name,
            seed=seed,
            input_digests={name: sha256_file(path) for name, path in sorted(inputs.items())},
            config=dict(config),
        )

    def as_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "scorer": self.scorer,
            "model_name": self.model_name,
            "seed": self.seed,
            "input_digests": dict(self.input_digests),
            "config": dict(self.config),
        }


def write_json(payload: Any, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True, ensure_ascii=False)
        handle.write("\n")
    return path


def _stat_block(mean: float, sem: float) -> dict:
    return {"mean": mean, "sem": sem, "mean_pct": pct(mean), "sem_pct": pct(sem)}


def probe_report_payload(
    report: AggregateReport, manifest: RunManifest, skipped: Mapping[str, str] | None = None
) -> dict:
    if not report.per_relation:
        raise ValueError("refusing to emit a report with no relations")
    return {
        "manifest": manifest.as_dict(),
        "k_list": list(report.k_list),
        "micro": [
            {"k": k, **_stat_block(*report.micro[k])} for k in report.k_list
        ],
        "macro": [
            {"k": k, **_stat_block(*report.macro[k])} for k in report.k_list
        ],
        "per_relation": {
            relation: {
                "n": report.relation_counts[relation],
                "hits": [
                    {"k": k, **_stat_block(*stats[k])} for k in report.k_list
                ],
            }
            for relation, stats in sorted(report.per_relation.items())
        },
        "skipped_relations": dict(skipped or {}),
        "notes": {"macro_sem": MACRO_SEM_NOTE},
    }


def emit_probe_report(
    report: AggregateReport,
    manifest: RunManifest,
    out_dir: str | Path,
    skipped: Mapping[str, str] | None = None,
    stem: str = "probe_report",
) -> tuple[Path, Path]:
    """Write <stem>.json and <stem>.csv; returns both paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = probe_report_payload(report, manifest, skipped)
    json_path = write_json(payload, out_dir / f"{stem}.json")

    csv_path = out_dir / f"{stem}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        header = ["relation", "n"]
        for k in report.k_list:
            header += [f"hits@{k}", f"sem@{k}"]
        writer.writerow(header)
        for relation in sorted(report.per_relation):
            row = [relation, report.relation_counts[relation]]
            for k in report.k_list:
                mean, sem = report.per_relation[relation][k]
                row += [pct(mean), pct(sem)]
            writer.writerow(row)
        for name, stats in (("micro", report.micro), ("macro", report.macro)):
            row = [name, sum(report.relation_counts.values())]
            for k in report.k_list:
                mean, sem = stats[k]
                row += [pct(mean), pct(sem)]
            writer.writerow(row)
    return json_path, csv_path


@dataclass
class PlotData:
    """Plot-ready series: histograms, heatmaps, top-word tables."""

    manifest: RunManifest
    sections: dict = field(default_factory=dict)

    def add_top_words(self, name: str, table: Sequence[tuple[str, float]]) -> None:
        self.sections[name] = {
            "kind": "top_words",
            "rows": [{"token": token, "ratio": ratio} for token, ratio in table],
        }

    def add_histogram(
        self, name: str, labels: Sequence[str], counts: Sequence[int]
    ) -> None:
        self.sections[name] = {
            "kind": "histogram",
            "labels": list(labels),
            "counts": list(counts),
            "total": sum(counts),
        }

    def add_bar(
        self, name: str, labels: Sequence[str], proportions: Sequence[float | None],
        totals: Sequence[int],
    ) -> None:
        self.sections[name] = {
            "kind": "bar",
            "labels": list(labels),
            "proportions": list(proportions),
            "totals": list(totals),
        }

    def add_heatmap(
        self,
        name: str,
        row_labels: Sequence[str],
        column_labels: Sequence[str],
        cells: Sequence[Sequence[float | None]],
        totals: Sequence[Sequence[int]],
    ) -> None:
        # Empty cells are serialized as nulls, never dropped.
        self.sections[name] = {
            "kind": "heatmap",
            "row_labels": list(row_labels),
            "column_labels": list(column_labels),
            "cells": [list(row) for row in cells],
            "totals": [list(row) for row in totals],
        }


def emit_plot_data(plot: PlotData, out_dir: str | Path, stem: str = "plot_data") -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"manifest": plot.manifest.as_dict(), "sections": plot.sections}
    return write_json(payload, out_dir / f"{stem}.json")
