import json

import pytest

from clozeprobe.kb import ProbeQuery
from clozeprobe.metrics import aggregate, score_query
from clozeprobe.report import (
    PlotData,
    RunManifest,
    emit_plot_data,
    emit_probe_report,
    pct,
    probe_report_payload,
)
from clozeprobe.scorers import RankedPredictions


def _manifest(tmp_path):
    source = tmp_path / "input.tsv"
    source.write_text("a\tIsA\tb\n")
    return RunManifest.collect(
        scorer="builtin:fixture",
        model_name="builtin:fixture",
        seed=0,
        inputs={"triples": source},
        config={"command": "probe"},
    )


def _report(values_by_relation, k=1):
    results = []
    for relation, values in values_by_relation.items():
        for index, value in enumerate(values):
            query = ProbeQuery(f"s{index}", relation, frozenset({"a"}))
            tokens = ("a",) if value else ("x",)
            predictions = RankedPredictions("p", tuple((t, -1.0) for t in tokens))
            results.append(score_query(query, predictions, [k]))
    return aggregate(results, [k])


class TestFormatting:
    def test_percent_two_decimals(self):
        assert pct(0.073863) == "7.39"
        assert pct(1.0) == "100.00"
        assert pct(0.0) == "0.00"

    def test_payload_uses_percent_strings(self, tmp_path):
        report = _report({"A": [1, 0, 1, 0]})
        payload = probe_report_payload(report, _manifest(tmp_path))
        assert payload["micro"][0]["mean_pct"] == "50.00"
        assert payload["per_relation"]["A"]["n"] == 4


class TestEmission:
    def test_json_and_csv_written(self, tmp_path):
        report = _report({"A": [1, 0], "B": [1]})
        json_path, csv_path = emit_probe_report(report, _manifest(tmp_path), tmp_path)
        payload = json.loads(json_path.read_text())
        assert payload["macro"][0]["mean"] == pytest.approx(0.75)
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "relation,n,hits@1,sem@1"
        assert lines[1].startswith("A,2,")
        assert lines[-1].startswith("macro,")

    def test_round_trip_within_precision(self, tmp_path):
        report = _report({"A": [1, 0, 1]})
        json_path, _ = emit_probe_report(report, _manifest(tmp_path), tmp_path)
        payload = json.loads(json_path.read_text())
        assert payload["micro"][0]["mean"] == report.micro[1][0]
        assert float(payload["micro"][0]["mean_pct"]) == pytest.approx(
            100 * report.micro[1][0], abs=0.005
        )

    def test_same_inputs_identical_bytes(self, tmp_path):
        report = _report({"A": [1, 0], "B": [1]})
        manifest = _manifest(tmp_path)
        first = tmp_path / "first"
        second = tmp_path / "second"
        a_json, a_csv = emit_probe_report(report, manifest, first)
        b_json, b_csv = emit_probe_report(report, manifest, second)
        assert a_json.read_bytes() == b_json.read_bytes()
        assert a_csv.read_bytes() == b_csv.read_bytes()

    def test_empty_report_rejected(self, tmp_path):
        report = _report({"A": [1]})
        report.per_relation.clear()
        with pytest.raises(ValueError):
            emit_probe_report(report, _manifest(tmp_path), tmp_path)


class TestPlotData:
    def test_sections_serialize(self, tmp_path):
        plot = PlotData(manifest=_manifest(tmp_path))
        plot.add_top_words("top", [("wood", 0.73), ("metal", 0.5)])
        plot.add_histogram("hist", ["0", "1-9"], [3, 4])
        plot.add_heatmap("grid", ["r0"], ["c0", "c1"], [[0.5, None]], [[2, 0]])
        path = emit_plot_data(plot, tmp_path)
        payload = json.loads(path.read_text())
        assert payload["sections"]["top"]["rows"][0] == {"token": "wood", "ratio": 0.73}
        assert payload["sections"]["hist"]["total"] == 7
        # Empty cells serialize as explicit nulls.
        assert payload["sections"]["grid"]["cells"][0][1] is None

    def test_histogram_checksum_field(self, tmp_path):
        plot = PlotData(manifest=_manifest(tmp_path))
        plot.add_histogram("hist", ["a", "b", "c"], [1, 2, 3])
        path = emit_plot_data(plot, tmp_path)
        payload = json.loads(path.read_text())
        section = payload["sections"]["hist"]
        assert section["total"] == sum(section["counts"])
