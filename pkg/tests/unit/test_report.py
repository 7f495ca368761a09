"""
Unit tests for check records and verification report documents
"""
import json

import pytest

from src.core.checks import (
    FAIL,
    INFO,
    PASS,
    REFERENCES,
    CheckRecord,
    all_passed,
    expect,
    gate,
    info,
    reference_for,
)
from src.core.errors import SchemaError
from src.verify.report import (
    REPORT_SCHEMA,
    Report,
    check_report_document,
    instance_summary,
    payload_of,
    read_report,
    write_report,
)


def make_report(records=None):
    if records is None:
        records = [
            gate("kernel.primal", 1e-14, 1e-10, 1, "trace"),
            info("pairing_norm", 0.8, 0, "complex-pair"),
            expect("euler", True, None, "derham", value=1),
        ]
    report = Report(command="verify",
                    instance=instance_summary("demo", "abc", {"domain": "cube", "interior": {"0": {}}}),
                    config={"seed": 3, "samples": 10})
    report.records = records
    report.cohomology = {"trace": [1, 0, 1]}
    report.timings = {"traces": 0.25}
    return report


class TestCheckRecords:
    def test_gate(self):
        assert gate("x", 1e-12, 1e-10).status == PASS
        assert gate("x", 1e-8, 1e-10).status == FAIL
        assert gate("x", float("nan"), 1e-10).status == FAIL

    def test_info_never_fails(self):
        record = info("note", 5.0)
        assert record.status == INFO
        assert record.passed
        assert not record.gating

    def test_non_finite_values_serialize_as_strings(self):
        record = CheckRecord("x", FAIL, float("inf"), None, 0, "t", {"worst": float("-inf"), "mean": float("nan")})
        out = record.to_dict()
        assert out["value"] == "inf"
        assert out["detail"] == {"mean": "nan", "worst": "-inf"}

    def test_records_without_level_sort_first(self):
        records = [info("b", level=2), info("a", level=None), info("c", level=0)]
        assert [r.name for r in sorted(records, key=CheckRecord.sort_key)] == ["a", "c", "b"]

    def test_all_passed(self):
        assert all_passed([info("a"), expect("b", True)])
        assert not all_passed([expect("b", False)])


class TestReport:
    def test_verdict_and_counts(self):
        report = make_report()
        assert report.verdict == PASS
        assert report.counts == {PASS: 2, FAIL: 0, INFO: 1}

    def test_single_failure_fails_report(self):
        report = make_report([expect("x", False, 0), info("y")])
        assert report.verdict == FAIL
        assert report.summary_line().startswith("FAIL (0 pass, 1 fail, 1 info)")

    def test_payload_excludes_timing(self):
        payload = make_report().payload()
        assert payload["schema"] == REPORT_SCHEMA
        assert "timings" not in payload
        assert all("seconds" not in r for r in payload["records"])
        assert payload["seed"] == 3

    def test_document_carries_timing(self):
        document = make_report().to_document()
        assert document["timings"]["blocks"] == {"traces": 0.25}
        assert payload_of(document) == make_report().payload()

    def test_instance_summary_drops_dof_lists(self):
        summary = instance_summary("demo", None, {"domain": "cube", "interior": {"0": {}}})
        assert summary["meta"] == {"domain": "cube"}
        assert summary["checksum"] is None


class TestReportFiles:
    def test_write_then_read(self, tmp_path):
        path = str(tmp_path / "out" / "report.json")
        written = write_report(make_report(), path)
        assert read_report(path) == written

    def test_missing_field(self):
        document = make_report().to_document()
        del document["verdict"]
        with pytest.raises(SchemaError):
            check_report_document(document)

    def test_bad_record_status(self):
        document = make_report().to_document()
        document["records"][0]["status"] = "MAYBE"
        with pytest.raises(SchemaError):
            check_report_document(document)

    def test_wrong_schema_tag(self):
        document = make_report().to_document()
        document["schema"] = "trace-report/v0"
        with pytest.raises(SchemaError):
            check_report_document(document)

    def test_invalid_json_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{")
        with pytest.raises(SchemaError):
            read_report(str(path))

    def test_file_is_sorted_and_indented(self, tmp_path):
        path = tmp_path / "report.json"
        write_report(make_report(), str(path))
        text = path.read_text()
        assert text.startswith('{\n  "cohomology"')
        assert json.loads(text)["verdict"] == PASS


class TestStatementReferences:
    def test_exact_name_wins_over_prefix(self):
        assert gate("commuting.ii", 0.0, 1e-12).paper_ref == REFERENCES["commuting.ii"]
        assert REFERENCES["commuting.ii"] != REFERENCES["commuting"]

    def test_prefix_lookup(self):
        assert info("kernel_excess.primal", 3.0).paper_ref == REFERENCES["kernel_excess"]
        assert expect("regular.dual.decomposition", True).paper_ref == REFERENCES["regular"]

    def test_explicit_reference_is_kept(self):
        record = gate("x", 0.0, 1.0, ref="custom statement")
        assert record.paper_ref == "custom statement"
        assert "ref" not in record.detail

    def test_unknown_name_falls_back_to_name(self):
        assert reference_for("nothing.known") == "nothing.known"

    def test_serialized_records_carry_reference(self):
        document = make_report().to_document()
        assert all(r["paper_ref"] for r in document["records"])

    def test_missing_reference_is_a_schema_error(self):
        document = make_report().to_document()
        del document["records"][0]["paper_ref"]
        with pytest.raises(SchemaError):
            check_report_document(document)

    def test_empty_reference_is_a_schema_error(self):
        document = make_report().to_document()
        document["records"][1]["paper_ref"] = ""
        with pytest.raises(SchemaError):
            check_report_document(document)
