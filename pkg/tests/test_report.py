import json
import math

import pytest

from martlab.report import CheckRecord, ReportDocument, dumps, loads, write_csv, write_report


def doc_with(*verdicts):
    d = ReportDocument(config={"seed": 42, "mode": "additive"})
    for i, v in enumerate(verdicts):
        d.add(CheckRecord(f"c{i}", "Theorem 2 (a)", v, 0.1 * i, {"b": 1.0, "a": [1, 2.5]}))
    return d


def test_empty_report_passes(tmp_path):
    path = tmp_path / "r.json"
    write_report(ReportDocument(), "json", path)
    data = json.loads(path.read_text())
    assert data["status"] == "pass" and data["checks"] == []
    assert list(data) == ["version", "config", "checks", "status"]


def test_byte_identical(tmp_path):
    write_report(doc_with("pass", "fail"), "json", tmp_path / "a.json")
    write_report(doc_with("pass", "fail"), "json", tmp_path / "b.json")
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


def test_failing_record_fails_document():
    assert doc_with("pass", "fail").status == "fail"
    assert doc_with("pass").status == "pass"


def test_round_trip():
    d = doc_with("pass", "fail")
    back = loads(dumps(d))
    assert back.to_dict() == d.to_dict()


def test_check_key_order_and_optional_fields():
    d = ReportDocument()
    d.add(CheckRecord("x", "Lemma 1", "pass"))
    text = dumps(d)
    assert '{"id": "x", "anchor": "Lemma 1", "verdict": "pass"}' in text


def test_number_rendering():
    d = ReportDocument(config={"v": [0.1, 2.0, math.inf, -math.inf, math.nan, 1e300, 3]})
    text = dumps(d)
    assert '[0.10000000000000001, 2.0, "inf", "-inf", "nan", 1.0000000000000001e+300, 3]' in text


def test_verdict_validated():
    with pytest.raises(ValueError):
        CheckRecord("x", "Lemma 1", "maybe")


def test_csv_outputs(tmp_path):
    write_report(doc_with("pass"), "csv", tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "id,anchor,verdict,max_abs_residual"
    write_csv(tmp_path / "t.csv", ["t", "c"], [(0.5, 1 / 3)])
    assert (tmp_path / "t.csv").read_text() == "t,c\n0.5,0.33333333333333331\n"


def test_io_errors_name_path(tmp_path):
    with pytest.raises(OSError) as info:
        write_report(ReportDocument(), "json", tmp_path / "missing" / "r.json")
    assert "missing" in str(info.value)
    with pytest.raises(ValueError):
        write_report(ReportDocument(), "yaml", tmp_path / "r.yaml")
