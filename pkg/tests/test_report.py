"""Scenario reports: CSV, JSON and table rendering."""

from fractions import Fraction as F

import pytest

from core.report import ScenarioReport, digest_inputs, read_csv_rows


def sample():
    rep = ScenarioReport("demo", "slash", "ab" * 32, columns=("operator_id", "psi", "note"),
                         exact=("psi",))
    rep.add(operator_id="v1", psi=F(14, 15), note='says "hi", twice')
    rep.add(operator_id="v2", psi=0.25, note=None)
    return rep


class TestCsv:
    def test_exact_twin_and_quoting(self):
        text = sample().to_csv()
        assert text.splitlines()[0] == "operator_id,psi,psi_exact,note"
        assert "\r\n" in text
        rows = read_csv_rows(text)
        assert rows[0]["psi_exact"] == "14/15"
        assert float(rows[0]["psi"]) == pytest.approx(14 / 15)
        assert rows[0]["note"] == 'says "hi", twice'
        assert rows[1]["psi_exact"] == "0.25"
        assert rows[1]["note"] == ""

    def test_header_lines_are_comments(self):
        rep = sample()
        rep.header.append("seed=1")
        text = rep.to_csv()
        assert text.startswith("# seed=1\r\n")
        assert len(read_csv_rows(text)) == 2

    def test_unknown_column(self):
        with pytest.raises(KeyError):
            sample().add(operator_id="v3", phi=1)


class TestJson:
    def test_round_trip(self):
        rep = sample()
        rep.passed = True
        back = ScenarioReport.from_json(rep.to_json())
        assert back.rows[0]["psi"] == F(14, 15)
        assert back.rows[1]["psi"] == 0.25
        assert back.passed is True
        assert back.columns == rep.columns


class TestTable:
    def test_rounds_for_reading(self):
        out = sample().render("table")
        assert "0.933" in out
        assert "-" in out

    def test_unknown_format(self):
        with pytest.raises(KeyError):
            sample().render("xml")


def test_digest_depends_on_content(tmp_path):
    p = tmp_path / "g.json"
    p.write_text("{}")
    first = digest_inputs([p], mechanism="max")
    assert first == digest_inputs([p], mechanism="max")
    assert first != digest_inputs([p], mechanism="marginal")
    p.write_text("{ }")
    assert first != digest_inputs([p], mechanism="max")
