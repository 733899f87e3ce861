"""
Scenario reports: what every CLI command hands back.

A ScenarioReport is a list of rows (dicts) under a fixed column order, plus
the id of the scenario, the command that produced it and a sha256 digest of
its inputs. It renders three ways:

    CSV     RFC-4180 (CRLF, quoted where needed). Columns declared exact get
            a twin `<name>_exact` holding "p/q" for rationals
    JSON    lossless: rationals as {"num", "den"}, floats as floats
    table   fixed-width text for a terminal, rounded for reading

Usage:
    rep = ScenarioReport("overlap", "slash", digest_inputs(paths, mechanism="max"),
                         columns=("operator_id", "psi"), exact=("psi",))
    rep.add(operator_id="v1", psi=Fraction(14, 15))
    print(rep.to_csv())
"""

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from pathlib import Path
from typing import Optional

from core.numeric import exact_str

DISPLAY_DIGITS = 3


def digest_inputs(paths=(), **params) -> str:
    """sha256 over the input files' bytes and the command parameters, in a fixed order."""
    h = hashlib.sha256()
    for p in paths:
        h.update(str(Path(p).name).encode("utf-8"))
        h.update(b"\0")
        h.update(Path(p).read_bytes())
        h.update(b"\0")
    h.update(json.dumps(params, sort_keys=True, default=str).encode("utf-8"))
    return h.hexdigest()


def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Rational) and not isinstance(value, int):
        return repr(float(value))
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def _table_cell(value, digits: int) -> str:
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, (float, Fraction)) and not isinstance(value, int):
        v = float(value)
        if v != 0 and abs(v) < 10 ** (-digits):
            return f"{v:.3e}"
        return f"{v:.{digits}f}"
    return str(value)


def _encode(value):
    if isinstance(value, Rational) and not isinstance(value, (int, bool)):
        f = Fraction(value)
        return {"num": f.numerator, "den": f.denominator}
    return value


def _decode(value):
    if isinstance(value, dict) and set(value) == {"num", "den"}:
        return Fraction(value["num"], value["den"])
    return value


@dataclass
class ScenarioReport:
    scenario: str
    command: str
    inputs_digest: str
    columns: tuple
    exact: tuple = ()                # columns that also get a p/q twin in CSV
    rows: list = field(default_factory=list)
    passed: Optional[bool] = None    # None when the command has nothing to check against
    header: list = field(default_factory=list)     # comment lines before the CSV body

    def add(self, **row) -> None:
        unknown = set(row) - set(self.columns)
        if unknown:
            raise KeyError(f"Unknown column '{sorted(unknown)[0]}'. Available: {list(self.columns)}")
        self.rows.append(row)

    @property
    def csv_columns(self) -> list[str]:
        out = []
        for c in self.columns:
            out.append(c)
            if c in self.exact:
                out.append(f"{c}_exact")
        return out

    # ── Renderers ──

    def to_csv(self) -> str:
        buf = io.StringIO()
        for line in self.header:
            buf.write(f"# {line}\r\n")
        writer = csv.writer(buf, lineterminator="\r\n")
        writer.writerow(self.csv_columns)
        for row in self.rows:
            cells = []
            for c in self.columns:
                v = row.get(c)
                cells.append(_csv_cell(v))
                if c in self.exact:
                    cells.append("" if v is None else exact_str(v))
            writer.writerow(cells)
        return buf.getvalue()

    def to_table(self, digits: int = DISPLAY_DIGITS) -> str:
        grid = [[str(c) for c in self.columns]]
        for row in self.rows:
            grid.append([_table_cell(row.get(c), digits) for c in self.columns])
        widths = [max(len(r[i]) for r in grid) for i in range(len(self.columns))]
        lines = [f"{self.command}: {self.scenario}  [{self.inputs_digest[:12]}]"]
        for line in self.header:
            lines.append(f"  {line}")
        for i, r in enumerate(grid):
            lines.append("  " + "  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
            if i == 0:
                lines.append("  " + "  ".join("─" * w for w in widths))
        if self.passed is not None:
            lines.append(f"  {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "command": self.command,
            "inputs_digest": self.inputs_digest,
            "columns": list(self.columns),
            "exact": list(self.exact),
            "header": list(self.header),
            "passed": self.passed,
            "rows": [{c: _encode(r.get(c)) for c in self.columns} for r in self.rows],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False)

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioReport":
        rows = [{c: _decode(v) for c, v in r.items()} for r in doc.get("rows", [])]
        return cls(doc["scenario"], doc["command"], doc["inputs_digest"], tuple(doc["columns"]),
                   tuple(doc.get("exact", ())), rows, doc.get("passed"), list(doc.get("header", [])))

    @classmethod
    def from_json(cls, text: str) -> "ScenarioReport":
        return cls.from_dict(json.loads(text))

    def render(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "table":
            return self.to_table() + "\n"
        if fmt == "json":
            return self.to_json() + "\n"
        raise KeyError(f"Unknown format '{fmt}'. Available: ['csv', 'table', 'json']")


def read_csv_rows(text: str) -> list[dict]:
    """Parse a report's CSV back into string dicts, skipping comment lines."""
    body = "".join(line for line in io.StringIO(text) if not line.startswith("#"))
    return list(csv.DictReader(io.StringIO(body)))
