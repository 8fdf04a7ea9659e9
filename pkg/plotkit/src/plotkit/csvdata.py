"""Reader for the experiment CSVs (comment header block + typed columns).

Plotting never recomputes anything: the CSV files are the single source of
numerical truth.
"""

from __future__ import annotations

from dataclasses import dataclass


class CsvFormatError(ValueError):
    """The file does not look like an experiment CSV or lacks needed columns."""


@dataclass
class ResultTable:
    path: str
    config: dict
    columns: list
    rows: list  # list of dicts, numeric fields parsed to float/int

    def require_columns(self, names) -> None:
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise CsvFormatError(f"{self.path}: missing columns {missing} "
                                 f"(have {self.columns})")

    def select(self, **filters) -> list:
        out = []
        for row in self.rows:
            if all(str(row.get(k)) == str(v) for k, v in filters.items()):
                out.append(row)
        return out


def _coerce(text: str):
    text = text.strip()
    if text == "":
        return ""
    try:
        val = float(text)
    except ValueError:
        return text
    if val.is_integer() and "." not in text and "e" not in text.lower():
        return int(val)
    return val


def read_table(path: str) -> ResultTable:
    config = {}
    columns = None
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, val = body.partition("=")
                    config[key.strip()] = val.strip()
                continue
            cells = line.split(",")
            if columns is None:
                columns = cells
                continue
            if len(cells) != len(columns):
                raise CsvFormatError(f"{path}: row has {len(cells)} cells, "
                                     f"expected {len(columns)}")
            rows.append({c: _coerce(v) for c, v in zip(columns, cells)})
    if columns is None:
        raise CsvFormatError(f"{path}: no column header found")
    return ResultTable(path=path, config=config, columns=columns, rows=rows)
