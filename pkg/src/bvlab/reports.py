"""Structured experiment output with deterministic CSV and JSON serialization."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any


def fmt(v: Any) -> str:
    """Stable text for a CSV cell: repr for floats so reruns are byte-identical."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    if hasattr(v, "item"):
        return fmt(v.item())
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, complex):
        return [v.real, v.imag]
    if hasattr(v, "item"):
        return _jsonable(v.item())
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


@dataclass
class ExperimentReport:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def add(self, **row) -> None:
        self.rows.append(row)

    def flag(self, msg: str) -> None:
        self.flags.append(msg)

    @property
    def flagged(self) -> bool:
        return bool(self.flags)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([fmt(r.get(c, "")) for c in self.columns])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return _jsonable({"name": self.name, "columns": self.columns, "rows": self.rows,
                          "meta": self.meta, "flags": self.flags, "notes": self.notes})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)
