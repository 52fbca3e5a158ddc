"""Result tables (CSV with a commented metadata header) and plot definitions."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence

__all__ = ["ResultTable", "PlotSpec", "PLOT_SCHEMA_VERSION", "read_csv", "write_plots"]

PLOT_SCHEMA_VERSION = 1


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        # repr round-trips exactly and is platform independent
        return repr(value)
    return str(value)


@dataclass
class ResultTable:
    """Rows of records with a fixed column schema.

    ``metadata`` is written as ``# key: value`` lines ahead of the CSV
    header, in insertion order.  No wall-clock data is recorded so reruns
    with the same configuration are byte-identical.
    """

    columns: Sequence[str]
    rows: List[Dict[str, Any]] = field(default_factory=list)
    metadata: Dict[str, str] = field(default_factory=dict)

    def add(self, **row):
        missing = set(self.columns) - set(row)
        extra = set(row) - set(self.columns)
        if missing or extra:
            raise ValueError(f"row does not match schema (missing {sorted(missing)}, "
                             f"extra {sorted(extra)})")
        self.rows.append(row)

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]

    def where(self, **match) -> List[Dict[str, Any]]:
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for key, val in self.metadata.items():
            for i, line in enumerate(str(val).splitlines() or [""]):
                buf.write(f"# {key}: {line}\n" if i == 0 else f"#   {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for r in self.rows:
            writer.writerow([_cell(r[c]) for c in self.columns])
        return buf.getvalue()

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())
        return path


def read_csv(path):
    """Read a table written by :meth:`ResultTable.write` as (metadata, rows of str).

    Continued metadata lines are joined back with newlines, so the embedded
    ``config`` entry can be fed straight to :func:`gramterp.config.parse_config`.
    """
    meta, body, key = {}, [], None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("#   ") and key is not None:
                meta[key] += "\n" + line[4:]
            elif line.startswith("# ") and ": " in line:
                key, val = line[2:].split(": ", 1)
                meta[key] = val
            elif not line.startswith("#"):
                body.append(line)
    return meta, list(csv.DictReader(body))


@dataclass
class PlotSpec:
    """Declarative plot: which CSV columns go on which axis, split into series.

    ``series_by`` lists the columns whose distinct values define one
    line each; ``filters`` restricts rows before splitting.
    """

    title: str
    x: str
    y: Sequence[str]
    x_label: str = ""
    y_label: str = ""
    x_scale: str = "linear"
    y_scale: str = "linear"
    series_by: Sequence[str] = ()
    filters: Dict[str, Any] = field(default_factory=dict)
    kind: str = "line"

    def to_dict(self, csv_name: str) -> dict:
        return {
            "schema_version": PLOT_SCHEMA_VERSION,
            "data": csv_name,
            "title": self.title,
            "kind": self.kind,
            "x": {"column": self.x, "label": self.x_label or self.x, "scale": self.x_scale},
            "y": {"columns": list(self.y), "label": self.y_label or ", ".join(self.y),
                  "scale": self.y_scale},
            "series_by": list(self.series_by),
            "filters": dict(self.filters),
        }


def write_plots(plots: Sequence[PlotSpec], csv_path) -> Path:
    """Write ``<csv stem>.plot.json`` next to the CSV file."""
    csv_path = Path(csv_path)
    out = csv_path.with_suffix(".plot.json")
    doc = {"schema_version": PLOT_SCHEMA_VERSION,
           "plots": [p.to_dict(csv_path.name) for p in plots]}
    out.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out
