"""Experiment reports: row collection, CSV emission and aggregation.

emit_report writes three files for a report at <path>:
- <path>: one row per (method, M, N, trial) with header
  method,M,N,trial,nmse,wall_time_s
- <stem>.agg.dat: whitespace-separated mean NMSE per (method, M, N),
  ready for gnuplot
- <path>.meta.json: run metadata (truth kind, selected hyperparameters)
"""

from __future__ import annotations

import csv
import json
import os
from collections import defaultdict
from dataclasses import dataclass, field

from graphreg.errors import DataIOError, ValidationError

HEADER = ("method", "M", "N", "trial", "nmse", "wall_time_s")

METHOD_ORDER = {"LR": 0, "LRG": 1, "NR-LRG": 2}


@dataclass
class ExperimentReport:
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, rows: list[dict]) -> None:
        for row in rows:
            if row["method"] not in METHOD_ORDER:
                raise ValidationError(f"Unknown method in report row: {row['method']!r}")
            if not row["nmse"] >= 0:
                raise ValidationError(f"NMSE must be nonnegative, got {row['nmse']!r}")
        self.rows.extend(rows)

    def sorted_rows(self) -> list[dict]:
        """Rows in a canonical order, independent of how they were produced."""
        return sorted(
            self.rows,
            key=lambda r: (METHOD_ORDER[r["method"]], r["N"], r["M"], r["trial"]),
        )

    def aggregate(self) -> list[dict]:
        """Mean NMSE per (method, M, N)."""
        groups: dict[tuple, list[float]] = defaultdict(list)
        for row in self.rows:
            groups[(row["method"], row["M"], row["N"])].append(row["nmse"])
        out = [
            {
                "method": method,
                "M": M,
                "N": N,
                "nmse": sum(values) / len(values),
                "trials": len(values),
            }
            for (method, M, N), values in groups.items()
        ]
        return sorted(out, key=lambda r: (METHOD_ORDER[r["method"]], r["N"], r["M"]))

    def select(self, **criteria) -> list[dict]:
        return [r for r in self.rows if all(r[k] == v for k, v in criteria.items())]


def _fmt(value: float) -> str:
    return repr(float(value))


def aggregate_path(path: str) -> str:
    return os.path.splitext(path)[0] + ".agg.dat"


def emit_report(report: ExperimentReport, path: str, aggregate: bool = True) -> None:
    """Write the report CSV, its aggregate and its metadata sidecar.

    Raises:
        DataIOError: If any of the files cannot be written; names the path.
    """
    target = path
    try:
        directory = os.path.dirname(os.path.abspath(path))
        os.makedirs(directory, exist_ok=True)

        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(HEADER)
            for row in report.sorted_rows():
                writer.writerow([
                    row["method"], row["M"], row["N"], row["trial"],
                    _fmt(row["nmse"]), _fmt(row["wall_time_s"]),
                ])

        if aggregate:
            target = aggregate_path(path)
            with open(target, "w") as f:
                f.write("# method M N mean_nmse trials\n")
                for row in report.aggregate():
                    f.write(
                        f"{row['method']} {row['M']} {row['N']} "
                        f"{_fmt(row['nmse'])} {row['trials']}\n"
                    )

        target = path + ".meta.json"
        with open(target, "w") as f:
            json.dump(report.metadata, f, indent=2, sort_keys=True)
            f.write("\n")
    except OSError as e:
        raise DataIOError(f"Cannot write report file {target}: {e}") from e
