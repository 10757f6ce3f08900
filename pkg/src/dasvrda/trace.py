"""Benchmark trace files: a JSON config header line plus CSV rows.

A trace starts with one ``#``-prefixed line holding the fully resolved run
configuration as JSON (sorted keys, so identical configurations produce
identical headers), followed by a CSV header and one row per stage.  The
``seconds`` column is wall-clock and is the only field expected to differ
between reruns of the same seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable, Optional

TRACE_COLUMNS = (
    "stage",
    "evals",
    "evals_over_n",
    "objective",
    "gap",
    "seconds",
    "restarted",
)


@dataclass
class TraceRecord:
    stage: int
    evals: int
    evals_over_n: float
    objective: float
    gap: Optional[float]
    seconds: float
    restarted: bool

    def row(self) -> list[str]:
        return [
            str(self.stage),
            str(self.evals),
            repr(float(self.evals_over_n)),
            repr(float(self.objective)),
            "" if self.gap is None else repr(float(self.gap)),
            repr(float(self.seconds)),
            str(int(self.restarted)),
        ]


def write_trace(path: str, config: dict, records: Iterable[TraceRecord]) -> None:
    with open(path, "w", newline="") as handle:
        handle.write("#" + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.writer(handle)
        writer.writerow(TRACE_COLUMNS)
        for record in records:
            writer.writerow(record.row())


def read_trace(path: str) -> tuple[dict, list[TraceRecord]]:
    with open(path, newline="") as handle:
        first = handle.readline()
        if not first.startswith("#"):
            raise ValueError(f"{path}: missing JSON header line")
        config = json.loads(first[1:])
        reader = csv.reader(handle)
        header = next(reader)
        if tuple(header) != TRACE_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        records = []
        for row in reader:
            records.append(
                TraceRecord(
                    stage=int(row[0]),
                    evals=int(row[1]),
                    evals_over_n=float(row[2]),
                    objective=float(row[3]),
                    gap=None if row[4] == "" else float(row[4]),
                    seconds=float(row[5]),
                    restarted=bool(int(row[6])),
                )
            )
    return config, records
