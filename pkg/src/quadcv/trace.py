"""Run trace records and their fixed CSV schema."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

TRACE_COLUMNS = ("iteration", "elapsed_ms", "elbo_estimate", "var_total",
                 "var_mean_block", "var_scale_block", "gamma")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    elapsed_ms: int
    elbo_estimate: float
    var_total: float
    var_mean_block: float
    var_scale_block: float
    gamma: float


@dataclass
class RunTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow):
        if self.rows and row.iteration <= self.rows[-1].iteration:
            raise ValueError("iterations must be strictly increasing")
        self.rows.append(row)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for r in self.rows:
                writer.writerow([r.iteration, r.elapsed_ms,
                                 repr(r.elbo_estimate), repr(r.var_total),
                                 repr(r.var_mean_block),
                                 repr(r.var_scale_block), repr(r.gamma)])

    @classmethod
    def read_csv(cls, path) -> "RunTrace":
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != TRACE_COLUMNS:
                raise ValueError(f"unexpected header {header!r}")
            for row in reader:
                trace.append(TraceRow(int(row[0]), int(row[1]), float(row[2]),
                                      float(row[3]), float(row[4]),
                                      float(row[5]), float(row[6])))
        return trace
