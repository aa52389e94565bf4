"""
CSV schema shared by every harness command.

Header: ``run_id,replication,t,metric_name,value,flags``. One metric per
row; floats use 17 significant digits so a parse round-trip is lossless.
Aggregate rows use ``replication = -1`` and carry ``mean`` or ``stderr``
in ``flags``; ``t`` is empty for summary rows and holds the grid value in
sweeps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional

HEADER = ("run_id", "replication", "t", "metric_name", "value", "flags")
METRIC_NAMES = ("iterate_error", "function_error", "gradient_error", "limsup_estimate",
                "bound_value", "rho", "fit_constant")


def format_float(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


@dataclass(frozen=True)
class CsvRow:
    run_id: str
    replication: int
    t: Optional[float]
    metric_name: str
    value: float
    flags: str = ""

    def __post_init__(self):
        if self.metric_name not in METRIC_NAMES:
            raise ValueError(f"unknown metric {self.metric_name!r}")

    def cells(self):
        t = "" if self.t is None else (str(int(self.t)) if float(self.t).is_integer()
                                       and abs(self.t) < 2 ** 53 else format_float(self.t))
        return [self.run_id, str(self.replication), t, self.metric_name,
                format_float(self.value), self.flags]

    @classmethod
    def parse(cls, cells):
        run_id, rep, t, metric, value, flags = cells
        return cls(run_id, int(rep), None if t == "" else float(t), metric, float(value), flags)


def write_rows(path, rows: Iterable[CsvRow]):
    try:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(HEADER)
            for r in rows:
                w.writerow(r.cells())
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def read_rows(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if tuple(header) != HEADER:
            raise ValueError(f"unexpected header {header}")
        return [CsvRow.parse(cells) for cells in reader]


def flag_dict(flags: str) -> dict:
    out = {}
    for item in filter(None, flags.split(";")):
        k, _, v = item.partition("=")
        out[k] = v
    return out


class OutputError(OSError):
    pass
