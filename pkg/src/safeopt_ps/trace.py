"""Per-iteration run records and their CSV / JSON serialisation.

CSV columns are fixed by :func:`trace_header`; floats are written with
``repr``-exact ``.17g`` formatting so files are locale independent and
byte-identical across reruns (apart from the ``ms_*`` timing columns).
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

TIMING_COLUMNS = ("ms_select", "ms_lstar", "ms_p1", "ms_p2")


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


@dataclass
class IterationRecord:
    n: int
    point: np.ndarray
    source: str
    driving_index: int
    width: float
    l_star: float
    observation: np.ndarray
    ms_select: float = 0.0
    ms_lstar: float = 0.0
    ms_p1: float = 0.0
    ms_p2: float = 0.0
    # smallest constraint lower bound at the point when it was selected
    safety_margin: float = 0.0
    expander_violation: float = float("nan")
    dx: float = float("nan")
    df: float = float("nan")
    tolerances_met: bool = False
    stop: bool = False


@dataclass
class RunTrace:
    dim: int
    n_outputs: int
    records: list = field(default_factory=list)

    def append(self, rec):
        if self.records and rec.n <= self.records[-1].n:
            raise ValueError("iteration indices must increase")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    @property
    def points(self):
        if not self.records:
            return np.zeros((0, self.dim))
        return np.array([r.point for r in self.records])

    def header(self):
        return trace_header(self.dim, self.n_outputs)

    def rows(self):
        for r in self.records:
            yield [
                r.n, *r.point, r.source, r.driving_index, r.width, r.l_star,
                r.ms_select, r.ms_lstar, r.ms_p1, r.ms_p2, *r.observation, r.safety_margin,
                r.expander_violation, r.dx, r.df, r.tolerances_met, r.stop,
            ]

    def to_csv(self, path=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for row in self.rows():
            w.writerow([fmt(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def mean_ms(self, column):
        vals = [getattr(r, column) for r in self.records]
        return float(np.mean(vals)) if vals else 0.0


def trace_header(dim, n_outputs):
    return (
        ["n"] + [f"x{i}" for i in range(dim)]
        + ["source", "driving_index", "width", "l_star", *TIMING_COLUMNS]
        + ["f"] + [f"g{j}" for j in range(1, n_outputs)]
        + ["safety_margin", "expander_violation", "dx", "df", "tolerances_met", "stop"]
    )


def read_trace_csv(path):
    """Parse a trace CSV back into a list of dicts with numeric fields as floats."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        parsed = {}
        for k, v in row.items():
            if k == "source":
                parsed[k] = v
            else:
                parsed[k] = float(v)
        out.append(parsed)
    return out


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")
