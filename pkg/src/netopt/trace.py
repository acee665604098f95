"""Per-iteration run traces with deterministic CSV output.

A trace row records what an algorithm can observe about its own progress
(objective, feasibility residual, dual value, message count) plus the
distance to the oracle solution when one is available.  Rows never contain
wall-clock time: the CSV must be byte-identical across repeated seeded runs,
so timing lives in the run summary instead.

Floats are written with ``repr`` so that ``load(save(t))`` reproduces every
value exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

COLUMNS = ("iter", "objective", "residual", "distance", "dual_value", "messages")

STATUS_CONVERGED = "Converged"
STATUS_MAXITER = "MaxIter"


@dataclass
class TraceRow:
    iteration: int
    objective: float
    residual: float
    distance: float | None = None
    dual_value: float | None = None
    messages: int = 0


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _parse(cell: str):
    if cell == "":
        return None
    return float(cell)


@dataclass
class RunTrace:
    """Ordered trace rows plus a free-form summary dict.

    Rows must arrive with strictly increasing iteration numbers and
    nondecreasing message counts; ``append`` enforces both.
    """

    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def append(self, row: TraceRow) -> None:
        if self.rows:
            last = self.rows[-1]
            if row.iteration <= last.iteration:
                raise ValueError(
                    f"iteration must increase (got {row.iteration} after {last.iteration})"
                )
            if row.messages < last.messages:
                raise ValueError("message count must be nondecreasing")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def record(self, iteration, objective, residual, distance=None, dual_value=None,
               messages=0) -> None:
        self.append(TraceRow(int(iteration), float(objective), float(residual),
                             None if distance is None else float(distance),
                             None if dual_value is None else float(dual_value),
                             int(messages)))

    def column(self, name: str) -> np.ndarray:
        """One column as a float array; missing entries become nan."""
        if name not in COLUMNS:
            raise KeyError(name)
        out = []
        for r in self.rows:
            v = getattr(r, "iteration" if name == "iter" else name)
            out.append(np.nan if v is None else float(v))
        return np.array(out)

    def to_csv(self) -> str:
        lines = [",".join(COLUMNS)]
        for r in self.rows:
            lines.append(",".join([
                str(r.iteration),
                _fmt(r.objective),
                _fmt(r.residual),
                _fmt(r.distance),
                _fmt(r.dual_value),
                str(r.messages),
            ]))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    def save_summary(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary, fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_csv(cls, text: str) -> "RunTrace":
        lines = text.strip("\n").split("\n")
        if not lines or tuple(lines[0].split(",")) != COLUMNS:
            raise ValueError("unrecognized trace header")
        trace = cls()
        for line in lines[1:]:
            cells = line.split(",")
            if len(cells) != len(COLUMNS):
                raise ValueError(f"malformed trace row: {line!r}")
            trace.append(TraceRow(
                int(cells[0]),
                _parse(cells[1]),
                _parse(cells[2]),
                _parse(cells[3]),
                _parse(cells[4]),
                int(cells[5]),
            ))
        return trace

    @classmethod
    def load(cls, path) -> "RunTrace":
        with open(path, encoding="utf-8") as fh:
            return cls.from_csv(fh.read())
