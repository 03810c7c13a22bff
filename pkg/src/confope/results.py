"""Result rows and CSV emission for the experiment commands.

The schema is fixed: one row per sweep point with the bound next to its
nominal and behavior reference values.  Population-mode runs must be
byte-identical across reruns, so their runtime column is pinned to zero
(wall-clock timings are only meaningful for sampled runs anyway).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from .errors import ValidationError

RESULT_HEADER = [
    "env", "method", "gamma", "delta", "p", "horizon",
    "bound", "nominal_value", "behavior_value", "runtime_ms", "seed",
]


@dataclass(frozen=True)
class BoundResult:
    env: str
    method: str
    gamma: float
    delta: float
    p: float
    horizon: int
    bound: float
    nominal_value: float
    behavior_value: float
    runtime_ms: int
    seed: int | None = None
    gap: float | None = None      # tightness rows only

    def row(self) -> list[str]:
        return [
            self.env,
            self.method,
            repr(float(self.gamma)),
            repr(float(self.delta)),
            repr(float(self.p)),
            str(int(self.horizon)),
            repr(float(self.bound)),
            repr(float(self.nominal_value)),
            repr(float(self.behavior_value)),
            str(int(self.runtime_ms)),
            "" if self.seed is None else str(int(self.seed)),
        ]


def results_to_csv(results: list[BoundResult], with_gap: bool = False) -> str:
    """Serialize result rows; floats via repr so reruns are byte-identical."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = RESULT_HEADER + ["gap"] if with_gap else RESULT_HEADER
    writer.writerow(header)
    for res in results:
        row = res.row()
        if with_gap:
            row = row + ["" if res.gap is None else repr(float(res.gap))]
        writer.writerow(row)
    return buf.getvalue()


def results_from_csv(text: str) -> list[BoundResult]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValidationError("empty results CSV") from None
    if header[: len(RESULT_HEADER)] != RESULT_HEADER:
        raise ValidationError(f"unexpected results header {header}")
    has_gap = len(header) > len(RESULT_HEADER)
    out = []
    for row in reader:
        if not row:
            continue
        gap = None
        if has_gap and len(row) > len(RESULT_HEADER) and row[len(RESULT_HEADER)]:
            gap = float(row[len(RESULT_HEADER)])
        out.append(BoundResult(
            env=row[0], method=row[1],
            gamma=float(row[2]), delta=float(row[3]), p=float(row[4]),
            horizon=int(row[5]), bound=float(row[6]),
            nominal_value=float(row[7]), behavior_value=float(row[8]),
            runtime_ms=int(row[9]),
            seed=int(row[10]) if row[10] else None,
            gap=gap,
        ))
    if not out:
        raise ValidationError("results CSV has a header but no rows")
    return out
