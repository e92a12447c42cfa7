"""Stratified 2x2xK probability tables and collapsibility verdicts."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np

__all__ = [
    "StratifiedTable",
    "MeasureReport",
    "TableError",
    "ZeroMarginError",
    "MEASURES",
    "risk",
    "marginal_risk",
    "marginalize",
    "effect_measure",
    "load_table_csv",
    "render_table",
]

MEASURES = ("risk_difference", "risk_ratio", "odds_ratio")

DEFAULT_TOLERANCE = 1e-9


class TableError(ValueError):
    """Invalid table content or query."""


class ZeroMarginError(TableError):
    def __init__(self, context: str):
        super().__init__(f"empty margin: {context}")


@dataclass(frozen=True, eq=False)
class StratifiedTable:
    """Joint probabilities p(y, a, stratum) for binary y and a.

    ``probs[k, a, y]`` holds the joint probability of stratum ``k``,
    treatment ``a`` and outcome ``y``.  Probabilities must be
    non-negative and sum to one; use :meth:`from_counts` to normalize
    raw counts or weights.
    """

    labels: tuple[str, ...]
    probs: np.ndarray

    def __init__(self, labels: Iterable[str], probs: np.ndarray):
        labels = tuple(str(s) for s in labels)
        probs = np.asarray(probs, dtype=float)
        if probs.shape != (len(labels), 2, 2):
            raise TableError(
                f"expected probabilities of shape ({len(labels)}, 2, 2), got {probs.shape}"
            )
        if len(set(labels)) != len(labels):
            raise TableError("stratum labels must be unique")
        if np.any(probs < 0) or not np.all(np.isfinite(probs)):
            raise TableError("probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise TableError(f"probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_counts(cls, labels: Iterable[str], counts: np.ndarray) -> "StratifiedTable":
        counts = np.asarray(counts, dtype=float)
        total = counts.sum()
        if total <= 0:
            raise TableError("counts must sum to a positive total")
        return cls(labels, counts / total)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StratifiedTable):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.probs, other.probs)

    @property
    def n_strata(self) -> int:
        return len(self.labels)

    def stratum_index(self, stratum: str | int) -> int:
        if isinstance(stratum, int):
            if not 0 <= stratum < self.n_strata:
                raise TableError(f"stratum index {stratum} out of range")
            return stratum
        try:
            return self.labels.index(str(stratum))
        except ValueError:
            raise TableError(f"unknown stratum {stratum!r}") from None

    def stratum_weights(self) -> np.ndarray:
        """P(stratum)."""
        return self.probs.sum(axis=(1, 2))


@dataclass(frozen=True)
class MeasureReport:
    measure: str
    stratum_labels: tuple[str, ...]
    stratum_values: tuple[float, ...]
    marginal_value: float
    stratum_weights: tuple[float, ...]
    strictly_collapsible: bool
    collapsible: bool
    tolerance: float

    def as_dict(self) -> dict:
        return {
            "measure": self.measure,
            "strata": [
                {"label": lab, "value": val}
                for lab, val in zip(self.stratum_labels, self.stratum_values)
            ],
            "marginal": self.marginal_value,
            "stratum_weights": list(self.stratum_weights),
            "strictly_collapsible": self.strictly_collapsible,
            "collapsible": self.collapsible,
            "tolerance": self.tolerance,
        }


def risk(table: StratifiedTable, stratum: str | int, a: int) -> float:
    """P(Y=1 | A=a, stratum)."""
    k = table.stratum_index(stratum)
    if a not in (0, 1):
        raise TableError("treatment level must be 0 or 1")
    cell = table.probs[k, a, :]
    denom = cell.sum()
    if denom <= 0:
        raise ZeroMarginError(f"stratum {table.labels[k]!r}, A={a}")
    return float(cell[1] / denom)


def marginal_risk(table: StratifiedTable, a: int) -> float:
    """P(Y=1 | A=a) after summing over strata."""
    return risk(marginalize(table), 0, a)


def marginalize(table: StratifiedTable) -> StratifiedTable:
    """Collapse strata into a single 2x2 table by summing joints."""
    collapsed = table.probs.sum(axis=0, keepdims=True)
    return StratifiedTable(("marginal",), collapsed)


def _measure_value(measure: str, r1: float, r0: float, context: str) -> float:
    if measure == "risk_difference":
        return r1 - r0
    if measure == "risk_ratio":
        if r0 <= 0:
            raise ZeroMarginError(f"risk_ratio denominator P(Y=1|A=0) is 0 in {context}")
        return r1 / r0
    if measure == "odds_ratio":
        if r0 <= 0 or r1 >= 1:
            raise ZeroMarginError(f"odds_ratio denominator is 0 in {context}")
        if r0 >= 1 or r1 <= 0:
            raise ZeroMarginError(f"odds_ratio numerator is degenerate in {context}")
        return (r1 / (1 - r1)) / (r0 / (1 - r0))
    raise TableError(f"unknown measure {measure!r}; expected one of {MEASURES}")


def effect_measure(
    table: StratifiedTable, measure: str, tolerance: float = DEFAULT_TOLERANCE
) -> MeasureReport:
    """Per-stratum and marginal effect measure with collapsibility verdicts.

    Strict collapsibility requires every stratum value to equal the
    marginal value; plain collapsibility requires the marginal value to
    lie within the range spanned by the stratum values (the weighted
    average criterion).  Comparisons use a relative tolerance.
    """
    stratum_values = tuple(
        _measure_value(
            measure,
            risk(table, k, 1),
            risk(table, k, 0),
            f"stratum {table.labels[k]!r}",
        )
        for k in range(table.n_strata)
    )
    marginal = _measure_value(
        measure, marginal_risk(table, 1), marginal_risk(table, 0), "marginal table"
    )
    tol = tolerance * max(1.0, abs(marginal))
    strict = all(abs(v - marginal) <= tol for v in stratum_values)
    collapsible = (
        strict
        or (min(stratum_values) - tol <= marginal <= max(stratum_values) + tol)
    )
    return MeasureReport(
        measure=measure,
        stratum_labels=table.labels,
        stratum_values=stratum_values,
        marginal_value=marginal,
        stratum_weights=tuple(float(w) for w in table.stratum_weights()),
        strictly_collapsible=strict,
        collapsible=collapsible,
        tolerance=tolerance,
    )


def load_table_csv(source: str) -> StratifiedTable:
    """Read a table from CSV text with columns stratum, a, y, weight.

    The weight column may also be named ``count`` or ``n``; duplicate
    (stratum, a, y) rows accumulate.  Weights normalize to
    probabilities.
    """
    reader = csv.DictReader(io.StringIO(source))
    if reader.fieldnames is None:
        raise TableError("empty CSV input")
    fields = {name.strip().lower(): name for name in reader.fieldnames}
    weight_col = next(
        (fields[k] for k in ("weight", "count", "n") if k in fields), None
    )
    missing = [k for k in ("stratum", "a", "y") if k not in fields]
    if missing or weight_col is None:
        raise TableError(
            "CSV needs columns stratum, a, y and one of weight/count/n; "
            f"got {reader.fieldnames}"
        )
    labels: list[str] = []
    cells: dict[tuple[str, int, int], float] = {}
    for i, row in enumerate(reader, start=2):
        stratum = row[fields["stratum"]].strip()
        try:
            a = int(row[fields["a"]])
            y = int(row[fields["y"]])
            w = float(row[weight_col])
        except (TypeError, ValueError) as exc:
            raise TableError(f"row {i}: {exc}") from None
        if a not in (0, 1) or y not in (0, 1):
            raise TableError(f"row {i}: a and y must be 0 or 1")
        if w < 0:
            raise TableError(f"row {i}: negative weight")
        if stratum not in labels:
            labels.append(stratum)
        cells[(stratum, a, y)] = cells.get((stratum, a, y), 0.0) + w
    counts = np.zeros((len(labels), 2, 2))
    for (stratum, a, y), w in cells.items():
        counts[labels.index(stratum), a, y] = w
    return StratifiedTable.from_counts(labels, counts)


def render_table(table: StratifiedTable, reports: Iterable[MeasureReport]) -> str:
    """Plain-text rendering: joints, risks, and one row per measure."""
    cols = list(table.labels) + ["marginal"]
    tables = [table.probs[k] for k in range(table.n_strata)]
    tables.append(marginalize(table).probs[0])
    lines: list[str] = []
    header = " " * 10 + "".join(f"{c:>16}" for c in cols)
    lines.append(header)
    lines.append(" " * 10 + "".join(f"{'A=1':>8}{'A=0':>8}" for _ in cols))
    for y in (1, 0):
        row = f"Y={y}".ljust(10)
        for block in tables:
            row += f"{block[1, y]:>8.3f}{block[0, y]:>8.3f}"
        lines.append(row)
    risk_row = "risk".ljust(10)
    for k, block in enumerate(tables):
        denom1, denom0 = block[1].sum(), block[0].sum()
        risk_row += f"{block[1, 1] / denom1:>8.2f}{block[0, 1] / denom0:>8.2f}"
    lines.append(risk_row)
    for rep in reports:
        row = rep.measure.replace("_", " ").ljust(16)
        for v in rep.stratum_values:
            row += f"{v:>16.2f}"
        row += f"{rep.marginal_value:>16.2f}"
        verdict = (
            "strictly collapsible"
            if rep.strictly_collapsible
            else ("collapsible" if rep.collapsible else "not collapsible")
        )
        lines.append(row + "   " + verdict)
    return "\n".join(lines)
