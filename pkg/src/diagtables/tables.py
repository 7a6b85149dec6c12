"""Complete and partial 2x2 diagnostic tables and their deterministic accuracy measures.

A complete table stores only the four cells (TP, FP, FN, TN); every total is
derived, never stored, so the additive identities hold by construction. Partial
tables carry optional cells/totals plus a scenario tag and are checked by
:func:`validate_partial`, which reports violations as data instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from enum import Enum
from typing import Optional

from .errors import InfeasibleCompletion


class Scenario(str, Enum):
    SINGLE_ROW_ONLY = "SingleRowOnly"
    ROW_PLUS_TOTAL_N = "RowPlusTotalN"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class CellCounts:
    """The four cells of a complete 2x2 diagnostic table (person counts)."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"cell {f.name} must be a non-negative integer, got {v!r}")

    @property
    def n_pos(self) -> int:
        """Test-positive row total."""
        return self.tp + self.fp

    @property
    def n_neg(self) -> int:
        """Test-negative row total."""
        return self.fn + self.tn

    @property
    def n1(self) -> int:
        """Diseased column total."""
        return self.tp + self.fn

    @property
    def n2(self) -> int:
        """Non-diseased column total."""
        return self.fp + self.tn

    @property
    def total(self) -> int:
        return self.n1 + self.n2


@dataclass(frozen=True)
class PartialTable:
    """Observed subset of cells/totals defining a reconstruction scenario."""

    tp: Optional[int] = None
    fp: Optional[int] = None
    fn: Optional[int] = None
    tn: Optional[int] = None
    n1: Optional[int] = None
    n2: Optional[int] = None
    n_total: Optional[int] = None
    scenario: Scenario = Scenario.CUSTOM


@dataclass(frozen=True)
class Measures:
    """Diagnostic accuracy measures; ``None`` marks a zero-denominator (undefined) value."""

    se: Optional[float]
    sp: Optional[float]
    ppv: Optional[float]
    npv: Optional[float]
    accuracy: Optional[float]
    prevalence: Optional[float]


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den > 0 else None


def measures_from_counts(c: CellCounts) -> Measures:
    """Se, Sp, PPV, NPV, accuracy and prevalence from a complete table.

    Zero-denominator measures come back as ``None`` rather than 0 or NaN; report
    emitters print them as "undefined".
    """
    return Measures(
        se=_ratio(c.tp, c.n1),
        sp=_ratio(c.tn, c.n2),
        ppv=_ratio(c.tp, c.n_pos),
        npv=_ratio(c.tn, c.n_neg),
        accuracy=_ratio(c.tp + c.tn, c.total),
        prevalence=_ratio(c.n1, c.total),
    )


def complete_table(tp: int, fp: int, n1: int, n2: int) -> CellCounts:
    """Fill in the unobserved row: FN = n1 - TP, TN = n2 - FP.

    Raises
    ------
    InfeasibleCompletion
        If either stratum total is below its observed cell.
    """
    if n1 < tp:
        raise InfeasibleCompletion(f"n1={n1} is below tp={tp}")
    if n2 < fp:
        raise InfeasibleCompletion(f"n2={n2} is below fp={fp}")
    return CellCounts(tp=tp, fp=fp, fn=n1 - tp, tn=n2 - fp)


def validate_partial(t: PartialTable) -> list[str]:
    """Check every invariant of a partial table; each violation comes back named.

    An empty list means the table is internally consistent.
    """
    v: list[str] = []
    cells = {"tp": t.tp, "fp": t.fp, "fn": t.fn, "tn": t.tn}
    totals = {"n1": t.n1, "n2": t.n2, "N": t.n_total}
    for name, val in {**cells, **totals}.items():
        if val is not None and (not isinstance(val, int) or val < 0):
            v.append(f"{name} must be a non-negative integer, got {val!r}")
    if v:
        return v

    if all(c is None for c in cells.values()):
        v.append("at least one cell (tp, fp, fn, tn) must be observed")

    def check_pair(cell_name, cell, total_name, total):
        if cell is not None and total is not None and cell > total:
            v.append(f"{cell_name} exceeds {total_name}")

    check_pair("tp", t.tp, "n1", t.n1)
    check_pair("fn", t.fn, "n1", t.n1)
    check_pair("fp", t.fp, "n2", t.n2)
    check_pair("tn", t.tn, "n2", t.n2)
    for name, total in totals.items():
        if name != "N":
            check_pair(name, total, "N", t.n_total)

    def check_sum(a_name, a, b_name, b, total_name, total):
        if a is not None and b is not None and total is not None and a + b != total:
            v.append(f"{a_name} + {b_name} must equal {total_name}")

    check_sum("tp", t.tp, "fn", t.fn, "n1", t.n1)
    check_sum("fp", t.fp, "tn", t.tn, "n2", t.n2)
    check_sum("n1", t.n1, "n2", t.n2, "N", t.n_total)

    observed_cells = sum(c for c in cells.values() if c is not None)
    if t.n_total is not None and observed_cells > t.n_total:
        v.append("observed cells sum beyond N")
    return v
