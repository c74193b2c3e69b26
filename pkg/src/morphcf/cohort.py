"""Successive demographic filtering with histogram and layer-count outputs.

Backs the source-selection UI: each clause narrows the cohort, the
per-layer survivor counts drive the icicle display, and the final subset
is the id list handed to recombination runs.

Missing-value rule: a subject lacking a value for a clause's variable is
excluded by that clause only, so a subject without a BMI still survives an
age-only filter.
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import SubjectRecord
from .errors import ValidationError


@dataclass(frozen=True)
class FilterClause:
    """Inclusive numeric range [lo, hi] or categorical value set on one variable."""

    variable: str
    lo: float | None = None
    hi: float | None = None
    values: frozenset | None = None

    def __post_init__(self):
        numeric = self.lo is not None or self.hi is not None
        categorical = self.values is not None
        if numeric == categorical:
            raise ValidationError(
                f"clause on {self.variable!r} must set either a range or a value set"
            )
        if numeric:
            if self.lo is None or self.hi is None:
                raise ValidationError(f"clause on {self.variable!r} needs both lo and hi")
            if self.lo > self.hi:
                raise ValidationError(f"clause on {self.variable!r}: lo {self.lo} > hi {self.hi}")
        else:
            values = frozenset(str(v) for v in self.values)
            if not values:
                raise ValidationError(f"clause on {self.variable!r}: empty category set")
            object.__setattr__(self, "values", values)

    @property
    def is_numeric(self) -> bool:
        return self.values is None

    def matches(self, record: SubjectRecord) -> bool:
        v = record.value(self.variable)
        if v is None:
            return False  # missing value -> excluded by this clause
        if self.is_numeric:
            try:
                x = float(v)
            except (TypeError, ValueError):
                return False
            return self.lo <= x <= self.hi
        return str(v) in self.values

    def to_json_dict(self) -> dict:
        if self.is_numeric:
            return {"variable": self.variable, "lo": self.lo, "hi": self.hi}
        return {"variable": self.variable, "values": sorted(self.values)}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "FilterClause":
        if "values" in doc:
            return cls(variable=doc["variable"], values=frozenset(doc["values"]))
        return cls(variable=doc["variable"], lo=doc.get("lo"), hi=doc.get("hi"))


@dataclass
class CohortState:
    """Layered filtering outcome; layer 0 is the unfiltered cohort."""

    clauses: list[FilterClause]
    layer_counts: list[int]  # len(clauses) + 1 entries, non-increasing
    subset: list[str]  # surviving ids in dataset order


def _check_declared(clauses, declared) -> None:
    if declared is None:
        return
    names = {d.name if hasattr(d, "name") else str(d) for d in declared}
    for clause in clauses:
        if clause.variable not in names:
            raise ValidationError(f"unknown variable {clause.variable!r}")


def apply_filters(records: list[SubjectRecord], clauses: list[FilterClause],
                  declared=None) -> CohortState:
    """Apply clauses in order; layer i counts subjects satisfying clauses 1..i."""
    _check_declared(clauses, declared)
    surviving = list(records)
    counts = [len(surviving)]
    for clause in clauses:
        surviving = [r for r in surviving if clause.matches(r)]
        counts.append(len(surviving))
    return CohortState(clauses=list(clauses), layer_counts=counts,
                       subset=[r.id for r in surviving])


def subset_ids(state: CohortState) -> list[str]:
    return list(state.subset)


@dataclass
class HistogramResult:
    bins: list[tuple[float, float, int]]  # (lo, hi, count); last bin includes hi
    missing: int


def histogram(records: list[SubjectRecord], variable: str, bin_count: int,
              declared=None) -> HistogramResult:
    """Equal-width bins over [min, max]; the max value lands in the last bin.

    Missing values are excluded and reported. A constant variable yields a
    single degenerate [v, v] bin. Categorical variables are rejected (use
    category_counts for those).
    """
    if declared is not None:
        names = {d.name if hasattr(d, "name") else str(d) for d in declared}
        if variable not in names:
            raise ValidationError(f"unknown variable {variable!r}")
    if bin_count < 1:
        raise ValidationError(f"bin count must be >= 1, got {bin_count}")
    values = []
    missing = 0
    for rec in records:
        v = rec.value(variable)
        if v is None:
            missing += 1
            continue
        if isinstance(v, str):
            raise ValidationError(
                f"variable {variable!r} is categorical; histogram needs a numeric variable"
            )
        values.append(float(v))
    if not values:
        return HistogramResult(bins=[], missing=missing)
    lo, hi = min(values), max(values)
    if lo == hi:
        return HistogramResult(bins=[(lo, hi, len(values))], missing=missing)
    width = (hi - lo) / bin_count
    counts = [0] * bin_count
    for v in values:
        idx = min(bin_count - 1, int((v - lo) / width))
        counts[idx] += 1
    bins = [(lo + i * width, lo + (i + 1) * width, counts[i]) for i in range(bin_count)]
    # pin the last edge to the exact max so the inclusive rule is visible
    bins[-1] = (bins[-1][0], hi, bins[-1][2])
    return HistogramResult(bins=bins, missing=missing)


def category_counts(records: list[SubjectRecord], variable: str) -> list[tuple[str, int]]:
    """Value counts for a categorical variable, sorted by value."""
    counts: dict[str, int] = {}
    for rec in records:
        v = rec.value(variable)
        if v is None:
            continue
        counts[str(v)] = counts.get(str(v), 0) + 1
    return sorted(counts.items())
