"""Report containers shared by every metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

_GROUP_KEYS = ("culture", "gender", "profession")


class EvalError(ValueError):
    pass


def group_key(**kw) -> tuple:
    """Canonical group identity: sorted (key, value) pairs restricted to
    the slicing vocabulary. Empty tuple means 'overall'."""
    for k in kw:
        if k not in _GROUP_KEYS:
            raise EvalError(f"unknown group key {k!r}; expected subset of {_GROUP_KEYS}")
    return tuple(sorted((k, v) for k, v in kw.items() if v is not None))


def format_group(group: tuple) -> str:
    if not group:
        return "overall"
    return ";".join(f"{k}={v}" for k, v in group)


@dataclass(frozen=True)
class ReportRow:
    group: tuple
    metric: str
    value: float
    n: int

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise EvalError(f"metric {self.metric!r} has non-finite value {self.value}")
        if self.n <= 0:
            raise EvalError(f"metric {self.metric!r} has n={self.n}; rows need n > 0")


@dataclass(frozen=True)
class EvalReport:
    rows: tuple = ()
    gaps: tuple = ()
    warnings: tuple = ()
    meta: tuple = ()

    @classmethod
    def build(
        cls,
        rows: Iterable[ReportRow],
        gaps: Iterable[ReportRow] = (),
        warnings: Iterable[str] = (),
        meta: Optional[dict] = None,
    ) -> "EvalReport":
        return cls(
            rows=tuple(rows),
            gaps=tuple(gaps),
            warnings=tuple(warnings),
            meta=tuple(sorted((meta or {}).items())),
        )

    def value(self, metric: str, **group) -> float:
        key = group_key(**group)
        for row in self.rows + self.gaps:
            if row.metric == metric and row.group == key:
                return row.value
        raise KeyError(f"no row for metric {metric!r} group {format_group(key)}")

    def n(self, metric: str, **group) -> int:
        key = group_key(**group)
        for row in self.rows + self.gaps:
            if row.metric == metric and row.group == key:
                return row.n
        raise KeyError(f"no row for metric {metric!r} group {format_group(key)}")

    def has(self, metric: str, **group) -> bool:
        try:
            self.value(metric, **group)
            return True
        except KeyError:
            return False

    def to_csv_rows(self) -> list:
        """Long-format rows: (group, metric, value, n, kind)."""
        out = []
        for row in self.rows:
            out.append((format_group(row.group), row.metric, row.value, row.n, "row"))
        for row in self.gaps:
            out.append((format_group(row.group), row.metric, row.value, row.n, "gap"))
        return out

    def to_obj(self) -> dict:
        return {
            "rows": [
                {"group": format_group(r.group), "metric": r.metric, "value": r.value, "n": r.n}
                for r in self.rows
            ],
            "gaps": [
                {"group": format_group(r.group), "metric": r.metric, "value": r.value, "n": r.n}
                for r in self.gaps
            ],
            "warnings": list(self.warnings),
            "meta": dict(self.meta),
        }
