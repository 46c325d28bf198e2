"""Star rating of how ready a dose is for a confirmatory trial.

Rows are expansion strategies applied to dose escalation, columns are the
degree of randomized dose comparison. The values are a fixed lookup, not a
computation.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass


class RandomizationLevel(enum.Enum):
    NONE = ("none", "no randomization", None)
    TWO_DOSE = ("2dose", "2-dose randomization", "30-40/dose")
    THREE_DOSE = ("3dose", "3-dose randomization", "20-30/dose")

    def __init__(self, key, label, per_dose):
        self.key = key
        self.label = label
        self.per_dose = per_dose


class ExpansionLevel(enum.Enum):
    NONE = ("none", "no expansion", None)
    BACKFILL_LOW_SIMILARITY = ("backfill-low", "backfill, low similarity", "10/dose")
    EXTENDED_BACKFILL_MODERATE = (
        "extended-moderate", "extended backfill, moderate similarity", "20+/dose, 2+ doses")
    EXTENDED_BACKFILL_HIGH = (
        "extended-high", "extended backfill, high similarity", "20+/dose, 2+ doses")

    def __init__(self, key, label, per_dose):
        self.key = key
        self.label = label
        self.per_dose = per_dose


@dataclass(frozen=True)
class StarRating:
    stars: int

    def __post_init__(self):
        if not 0 <= self.stars <= 5:
            raise ValueError("stars must lie in 0..5")

    @property
    def viable(self) -> bool:
        return self.stars > 0

    def render(self) -> str:
        return "*" * self.stars if self.stars else "-"

    def __str__(self) -> str:
        return self.render()


_TABLE = {
    ExpansionLevel.NONE: (0, 2, 3),
    ExpansionLevel.BACKFILL_LOW_SIMILARITY: (1, 3, 4),
    ExpansionLevel.EXTENDED_BACKFILL_MODERATE: (2, 4, 5),
    ExpansionLevel.EXTENDED_BACKFILL_HIGH: (3, 5, 5),
}
_COLUMNS = tuple(RandomizationLevel)


def rate(randomization: RandomizationLevel, expansion: ExpansionLevel) -> StarRating:
    return StarRating(_TABLE[ExpansionLevel(expansion)][_COLUMNS.index(RandomizationLevel(randomization))])


def _lookup(enum_cls, name: str):
    norm = name.strip().lower().replace("_", "-")
    for member in enum_cls:
        if norm in (member.key, member.name.lower().replace("_", "-")):
            return member
    valid = ", ".join(m.key for m in enum_cls)
    raise ValueError(f"unknown {enum_cls.__name__} {name!r}; valid: {valid}")


def parse_randomization(name: str) -> RandomizationLevel:
    return _lookup(RandomizationLevel, name)


def parse_expansion(name: str) -> ExpansionLevel:
    return _lookup(ExpansionLevel, name)


def rating_table() -> list[dict]:
    """All cells in row-major order (expansion rows, randomization columns)."""
    return [
        {
            "expansion": e.key,
            "randomization": r.key,
            "stars": rate(r, e).stars,
            "rating": rate(r, e).render(),
        }
        for e in ExpansionLevel
        for r in RandomizationLevel
    ]


def table_csv() -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["expansion", "randomization", "stars", "rating"],
                            lineterminator="\n")
    writer.writeheader()
    writer.writerows(rating_table())
    return buf.getvalue()


def table_text() -> str:
    head = ["expansion \\ randomization"] + [r.label for r in RandomizationLevel]
    rows = [[e.label] + [rate(r, e).render() for r in RandomizationLevel] for e in ExpansionLevel]
    widths = [max(len(row[i]) for row in [head] + rows) for i in range(len(head))]
    fmt = lambda row: "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
    return "\n".join([fmt(head)] + [fmt(row) for row in rows]) + "\n"
