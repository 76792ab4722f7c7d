"""Equal-quantile classification into k ordered classes.

Breaks are nearest-rank quantiles at j/k, and a value equal to a break is
placed in the lower class, so tied values can never land in different classes.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass
from typing import Mapping, Sequence

from countydri.errors import InvalidK, LabelMismatch

FIVE_CLASS_LABELS = ("very low", "relatively low", "moderate", "relatively high", "very high")


@dataclass(frozen=True)
class ClassAssignment:
    fips: str
    value: float
    class_index: int
    class_label: str
    class_count: int


def _check_k(k: int) -> None:
    if isinstance(k, bool) or not isinstance(k, int) or k < 2:
        raise InvalidK(f"class count must be an integer >= 2, got {k!r}")


def default_labels(k: int) -> tuple[str, ...]:
    _check_k(k)
    if k != 5:
        raise LabelMismatch(f"no default labels for k={k}; supply {k} labels")
    return FIVE_CLASS_LABELS


def quantile_breaks(values: Sequence[float], k: int) -> list[float]:
    _check_k(k)
    if not values:
        raise ValueError("cannot compute quantile breaks of an empty list")
    ordered = sorted(values)
    n = len(ordered)
    # ceil(j*n/k) in exact integer arithmetic
    return [ordered[-(-j * n // k) - 1] for j in range(1, k)]


def classify(
    values: Mapping[str, float],
    k: int,
    labels: Sequence[str] | None = None,
) -> list[ClassAssignment]:
    _check_k(k)
    labels = tuple(labels) if labels is not None else default_labels(k)
    if len(labels) != k:
        raise LabelMismatch(f"expected {k} labels, got {len(labels)}")
    if not values:
        return []
    breaks = quantile_breaks(list(values.values()), k)
    out = []
    for fips in sorted(values):
        v = values[fips]
        idx = 1 + bisect_left(breaks, v)
        out.append(ClassAssignment(fips, v, idx, labels[idx - 1], k))
    return out
