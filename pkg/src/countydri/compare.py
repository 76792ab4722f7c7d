"""Agreement between the resilience index and FEMA's National Risk Index."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from countydri.classify import ClassAssignment, classify
from countydri.errors import ClassCountMismatch, ConstantInput, InsufficientData
from countydri.index_core import DriResult
from countydri.ingest import NriRecord

RATING_SOURCE = "risk_rating"
QUANTILE_SOURCE = "risk_score_quantiles"


@dataclass(frozen=True)
class Divergence:
    fips: str
    dri_class: int
    nri_class: int
    delta: int


@dataclass
class ComparisonReport:
    n: int
    k: int
    spearman_rho: float | None
    cross_tab: list[list[int]]
    divergences: list[Divergence]
    divergence_threshold: int
    nri_class_source: str
    dri_only: list[str] = field(default_factory=list)
    nri_only: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


def average_ranks(xs: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the mean of the ranks they span."""
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for pos in range(i, j + 1):
            ranks[order[pos]] = mean_rank
        i = j + 1
    return ranks


def spearman(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Spearman's rho as the Pearson correlation of average-rank vectors."""
    if len(xs) != len(ys):
        raise ValueError(f"length mismatch: {len(xs)} vs {len(ys)}")
    n = len(xs)
    if n < 2:
        raise InsufficientData(f"need at least 2 pairs, got {n}")
    rx, ry = average_ranks(xs), average_ranks(ys)
    # both rank vectors have mean (n + 1) / 2 regardless of ties
    mean = (n + 1) / 2.0
    dx = [r - mean for r in rx]
    dy = [r - mean for r in ry]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise ConstantInput("rank variance is zero on at least one side")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    rho = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


def _joined(a: Iterable[ClassAssignment], b: Iterable[ClassAssignment]):
    am = {x.fips: x for x in a}
    bm = {x.fips: x for x in b}
    common = sorted(am.keys() & bm.keys())
    return am, bm, common


def cross_tabulate(
    a: Iterable[ClassAssignment], b: Iterable[ClassAssignment], k: int
) -> tuple[list[list[int]], dict[str, list[str]]]:
    """k x k counts, rows indexed by a's class and columns by b's.

    Returns the matrix and the FIPS found on only one side.
    """
    am, bm, common = _joined(a, b)
    for side, assigns in (("a", am), ("b", bm)):
        bad = sorted({x.class_count for x in assigns.values()} - {k})
        if bad:
            raise ClassCountMismatch(f"side {side} was classified with k={bad[0]}, expected {k}")
    tab = [[0] * k for _ in range(k)]
    for fips in common:
        tab[am[fips].class_index - 1][bm[fips].class_index - 1] += 1
    diag = {
        "a_only": sorted(am.keys() - bm.keys()),
        "b_only": sorted(bm.keys() - am.keys()),
    }
    return tab, diag


def divergence_report(
    a: Iterable[ClassAssignment], b: Iterable[ClassAssignment], threshold: int = 2
) -> list[Divergence]:
    if threshold < 1:
        raise ValueError("divergence threshold must be >= 1")
    am, bm, common = _joined(a, b)
    rows = []
    for fips in common:
        delta = am[fips].class_index - bm[fips].class_index
        if abs(delta) >= threshold:
            rows.append(Divergence(fips, am[fips].class_index, bm[fips].class_index, delta))
    rows.sort(key=lambda d: (-abs(d.delta), d.fips))
    return rows


def classify_nri(
    records: Sequence[NriRecord], k: int, rating_classes: Mapping[str, int]
) -> tuple[list[ClassAssignment], str]:
    """Class NRI counties by FEMA's own rating when every rating maps into 1..k,
    otherwise by equal quantiles of the risk score."""
    indices = {v for v in rating_classes.values()}
    usable = (
        bool(records)
        and indices == set(range(1, k + 1))
        and all(r.risk_rating in rating_classes for r in records)
    )
    if usable:
        out = [
            ClassAssignment(r.fips, r.risk_score, rating_classes[r.risk_rating], r.risk_rating, k)
            for r in sorted(records, key=lambda r: r.fips)
        ]
        return out, RATING_SOURCE
    labels = tuple(f"class {i}" for i in range(1, k + 1))
    return classify({r.fips: r.risk_score for r in records}, k, labels), QUANTILE_SOURCE


def compare_with_nri(
    dri_results: Sequence[DriResult],
    dri_classes: Sequence[ClassAssignment],
    nri_records: Sequence[NriRecord],
    k: int,
    threshold: int = 2,
    rating_classes: Mapping[str, int] | None = None,
) -> ComparisonReport:
    dri_by = {r.fips: r for r in dri_results}
    nri_by = {r.fips: r for r in nri_records}
    common = sorted(dri_by.keys() & nri_by.keys())
    notes = []

    nri_classes, source = classify_nri([nri_by[f] for f in common], k, rating_classes or {})
    if source == QUANTILE_SOURCE and common:
        notes.append("NRI classes derived from risk-score quantiles; published ratings unusable")

    rho = None
    if len(common) >= 2:
        try:
            rho = spearman([dri_by[f].dri for f in common], [nri_by[f].risk_score for f in common])
        except ConstantInput as exc:
            notes.append(f"spearman undefined: {exc}")
    else:
        notes.append("fewer than 2 counties in common; spearman undefined")

    joined_dri = [c for c in dri_classes if c.fips in nri_by]
    tab, _ = cross_tabulate(joined_dri, nri_classes, k)
    return ComparisonReport(
        n=len(common),
        k=k,
        spearman_rho=rho,
        cross_tab=tab,
        divergences=divergence_report(joined_dri, nri_classes, threshold),
        divergence_threshold=threshold,
        nri_class_source=source,
        dri_only=sorted(dri_by.keys() - nri_by.keys()),
        nri_only=sorted(nri_by.keys() - dri_by.keys()),
        notes=notes,
    )
