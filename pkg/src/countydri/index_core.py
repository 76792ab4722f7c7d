"""Min-max normalization and the composite resilience index.

For county *i* with population ``P``, per-capita income ``I`` and SVI ``S``::

    dri = w * ( (P - Pmin)/(Pmax - Pmin) + 1 - (I - Imin)/(Imax - Imin) + S )

with a single weight ``w`` shared by all three terms.  ``w = 1/3`` keeps the
index in [0, 1]; ``LITERAL_WEIGHT = 0.33`` reproduces the published rounding.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from countydri.errors import ConfigError, DegenerateDomain
from countydri.ingest import CountyRecord, normalize_fips

log = logging.getLogger(__name__)

EQUAL_WEIGHT = 1.0 / 3.0
LITERAL_WEIGHT = 0.33

FULL_DATASET = "full-dataset"
ANALYSIS_SUBSET = "analysis-subset"
DOMAINS = (FULL_DATASET, ANALYSIS_SUBSET)


@dataclass(frozen=True)
class IndexConfig:
    weight: float = EQUAL_WEIGHT
    class_count: int = 5
    normalization_domain: str = FULL_DATASET
    analysis_fips: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if not self.weight > 0:
            raise ConfigError("weight must be positive")
        if isinstance(self.class_count, bool) or not isinstance(self.class_count, int) or self.class_count < 2:
            raise ConfigError("class_count must be an integer >= 2")
        if self.normalization_domain not in DOMAINS:
            raise ConfigError(f"normalization_domain must be one of {DOMAINS}")
        if self.analysis_fips is not None:
            fips = []
            for f in self.analysis_fips:
                norm = normalize_fips(f)
                if norm is None:
                    raise ConfigError(f"analysis_fips: {f!r} is not a county FIPS")
                fips.append(norm)
            object.__setattr__(self, "analysis_fips", tuple(sorted(set(fips))))
        if self.normalization_domain == ANALYSIS_SUBSET and not self.analysis_fips:
            raise ConfigError("analysis-subset normalization requires a non-empty analysis_fips")


@dataclass(frozen=True)
class NormalizationContext:
    p_min: float
    p_max: float
    i_min: float
    i_max: float
    domain_size: int


@dataclass(frozen=True)
class DriResult:
    fips: str
    pop_norm: float
    income_norm_inverted: float
    svi: float
    dri: float
    dri_complement: float


@dataclass
class DriBatch:
    """Output of :func:`compute_all` together with its diagnostics."""

    results: list[DriResult]
    context: NormalizationContext
    unknown_fips: list[str] = field(default_factory=list)
    clamped: list[str] = field(default_factory=list)


def build_context(records: Sequence[CountyRecord], config: IndexConfig) -> NormalizationContext:
    if config.normalization_domain == ANALYSIS_SUBSET:
        wanted = set(config.analysis_fips or ())
        domain = [r for r in records if r.fips in wanted]
    else:
        domain = list(records)
    if len(domain) < 2:
        raise DegenerateDomain(f"normalization domain has {len(domain)} counties; need at least 2")

    pops = [r.population for r in domain]
    incomes = [r.income for r in domain]
    ctx = NormalizationContext(
        p_min=float(min(pops)),
        p_max=float(max(pops)),
        i_min=min(incomes),
        i_max=max(incomes),
        domain_size=len(domain),
    )
    if ctx.p_min == ctx.p_max:
        raise DegenerateDomain("all counties in the domain have the same population")
    if ctx.i_min == ctx.i_max:
        raise DegenerateDomain("all counties in the domain have the same income")
    return ctx


def min_max_normalize(value: float, lo: float, hi: float) -> float:
    """Map ``value`` onto [0, 1] relative to ``[lo, hi]``, clamping outliers."""
    if not lo < hi:
        raise DegenerateDomain(f"empty normalization range [{lo}, {hi}]")
    scaled = (value - lo) / (hi - lo)
    return min(1.0, max(0.0, scaled))


def compute_dri(record: CountyRecord, ctx: NormalizationContext, config: IndexConfig) -> DriResult:
    pop_norm = min_max_normalize(record.population, ctx.p_min, ctx.p_max)
    income_inv = 1.0 - min_max_normalize(record.income, ctx.i_min, ctx.i_max)
    w = config.weight
    dri = w * (pop_norm + income_inv + record.svi)
    return DriResult(
        fips=record.fips,
        pop_norm=pop_norm,
        income_norm_inverted=income_inv,
        svi=record.svi,
        dri=dri,
        dri_complement=3.0 * w - dri,
    )


def _outside(record: CountyRecord, ctx: NormalizationContext) -> bool:
    return not (
        ctx.p_min <= record.population <= ctx.p_max and ctx.i_min <= record.income <= ctx.i_max
    )


def compute_all(records: Iterable[CountyRecord], config: IndexConfig) -> DriBatch:
    """Score every county, restricted to ``config.analysis_fips`` when given.

    Normalization bounds come from the domain selected in ``config``. FIPS
    requested for analysis but absent from ``records`` are reported in
    ``unknown_fips``; counties whose raw values fell outside the bounds (and
    were therefore clamped) are listed in ``clamped``.
    """
    records = sorted(records, key=lambda r: r.fips)
    ctx = build_context(records, config)

    targets = records
    unknown: list[str] = []
    if config.analysis_fips:
        wanted = set(config.analysis_fips)
        targets = [r for r in records if r.fips in wanted]
        unknown = sorted(wanted - {r.fips for r in records})
        if unknown:
            log.warning("analysis FIPS not found in joined records: %s", ", ".join(unknown))

    clamped = [r.fips for r in targets if _outside(r, ctx)]
    results = [compute_dri(r, ctx, config) for r in targets]
    return DriBatch(results=results, context=ctx, unknown_fips=unknown, clamped=clamped)
