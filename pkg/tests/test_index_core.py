from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from countydri.errors import ConfigError, DegenerateDomain
from countydri.index_core import (
    ANALYSIS_SUBSET,
    LITERAL_WEIGHT,
    IndexConfig,
    NormalizationContext,
    build_context,
    compute_all,
    compute_dri,
    min_max_normalize,
)
from countydri.ingest import CountyRecord
from tests.oracles import dri_exact

TOL = 1e-12

# frozen from tests.oracles.dri_exact: 1/2, 2/5, 19/30
THREE = [
    CountyRecord("12001", "A", "FL", 100_000, 40_000.0, 0.5),
    CountyRecord("12003", "B", "FL", 500_000, 60_000.0, 0.2),
    CountyRecord("12005", "C", "FL", 900_000, 80_000.0, 0.9),
]
THREE_EXPECTED = {"12001": 0.5, "12003": 0.4, "12005": 19 / 30}


def rec(fips: int, pop: int, income: float, svi: float) -> CountyRecord:
    return CountyRecord(f"{fips:05d}", f"c{fips}", "FL", pop, income, svi)


def test_build_context_bounds():
    recs = [rec(12001, 100, 1.0, 0.1), rec(12003, 500, 2.0, 0.1), rec(12005, 900, 3.0, 0.1)]
    ctx = build_context(recs, IndexConfig())
    assert (ctx.p_min, ctx.p_max, ctx.i_min, ctx.i_max, ctx.domain_size) == (100, 900, 1.0, 3.0, 3)


def test_build_context_single_record():
    with pytest.raises(DegenerateDomain):
        build_context([rec(12001, 1, 1.0, 0.1)], IndexConfig())


@pytest.mark.parametrize("pops,incomes", [((5, 5), (1.0, 2.0)), ((1, 5), (2.0, 2.0))])
def test_build_context_flat_variable(pops, incomes):
    recs = [rec(12001 + 2 * i, p, inc, 0.1) for i, (p, inc) in enumerate(zip(pops, incomes))]
    with pytest.raises(DegenerateDomain):
        build_context(recs, IndexConfig())


def test_full_dataset_bounds_ignore_analysis_subset():
    recs = [rec(12001 + 2 * i, 1000 + i, 30_000.0 + 10 * i, 0.5) for i in range(67)]
    subset = tuple(r.fips for r in recs[10:33])
    ctx = build_context(recs, IndexConfig(analysis_fips=subset))
    assert ctx.domain_size == 67
    assert (ctx.p_min, ctx.p_max) == (1000, 1066)
    sub_ctx = build_context(recs, IndexConfig(normalization_domain=ANALYSIS_SUBSET, analysis_fips=subset))
    assert sub_ctx.domain_size == 23
    assert (sub_ctx.p_min, sub_ctx.p_max) == (1010, 1032)


@pytest.mark.parametrize("value,expected", [(100, 0.0), (900, 1.0), (500, 0.5), (50, 0.0), (1000, 1.0)])
def test_min_max_normalize(value, expected):
    assert min_max_normalize(value, 100, 900) == expected


def test_min_max_degenerate():
    with pytest.raises(DegenerateDomain):
        min_max_normalize(1, 5, 5)


def test_three_county_fixture():
    ctx = build_context(THREE, IndexConfig())
    for r in THREE:
        res = compute_dri(r, ctx, IndexConfig())
        assert res.dri == pytest.approx(THREE_EXPECTED[r.fips], abs=TOL)
        assert res.dri_complement == pytest.approx(1 - THREE_EXPECTED[r.fips], abs=TOL)
    assert compute_dri(THREE[1], ctx, IndexConfig()).pop_norm == 0.5


def test_extremes():
    ctx = NormalizationContext(100, 900, 40_000.0, 80_000.0, 2)
    low = compute_dri(rec(12001, 100, 80_000.0, 0.0), ctx, IndexConfig())
    high = compute_dri(rec(12003, 900, 40_000.0, 1.0), ctx, IndexConfig())
    assert low.dri == 0.0
    assert high.dri == pytest.approx(1.0, abs=TOL)


def test_compute_all_sorted_and_filtered():
    batch = compute_all(list(reversed(THREE)), IndexConfig())
    assert [r.fips for r in batch.results] == ["12001", "12003", "12005"]
    for r in batch.results:
        assert r.dri == pytest.approx(THREE_EXPECTED[r.fips], abs=TOL)

    batch = compute_all(THREE, IndexConfig(analysis_fips=("12003", "12099")))
    assert [r.fips for r in batch.results] == ["12003"]
    assert batch.unknown_fips == ["12099"]
    assert batch.results[0].dri == pytest.approx(0.4, abs=TOL)


def test_compute_all_no_filter_keeps_everything():
    recs = [rec(12001 + 2 * i, 1000 + i, 30_000.0 + i, 0.5) for i in range(67)]
    assert len(compute_all(recs, IndexConfig()).results) == 67


def test_subset_domain_clamps():
    # C lies outside bounds taken from A and B only
    cfg = IndexConfig(normalization_domain=ANALYSIS_SUBSET, analysis_fips=("12001", "12003"))
    ctx = build_context(THREE, cfg)
    res = compute_dri(THREE[2], ctx, cfg)
    assert res.pop_norm == 1.0 and res.income_norm_inverted == 0.0
    batch = compute_all(THREE, IndexConfig(normalization_domain=ANALYSIS_SUBSET, analysis_fips=("12001", "12003", "12005")))
    assert batch.clamped == []


def test_config_validation():
    with pytest.raises(ConfigError):
        IndexConfig(weight=0)
    with pytest.raises(ConfigError):
        IndexConfig(class_count=1)
    with pytest.raises(ConfigError):
        IndexConfig(normalization_domain=ANALYSIS_SUBSET)
    assert IndexConfig(analysis_fips=("1001",)).analysis_fips == ("01001",)


# ---------------------------------------------------------------- properties

county = st.tuples(
    st.integers(0, 5_000_000),
    st.integers(1_000, 200_000),
    st.integers(0, 10_000).map(lambda x: x / 10_000),
)


def _records(rows):
    return [rec(10001 + 2 * i, p, float(inc), s) for i, (p, inc, s) in enumerate(rows)]


def _nondegenerate(rows):
    return len({r[0] for r in rows}) > 1 and len({r[1] for r in rows}) > 1


@settings(max_examples=200)
@given(st.lists(county, min_size=2, max_size=40))
def test_matches_exact_oracle(rows):
    assume(_nondegenerate(rows))
    recs = _records(rows)
    pops = [r.population for r in recs]
    incs = [r.income for r in recs]
    for res, r in zip(compute_all(recs, IndexConfig()).results, recs):
        assert 0.0 <= res.dri <= 1.0
        assert res.dri == pytest.approx(float(dri_exact(r.population, r.income, Fraction(r.svi), pops, incs)), abs=TOL)
        assert res.dri == pytest.approx((res.pop_norm + res.income_norm_inverted + res.svi) / 3, abs=TOL)


@settings(max_examples=100)
@given(st.lists(county, min_size=2, max_size=40), st.integers(1, 20), st.integers(0, 50_000))
def test_income_affine_invariance(rows, a, b):
    assume(_nondegenerate(rows))
    recs = _records(rows)
    moved = [CountyRecord(r.fips, r.name, r.state, r.population, a * r.income + b, r.svi) for r in recs]
    for x, y in zip(compute_all(recs, IndexConfig()).results, compute_all(moved, IndexConfig()).results):
        assert abs(x.dri - y.dri) <= TOL


@settings(max_examples=100)
@given(st.lists(county, min_size=2, max_size=40), st.randoms())
def test_permutation_invariance(rows, rnd):
    assume(_nondegenerate(rows))
    recs = _records(rows)
    shuffled = recs[:]
    rnd.shuffle(shuffled)
    assert compute_all(recs, IndexConfig()).results == compute_all(shuffled, IndexConfig()).results


@settings(max_examples=100)
@given(st.lists(county, min_size=2, max_size=40))
def test_literal_weight_relation(rows):
    assume(_nondegenerate(rows))
    recs = _records(rows)
    exact = compute_all(recs, IndexConfig()).results
    literal = compute_all(recs, IndexConfig(weight=LITERAL_WEIGHT)).results
    for e, lit in zip(exact, literal):
        assert abs(lit.dri - 0.99 * e.dri) <= TOL
        assert lit.dri <= 0.99 + TOL
        assert lit.dri_complement == pytest.approx(0.99 - lit.dri, abs=TOL)


@settings(max_examples=200)
@given(county, st.integers(1, 1000), st.integers(1, 1000), st.integers(1, 100))
def test_monotone_under_fixed_context(c, dp, di, ds):
    ctx = NormalizationContext(0.0, 5_001_000.0, 500.0, 201_000.0, 10)
    p, i, s = c
    base = compute_dri(rec(12001, p, float(i), s), ctx, IndexConfig()).dri
    assert compute_dri(rec(12001, p + dp, float(i), s), ctx, IndexConfig()).dri > base
    assert compute_dri(rec(12001, p, float(i + di), s), ctx, IndexConfig()).dri < base
    if s < 1.0:
        s2 = min(1.0, s + ds / 1000)
        assert compute_dri(rec(12001, p, float(i), s2), ctx, IndexConfig()).dri > base
