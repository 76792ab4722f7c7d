import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from countydri.classify import FIVE_CLASS_LABELS, classify, quantile_breaks
from countydri.errors import InvalidK, LabelMismatch
from tests.oracles import nearest_rank_breaks, quantile_classes


def _by_fips(values):
    return {f"{12001 + 2 * i:05d}": v for i, v in enumerate(values)}


def test_breaks_one_to_ten():
    # nearest-rank oracle gives [2, 4, 6, 8]
    assert nearest_rank_breaks(range(1, 11), 5) == [2, 4, 6, 8]
    assert quantile_breaks(list(range(1, 11)), 5) == [2, 4, 6, 8]


def test_breaks_constant_and_single():
    assert quantile_breaks([3.5] * 7, 4) == [3.5, 3.5, 3.5]
    assert quantile_breaks([5], 2) == [5]


def test_breaks_invalid_k():
    with pytest.raises(InvalidK):
        quantile_breaks([1, 2], 1)


def test_classes_one_to_ten():
    out = classify(_by_fips(range(1, 11)), 5)
    assert [a.class_index for a in sorted(out, key=lambda a: a.value)] == [1, 1, 2, 2, 3, 3, 4, 4, 5, 5]
    assert out[0].class_label == "very low"
    assert out[-1].class_label == "very high"


def test_all_equal_values_land_in_class_one():
    out = classify(_by_fips([0.42] * 6), 5)
    assert {a.class_index for a in out} == {1}


def test_fewer_values_than_classes():
    out = classify(_by_fips([1.0, 2.0]), 5)
    assert len({a.class_index for a in out}) <= 2


def test_labels():
    with pytest.raises(LabelMismatch):
        classify(_by_fips([1, 2, 3]), 3)
    with pytest.raises(LabelMismatch):
        classify(_by_fips([1, 2, 3]), 5, ["a", "b"])
    out = classify(_by_fips([1, 2, 3]), 3, ["lo", "mid", "hi"])
    assert [a.class_label for a in out] == ["lo", "mid", "hi"]
    assert FIVE_CLASS_LABELS[2] == "moderate"


def test_output_sorted_by_fips():
    values = {"12005": 1.0, "12001": 3.0, "12003": 2.0}
    assert [a.fips for a in classify(values, 5)] == ["12001", "12003", "12005"]


values_strategy = st.lists(st.integers(-20, 20).map(float), min_size=1, max_size=100)


@settings(max_examples=300)
@given(values_strategy, st.integers(2, 9))
def test_matches_oracle_and_invariants(values, k):
    vals = _by_fips(values)
    labels = [f"c{i}" for i in range(k)]
    out = {a.fips: a for a in classify(vals, k, labels)}
    assert {f: a.class_index for f, a in out.items()} == quantile_classes(vals, k)
    by_value = {}
    for a in out.values():
        assert 1 <= a.class_index <= k
        assert by_value.setdefault(a.value, a.class_index) == a.class_index
    ordered = sorted(out.values(), key=lambda a: a.value)
    assert all(x.class_index <= y.class_index for x, y in zip(ordered, ordered[1:]))


@settings(max_examples=100)
@given(values_strategy, st.integers(2, 7))
def test_rank_invariance(values, k):
    labels = [str(i) for i in range(k)]
    a = classify(_by_fips(values), k, labels)
    b = classify(_by_fips([v ** 3 + 7 for v in values]), k, labels)
    assert [x.class_index for x in a] == [y.class_index for y in b]
