import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankbench import expr as E
from rankbench.metrics import (
    ALL_SLICE,
    EmptyInput,
    LengthMismatch,
    MetricSpec,
    MetricValue,
    SliceSpec,
    UnknownBaseline,
    UnknownMetric,
    cross_entropy,
    density_at_k,
    evaluate_metric,
    metric_table,
    ndcg_at_k,
    slice_members,
    top_moved_slices,
)
from rankbench.ranker import ModelSpec

from conftest import make_metrics, make_models, make_objectives, make_slices
from oracles import brute_force_ndcg

# ---------------------------------------------------------------------------
# ndcg_at_k
# ---------------------------------------------------------------------------


def test_ndcg_perfect_ranking_is_one():
    assert ndcg_at_k([3.0, 2.0, 1.0], 3) == 1.0
    assert ndcg_at_k([5.0], 1) == 1.0


def test_ndcg_worst_pair():
    assert ndcg_at_k([0.0, 1.0], 2) == pytest.approx(1 / math.log2(3), abs=1e-9)


def test_ndcg_all_zero_gains():
    assert ndcg_at_k([0.0, 0.0, 0.0], 8) == 1.0


def test_ndcg_negative_gains_clamped():
    assert ndcg_at_k([-1.0, 2.0], 2) == ndcg_at_k([0.0, 2.0], 2)
    assert ndcg_at_k([-5.0, -2.0], 4) == 1.0


def test_ndcg_k_validation():
    with pytest.raises(ValueError):
        ndcg_at_k([1.0], 0)


@given(
    st.lists(st.floats(min_value=-2, max_value=10, allow_nan=False), min_size=0, max_size=16),
    st.integers(min_value=1, max_value=8),
)
@settings(max_examples=300)
def test_ndcg_matches_brute_force_and_range(gains, k):
    got = ndcg_at_k(gains, k)
    assert got == pytest.approx(brute_force_ndcg(gains, k), abs=1e-9)
    assert 0.0 <= got <= 1.0


@given(
    st.lists(st.floats(min_value=0, max_value=5, allow_nan=False), min_size=2, max_size=16),
    st.integers(min_value=1, max_value=8),
    st.data(),
)
@settings(max_examples=150)
def test_ndcg_rank_invariant_below_k(gains, k, data):
    if len(gains) <= k:
        gains = gains + [0.0] * (k + 1 - len(gains))
    tail = gains[k:]
    perm = data.draw(st.permutations(tail))
    assert ndcg_at_k(gains, k) == pytest.approx(
        ndcg_at_k(gains[:k] + list(perm), k), abs=1e-12
    )


# ---------------------------------------------------------------------------
# density_at_k
# ---------------------------------------------------------------------------


def test_density_three_of_eight():
    values = [1, 0, 1, 0, 0, 1, 0, 0, 1, 1]
    assert density_at_k(values, 8) == pytest.approx(3 / 8)


def test_density_none_qualifying():
    assert density_at_k([0, 0, 0], 8) == 0.0


def test_density_short_list_not_penalized():
    assert density_at_k([1, 1, 1, 1, 1], 8) == 1.0


@given(
    st.lists(st.sampled_from([0.0, 1.0]), min_size=1, max_size=20),
    st.integers(min_value=1, max_value=10),
    st.data(),
)
@settings(max_examples=150)
def test_density_monotone_in_qualifying_items(values, k, data):
    depth = min(k, len(values))
    position = data.draw(st.integers(min_value=0, max_value=depth - 1))
    improved = list(values)
    improved[position] = 1.0
    assert density_at_k(improved, k) >= density_at_k(values, k)
    assert 0.0 <= density_at_k(values, k) <= 1.0


# ---------------------------------------------------------------------------
# cross_entropy
# ---------------------------------------------------------------------------


def test_cross_entropy_perfect_prediction():
    assert cross_entropy([1.0], [1.0]) < 1e-10
    assert cross_entropy([0.0], [0.0]) < 1e-10


def test_cross_entropy_coin_flip():
    assert cross_entropy([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)


def test_cross_entropy_clipped_at_epsilon():
    assert cross_entropy([1.0], [0.0]) == pytest.approx(-math.log(1e-12), abs=1e-6)
    assert cross_entropy([1.0], [0.0]) == pytest.approx(27.631021, abs=1e-4)


def test_cross_entropy_errors():
    with pytest.raises(LengthMismatch):
        cross_entropy([1.0], [0.5, 0.5])
    with pytest.raises(EmptyInput):
        cross_entropy([], [])


@given(
    st.lists(st.sampled_from([0.0, 1.0]), min_size=1, max_size=12),
    st.data(),
)
@settings(max_examples=150)
def test_cross_entropy_nonnegative_zero_iff_perfect(labels, data):
    probs = data.draw(
        st.lists(
            st.floats(min_value=0, max_value=1),
            min_size=len(labels),
            max_size=len(labels),
        )
    )
    value = cross_entropy(labels, probs)
    assert value >= 0.0
    if all(abs(r - p) <= 1e-12 for r, p in zip(labels, probs)):
        assert value < 1e-10
    if any(abs(r - p) > 1e-3 for r, p in zip(labels, probs)):
        assert value > 0.0


# ---------------------------------------------------------------------------
# slices
# ---------------------------------------------------------------------------


def test_slice_members_quantity_regex(small_table):
    spec = make_slices()["quantities"]
    assert slice_members(spec, small_table) == {"30 quart coolers"}


def test_slice_members_tautology_and_contradiction(small_table):
    assert slice_members(SliceSpec("all", E.parse("1 == 1")), small_table) == {
        "30 quart coolers",
        "uconn hoodie",
    }
    assert slice_members(SliceSpec("none", E.parse("1 == 0")), small_table) == set()


# ---------------------------------------------------------------------------
# evaluate_metric
# ---------------------------------------------------------------------------


def per_query_ndcg_oracle(table, objectives, model, gain_column, k=8):
    """Rank with plain python, compute brute-force NDCG per query."""
    from rankbench.ranker import rank, score_items

    values = []
    for group in table.groups:
        ranking = rank(score_items(model, objectives, group, table), group.query_id)
        gains_by_item = {i.item_id: i.features[gain_column] for i in group.items}
        values.append(brute_force_ndcg([gains_by_item[i] for i in ranking.item_ids], k))
    return values


def test_evaluate_metric_mean_over_members(small_table):
    objectives = make_objectives()
    model = make_models()["baseline"]
    metric = make_metrics()["ndcg_purchase_prob"]
    got = evaluate_metric(metric, model, None, small_table, objectives)
    expected = per_query_ndcg_oracle(
        small_table, objectives, model, "purchase_probability"
    )
    assert got.query_count == 2
    assert got.value == pytest.approx(sum(expected) / 2, abs=1e-9)


def test_evaluate_metric_single_member_slice(small_table):
    objectives = make_objectives()
    model = make_models()["baseline"]
    metric = make_metrics()["exact_density"]
    spec = make_slices()["quantities"]
    got = evaluate_metric(metric, model, spec, small_table, objectives)
    assert got.query_count == 1
    # baseline ranks cooler-a (S) first; 2 of 3 items are exact
    assert got.value == pytest.approx(2 / 3, abs=1e-9)


def test_evaluate_metric_empty_slice_undefined(small_table):
    objectives = make_objectives()
    model = make_models()["baseline"]
    metric = make_metrics()["exact_density"]
    empty = SliceSpec("none", E.parse("1 == 0"))
    got = evaluate_metric(metric, model, empty, small_table, objectives)
    assert not got.defined
    assert got.query_count == 0


def test_evaluate_metric_mean_kind(small_table):
    objectives = make_objectives()
    model = make_models()["baseline"]
    metric = MetricSpec("avg_rating_top2", "mean", E.parse("review_rating"), k=2)
    got = evaluate_metric(metric, model, None, small_table, objectives)
    assert got.defined
    # baseline order coolers: a,b,c -> mean(4.6, 4.1); hoodies: a,b,c -> mean(2.1, 4.8)
    assert got.value == pytest.approx(((4.6 + 4.1) / 2 + (2.1 + 4.8) / 2) / 2, abs=1e-9)


def test_evaluate_metric_cross_entropy_kind(small_table):
    objectives = make_objectives()
    model = make_models()["baseline"]
    metric = MetricSpec(
        "click_ce",
        "cross_entropy",
        E.parse("esci_label == 'E'"),
        E.parse("click_probability"),
    )
    got = evaluate_metric(metric, model, None, small_table, objectives)
    expected = []
    for g in small_table.groups:
        labels = [1.0 if i.features["esci_label"] == "E" else 0.0 for i in g.items]
        probs = [i.features["click_probability"] for i in g.items]
        expected.append(cross_entropy(labels, probs))
    assert got.value == pytest.approx(sum(expected) / len(expected), abs=1e-9)


# ---------------------------------------------------------------------------
# metric_table
# ---------------------------------------------------------------------------


def test_metric_table_self_baseline_zero_deltas(small_table):
    objectives = make_objectives()
    models = [make_models()["baseline"]]
    table = metric_table(
        models, "baseline", list(make_metrics().values()), [], small_table, objectives
    )
    assert all(delta == 0.0 for delta in table.deltas.values())


def test_metric_table_shape_and_counts(small_table):
    objectives = make_objectives()
    models = list(make_models().values())
    metrics = list(make_metrics().values())[:2]
    slices = [
        make_slices()["quantities"],
        SliceSpec("hoodies", E.parse("matches(query_text, 'hoodie')")),
    ]
    table = metric_table(models, "baseline", metrics, slices, small_table, objectives)
    assert table.slices == (ALL_SLICE, "quantities", "hoodies")
    assert len(table.values) == 2 * 2 * 3
    assert table.value("baseline", "ndcg_click_prob", ALL_SLICE).query_count == 2
    for s in table.slices:
        assert table.value("baseline", "ndcg_click_prob", s).query_count <= 2


def test_metric_table_tradeoff_direction(tradeoff_table):
    # raising the exact weight lifts exact density and drops purchase NDCG
    objectives = make_objectives()
    models = list(make_models().values())
    table = metric_table(
        models,
        "baseline",
        list(make_metrics().values()),
        list(make_slices().values()),
        tradeoff_table,
        objectives,
    )
    # coolers move 2/8 -> 3/8, hoodies stay, so the ALL mean moves by 1/16
    assert table.delta("candidate", "exact_density", ALL_SLICE) == pytest.approx(
        (3 / 8 - 2 / 8) / 2, abs=1e-9
    )
    assert table.delta("candidate", "ndcg_purchase_prob", ALL_SLICE) < 0
    assert table.delta("candidate", "exact_density", "quantities") == pytest.approx(
        1 / 8, abs=1e-9
    )


def test_metric_table_unknown_baseline(small_table):
    with pytest.raises(UnknownBaseline):
        metric_table(
            [make_models()["baseline"]],
            "nope",
            list(make_metrics().values()),
            [],
            small_table,
            make_objectives(),
        )


def test_metric_table_undefined_cells_have_no_delta(small_table):
    objectives = make_objectives()
    models = list(make_models().values())
    empty = SliceSpec("none", E.parse("1 == 0"))
    table = metric_table(
        models, "baseline", [make_metrics()["exact_density"]], [empty], small_table, objectives
    )
    assert not table.value("candidate", "exact_density", "none").defined
    assert table.delta("candidate", "exact_density", "none") is None


def test_partition_consistency(tradeoff_table):
    objectives = make_objectives()
    models = list(make_models().values())
    parts = [
        SliceSpec("p1", E.parse("matches(query_text, '^30 quart coolers$')")),
        SliceSpec("p2", E.parse("matches(query_text, '^uconn hoodie$')")),
    ]
    table = metric_table(
        models, "baseline", list(make_metrics().values()), parts, tradeoff_table, objectives
    )
    for model in table.models:
        for metric in table.metrics:
            all_cell = table.value(model, metric, ALL_SLICE)
            weighted = 0.0
            total = 0
            for part in ("p1", "p2"):
                cell = table.value(model, metric, part)
                weighted += cell.value * cell.query_count
                total += cell.query_count
            assert total == all_cell.query_count
            assert all_cell.value == pytest.approx(weighted / total, abs=1e-9)


# ---------------------------------------------------------------------------
# top_moved_slices
# ---------------------------------------------------------------------------


def fake_table(deltas):
    values = {}
    table_deltas = {}
    for slice_name, delta in deltas.items():
        values[("m", "metric", slice_name)] = MetricValue(0.5, 1)
        values[("base", "metric", slice_name)] = MetricValue(0.5, 1)
        table_deltas[("m", "metric", slice_name)] = delta
        table_deltas[("base", "metric", slice_name)] = 0.0 if delta is not None else None
    from rankbench.metrics import MetricTable

    return MetricTable(
        baseline="base",
        models=("base", "m"),
        metrics=("metric",),
        slices=tuple(deltas),
        values=values,
        deltas=table_deltas,
    )


def test_top_moved_orders_by_absolute_delta():
    table = fake_table({"ALL": -0.02, "quantities": 0.05, "hoodies": -0.01})
    assert top_moved_slices(table, "metric", 2) == ["quantities", "ALL"]


def test_top_moved_tie_breaks_by_name():
    table = fake_table({"b": 0.5, "a": -0.5, "c": 0.5})
    assert top_moved_slices(table, "metric", 3) == ["a", "b", "c"]


def test_top_moved_limit_and_undefined():
    table = fake_table({"a": 0.1, "b": None, "c": 0.3})
    assert top_moved_slices(table, "metric", 10) == ["c", "a"]


def test_top_moved_unknown_metric():
    with pytest.raises(UnknownMetric):
        top_moved_slices(fake_table({"a": 0.1}), "nope", 1)
