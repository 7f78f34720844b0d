"""Acceptance suite: every criterion runs at its stated tolerance and prints
one pass/fail line. Run with `pytest tests/test_acceptance.py -v -s`.
"""

import json
import math
import random
import re
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from rankbench import expr as E
from rankbench.analysis import session_metrics
from rankbench.config import open_workspace_file
from rankbench.dataset import ColumnSchema, DatasetTable, ItemRow, QueryGroup
from rankbench.metrics import ALL_SLICE, MetricSpec, SliceSpec, ndcg_at_k
from rankbench.ranker import ModelSpec, ObjectiveSpec, attribute, rank, score_items
from rankbench.service import create_app
from rankbench.workspace import SessionEvent, SetWeight, Workspace

from conftest import make_metrics, make_objectives
from oracles import (
    brute_force_ndcg,
    random_ast,
    random_numeric_expression,
    shunting_yard_eval,
)
from session_fixture import (
    ANECDOTES,
    EXPECTED_M1,
    EXPECTED_M2,
    EXPECTED_M3,
    EXPECTED_M4,
    EXPECTED_M5,
    T0,
    scripted_events,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def report(name: str, detail: str = ""):
    suffix = f" ({detail})" if detail else ""
    print(f"[PASS] {name}{suffix}")


# ---------------------------------------------------------------------------
# helpers for random workspaces over plain numeric columns
# ---------------------------------------------------------------------------


def numeric_table(rng: random.Random, n_groups: int, n_items: int, n_features: int):
    schema = [
        ColumnSchema("qid", "categorical", "query_key"),
        ColumnSchema("iid", "categorical", "item_key"),
    ] + [ColumnSchema(f"f{j}", "numeric", "item_feature") for j in range(n_features)]
    groups = []
    for g in range(n_groups):
        items = tuple(
            ItemRow(
                f"g{g}-i{i}",
                {f"f{j}": round(rng.uniform(-10, 10), 6) for j in range(n_features)},
            )
            for i in range(n_items)
        )
        groups.append(QueryGroup(f"g{g}", {}, items))
    return DatasetTable(schema, groups)


def numeric_objectives(n_features):
    return {f"f{j}": ObjectiveSpec(f"f{j}", E.parse(f"f{j}")) for j in range(n_features)}


# ---------------------------------------------------------------------------
# 1. NDCG oracle equivalence
# ---------------------------------------------------------------------------


def test_ndcg_oracle_equivalence_10000_cases():
    rng = random.Random(1234)
    started = time.perf_counter()
    worst = 0.0
    for _ in range(10_000):
        n = rng.randint(0, 16)
        gains = [rng.uniform(-1, 10) for _ in range(n)]
        k = rng.randint(1, 8)
        got = ndcg_at_k(gains, k)
        want = brute_force_ndcg(gains, k)
        worst = max(worst, abs(got - want))
        assert abs(got - want) <= 1e-9
        assert 0.0 <= got <= 1.0
    elapsed = time.perf_counter() - started
    assert elapsed < 5.0, f"took {elapsed:.2f}s"
    report(
        "NDCG oracle equivalence",
        f"10000 cases, max |diff| {worst:.2e}, {elapsed:.2f}s",
    )


# ---------------------------------------------------------------------------
# 2. Attribution completeness
# ---------------------------------------------------------------------------


def test_attribution_completeness_1000_pairs():
    rng = random.Random(99)
    checked = 0
    while checked < 1_000:
        n_features = rng.randint(1, 6)
        table = numeric_table(rng, 1, rng.randint(1, 8), n_features)
        objectives = numeric_objectives(n_features)
        model = ModelSpec.from_weights(
            "m", {f"f{j}": round(rng.uniform(-4, 4), 4) for j in range(n_features)}
        )
        for item in score_items(model, objectives, table.groups[0], table):
            total = sum(c.contribution for c in item.components)
            assert abs(total - item.combined) <= 1e-9
            attr = attribute(item)
            if not attr.all_zero:
                share_sum = sum(share for _, _, share in attr.entries)
                assert abs(share_sum - 1.0) <= 1e-9
            checked += 1
    report("Attribution completeness", f"{checked} (model, item) pairs")


# ---------------------------------------------------------------------------
# 3. Scale/argmax invariance
# ---------------------------------------------------------------------------


def test_scale_invariance_100_workspaces():
    rng = random.Random(7)
    for _ in range(100):
        n_features = rng.randint(1, 5)
        table = numeric_table(rng, rng.randint(1, 6), rng.randint(2, 12), n_features)
        objectives = numeric_objectives(n_features)
        weights = {f"f{j}": round(rng.uniform(-3, 3), 4) for j in range(n_features)}
        c = math.exp(rng.uniform(math.log(1e-3), math.log(1e3)))
        model = ModelSpec.from_weights("m", weights)
        scaled = ModelSpec.from_weights("ms", {k: w * c for k, w in weights.items()})
        for group in table.groups:
            r1 = rank(score_items(model, objectives, group, table), group.query_id)
            r2 = rank(score_items(scaled, objectives, group, table), group.query_id)
            assert r1.item_ids == r2.item_ids
    report("Scale/argmax invariance", "100 random workspaces, c in [1e-3, 1e3]")


# ---------------------------------------------------------------------------
# 4. Partition consistency on the shipped fixture
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fixture_workspace():
    return open_workspace_file(FIXTURES / "workspace.yaml", telemetry_dir=None)


def test_partition_consistency_random_3_slices(fixture_workspace):
    ws = fixture_workspace
    queries = [str(g.query_id) for g in ws.dataset.groups]
    rng = random.Random(2024)
    trials = 5
    for _ in range(trials):
        while True:
            assignment = {q: rng.randint(0, 2) for q in queries}
            if len(set(assignment.values())) == 3:
                break
        parts = []
        for part in range(3):
            members = [q for q in queries if assignment[q] == part]
            pattern = "^(" + "|".join(re.escape(q) for q in members) + ")$"
            parts.append(SliceSpec(f"part{part}", E.parse(f"matches(query_text, '{pattern}')")))
        from rankbench.metrics import metric_table

        table = metric_table(
            list(ws.models.values()),
            ws.baseline,
            list(ws.metrics.values()),
            parts,
            ws.dataset,
            ws.objectives,
        )
        for model in table.models:
            for metric in table.metrics:
                all_cell = table.value(model, metric, ALL_SLICE)
                weighted = 0.0
                count = 0
                for part in ("part0", "part1", "part2"):
                    cell = table.value(model, metric, part)
                    weighted += cell.value * cell.query_count
                    count += cell.query_count
                assert count == all_cell.query_count
                assert abs(all_cell.value - weighted / count) <= 1e-9
    report("Partition consistency", f"{trials} random 3-way partitions of 52 queries")


# ---------------------------------------------------------------------------
# 5. Trade-off fixture scenario
# ---------------------------------------------------------------------------


def test_tradeoff_fixture_reproduces_scenario(fixture_workspace):
    ws = fixture_workspace
    expected = json.loads((FIXTURES / "expected.json").read_text())
    assert len(ws.dataset.groups) >= 50
    assert all(len(g.items) == 16 for g in ws.dataset.groups)

    change = expected["weight_change"]
    assert dict(ws.models["candidate"].terms)[change["objective"]] == change["old"]
    ws.mutate(SetWeight("candidate", change["objective"], change["new"]))
    table = ws.table()

    for slice_name in ("ALL", "quantities"):
        for metric, pinned in expected["deltas"][slice_name].items():
            engine = table.delta("candidate", metric, slice_name)
            assert abs(engine - pinned) <= 1e-9, (metric, slice_name, engine, pinned)
    assert table.delta("candidate", "exact_density", ALL_SLICE) > 0
    assert table.delta("candidate", "ndcg_purchase_prob", ALL_SLICE) < 0

    planted = expected["planted"]
    view = ws.side_by_side(planted["query"], "baseline", "candidate", record=False)
    movements = {m["item_id"]: m["movement"] for m in view["diff"]["movements"]}
    for item in planted["items"]:
        assert movements[item] < 0
        assert movements[item] == planted["movements"][item]
    # restore for other module-scoped users
    ws.mutate(SetWeight("candidate", change["objective"], change["old"]))
    report(
        "Trade-off fixture",
        "0.2->1.5 raises exact_density, drops ndcg_purchase_prob, demotes both planted items",
    )


# ---------------------------------------------------------------------------
# 6. Analysis measures
# ---------------------------------------------------------------------------


def test_analysis_measures_hand_computed():
    events = scripted_events()
    assert len(events) >= 30
    assert {e.action for e in events} == {
        "objective.add", "objective.edit", "objective.remove",
        "model.weight_change", "model.term_add", "model.term_remove",
        "metric.define", "metric.view", "slice.define", "slice.view",
        "example.view", "table.view",
    }
    metrics = session_metrics(events, ANECDOTES, T0)
    assert metrics.m1_distinct_tradeoffs == EXPECTED_M1
    assert metrics.m2_distinct_bigstep == EXPECTED_M2
    assert abs(metrics.m3_evals_per_tradeoff - EXPECTED_M3) <= 1e-9
    assert metrics.m4_additional_evals == EXPECTED_M4
    assert abs(metrics.m5_balance_kl - EXPECTED_M5) <= 1e-6

    def spot(events):
        return session_metrics(events, [], T0).m5_balance_kl

    def ev(seq, action, payload):
        return SessionEvent(seq, seq, "p", action, payload)

    uniform = [ev(1, "example.view", {"query_id": "q"}), ev(2, "table.view", {"slice": "ALL"})]
    assert abs(spot(uniform) - 0.0) <= 1e-6
    all_metric = [ev(1, "table.view", {"slice": "ALL"}), ev(2, "metric.view", {"name": "m"})]
    assert abs(spot(all_metric) - math.log(2)) <= 1e-6
    split_75_25 = [
        ev(1, "example.view", {"query_id": "q1"}),
        ev(2, "example.view", {"query_id": "q2"}),
        ev(3, "example.view", {"query_id": "q3"}),
        ev(4, "table.view", {"slice": "ALL"}),
    ]
    want = 0.75 * math.log(1.5) + 0.25 * math.log(0.5)
    assert abs(spot(split_75_25) - want) <= 1e-6
    assert abs(want - 0.1308) <= 1e-4
    report(
        "Analysis measures",
        f"34-event log: M1={metrics.m1_distinct_tradeoffs} M2={metrics.m2_distinct_bigstep} "
        f"M3={metrics.m3_evals_per_tradeoff:.4f} M4={metrics.m4_additional_evals} "
        f"M5={metrics.m5_balance_kl:.6f}; spots 0, ln2, 0.1308",
    )


# ---------------------------------------------------------------------------
# 7. Parser properties
# ---------------------------------------------------------------------------


def test_parser_round_trip_1000_asts():
    rng = random.Random(31337)
    columns = (["alpha", "beta", "gamma", "delta"], ["label", "title"])
    for _ in range(1_000):
        ast = random_ast(rng, columns)
        assert E.parse(E.format_expr(ast)) == ast
    report("Parser round-trip", "1000 random ASTs, format -> parse is identity")


def test_parser_precedence_1000_expressions():
    rng = random.Random(4242)
    variables = ["v0", "v1", "v2", "v3", "v4"]
    for _ in range(1_000):
        text = random_numeric_expression(rng, variables)
        bindings = {v: round(rng.uniform(-6, 6), 4) for v in variables}
        want = shunting_yard_eval(text, bindings)
        got = E.evaluate(E.parse(text), E.EvalContext(bindings))
        assert abs(got - want) <= 1e-9 * max(1.0, abs(want)), text
    report("Parser precedence", "1000 random expressions vs shunting-yard evaluator")


# ---------------------------------------------------------------------------
# 8. Event sourcing
# ---------------------------------------------------------------------------


def test_event_sourcing_replay_bit_identical():
    live = open_workspace_file(FIXTURES / "workspace.yaml", telemetry_dir=None)
    with TestClient(create_app(live)) as client:
        client.put("/models/candidate/terms/exact_purchase", json={"weight": 1.5})
        client.get("/table")
        client.put(
            "/objectives/rated_purchase",
            json={"expr": "(review_rating > 4) * purchase_probability"},
        )
        client.put("/models/candidate/terms/rated_purchase", json={"weight": 0.4})
        client.get(
            "/compare",
            params={"query": "30 quart coolers", "a": "baseline", "b": "candidate"},
        )
        client.put(
            "/objectives/rated_purchase",
            json={"expr": "(review_rating > 4.2) * purchase_probability"},
        )
        client.put("/slices/hoodies", json={"predicate": "matches(query_text, 'hoodie')"})
        client.put(
            "/metrics/rated_top4", json={"kind": "mean", "expr": "(review_rating > 4)", "k": 4}
        )
        client.put("/models/candidate/terms/exact_purchase", json={"weight": 0.8})
        client.delete("/models/candidate/terms/rated_purchase")
        client.delete("/objectives/rated_purchase")
        client.get("/table", params={"slice": "hoodies"})

    recorded = list(live.events)
    assert live.revision == 9

    replayed = open_workspace_file(FIXTURES / "workspace.yaml", telemetry_dir=None)
    replayed.replay(recorded)
    assert replayed.state_dict() == live.state_dict()
    live_cells = live.table_dict()
    replay_cells = replayed.table_dict()
    assert live_cells == replay_cells  # exact float equality, bit-identical
    report(
        "Event sourcing",
        f"replayed {live.revision} mutations; state and metric table bit-identical",
    )


# ---------------------------------------------------------------------------
# 9. Desk-scale latency budget
# ---------------------------------------------------------------------------


def test_recompute_latency_1000_queries():
    rng = random.Random(555)
    labels = ["E", "S", "C", "I"]
    groups = []
    for g in range(1_000):
        items = []
        for i in range(16):
            label = labels[rng.randint(0, 3)]
            purchase = round(rng.uniform(0, 0.9), 6)
            items.append(
                ItemRow(
                    f"g{g}-i{i}",
                    {
                        "esci_label": label,
                        "click_probability": round(min(1.0, purchase + rng.uniform(0, 0.2)), 6),
                        "purchase_probability": purchase,
                        "review_rating": round(rng.uniform(1, 5), 1),
                        "review_count": float(rng.randint(1, 2000)),
                        "units_sold": float(rng.randint(10, 8000)),
                    },
                )
            )
        quantity = "pack" if g % 3 == 0 else "things"
        groups.append(
            QueryGroup(f"q{g}", {"query_text": f"{g} {quantity} widgets"}, tuple(items))
        )
    schema = [
        ColumnSchema("query_id", "categorical", "query_key"),
        ColumnSchema("item_id", "categorical", "item_key"),
        ColumnSchema("query_text", "text", "query_feature"),
        ColumnSchema("esci_label", "categorical", "item_feature"),
        ColumnSchema("click_probability", "numeric", "item_feature"),
        ColumnSchema("purchase_probability", "numeric", "item_feature"),
        ColumnSchema("review_rating", "numeric", "item_feature"),
        ColumnSchema("review_count", "numeric", "item_feature"),
        ColumnSchema("units_sold", "numeric", "item_feature"),
    ]
    table = DatasetTable(schema, groups)
    models = {
        "baseline": ModelSpec.from_weights(
            "baseline",
            {"click": 3, "purchase": 2, "exact_purchase": 0.2, "popular_purchase": 0.3},
        ),
        "candidate": ModelSpec.from_weights(
            "candidate",
            {"click": 3, "purchase": 2, "exact_purchase": 0.2, "popular_purchase": 0.3},
        ),
    }
    slices = {
        "quantities": SliceSpec("quantities", E.parse("matches(query_text, 'pack')")),
        "early": SliceSpec("early", E.parse("matches(query_text, '^[0-4]')")),
    }
    ws = Workspace(
        table, make_objectives(), models, "baseline", make_metrics(), slices
    )
    started = time.perf_counter()
    result = ws.mutate(SetWeight("candidate", "exact_purchase", 1.5))
    elapsed = time.perf_counter() - started
    assert elapsed < 1.0, f"recompute took {elapsed:.3f}s"
    cells = len(ws.table().values)
    report(
        "Desk-scale latency",
        f"1000 queries x 16 items, {cells} cells recomputed in {elapsed * 1000:.0f} ms",
    )
