#!/usr/bin/env python3
"""Generate the shipped synthetic ESCI-style fixture and pin expected values.

Writes fixtures/esci_synth.csv (52 queries x 16 items) and
fixtures/expected.json. The expected deltas are computed here with a
self-contained brute-force implementation (no rankbench imports) so the
engine's metric table can be checked against independently derived numbers.

Scoring and metric definitions mirror fixtures/workspace.yaml:

    objectives  click = click_probability
                purchase = purchase_probability
                exact_purchase = (esci_label == 'E')
                popular_purchase = (units_sold > 1000) * purchase_probability
    models      baseline  click*3 + purchase*2 + exact*0.2 + popular*0.3
                candidate same, with exact_purchase raised to 1.5
    metrics     ndcg_click_prob@8, ndcg_purchase_prob@8,
                exact_density@8, highly_rated_density@8
    slice       quantities = query_text matches '[0-9]+\\s*(quart|oz|pack|count)'

The generator plants the "30 quart coolers" query so that the two top
non-exact items are demoted when the exact weight rises, and draws exact
items with systematically lower purchase probability than substitutes so the
exact-vs-purchase trade-off shows up at the dataset level. The script fails
loudly if either property does not hold.
"""

from __future__ import annotations

import csv
import json
import math
import random
import re
from pathlib import Path

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"
SEED = 20240817

COLUMNS = [
    "query_id",
    "item_id",
    "query_text",
    "esci_label",
    "click_probability",
    "purchase_probability",
    "review_rating",
    "review_count",
    "units_sold",
]

BASELINE_WEIGHTS = {"click": 3.0, "purchase": 2.0, "exact_purchase": 0.2, "popular_purchase": 0.3}
CANDIDATE_WEIGHTS = dict(BASELINE_WEIGHTS, exact_purchase=1.5)
QUANTITY_RE = re.compile(r"[0-9]+\s*(quart|oz|pack|count)")
K = 8

QUANTITY_QUERIES = [
    "30 quart coolers",
    "16 oz claw hammer",
    "24 pack water bottles",
    "12 count chocolate chip cookies",
    "64 oz juice pitcher",
    "6 pack white t shirts",
    "50 count paper plates",
    "5 quart dutch oven",
    "2 pack reading glasses",
    "32 oz insulated tumbler",
    "100 count zip ties",
    "8 quart pressure cooker",
    "36 count diapers size 4",
    "40 oz protein powder",
    "3 pack phone charger cables",
    "20 quart storage bins",
]

PLAIN_QUERIES = [
    "uconn hoodie",
    "leather office chair",
    "wireless earbuds",
    "stainless steel knife set",
    "memory foam pillow",
    "yoga mat",
    "running shoes for women",
    "laptop backpack",
    "air fryer",
    "electric toothbrush",
    "garden hose",
    "desk lamp",
    "bluetooth speaker",
    "cast iron skillet",
    "winter gloves",
    "mechanical keyboard",
    "espresso machine",
    "hiking boots",
    "weighted blanket",
    "robot vacuum",
    "standing desk converter",
    "noise cancelling headphones",
    "water filter pitcher",
    "resistance bands set",
    "portable power bank",
    "ceramic dinnerware set",
    "kids bike helmet",
    "fleece jacket",
    "gaming mouse",
    "bathroom scale",
    "picture frames",
    "travel pillow",
    "electric kettle",
    "dog bed large",
    "sunrise alarm clock",
    "acoustic guitar strings",
]


def r6(value: float) -> float:
    return round(value, 6)


def make_item(rng: random.Random, label: str) -> dict:
    if label == "E":
        purchase = rng.uniform(0.05, 0.55)
        click = min(1.0, purchase + rng.uniform(0.0, 0.25))
    elif label == "S":
        purchase = rng.uniform(0.25, 0.85)
        click = min(1.0, purchase + rng.uniform(0.0, 0.2))
    elif label == "C":
        purchase = rng.uniform(0.10, 0.60)
        click = min(1.0, purchase + rng.uniform(0.0, 0.15))
    else:  # I
        purchase = rng.uniform(0.0, 0.25)
        click = min(1.0, purchase + rng.uniform(0.0, 0.15))
    return {
        "esci_label": label,
        "click_probability": r6(click),
        "purchase_probability": r6(purchase),
        "review_rating": round(rng.uniform(1.0, 5.0), 1),
        "review_count": rng.randint(5, 2000),
        "units_sold": int(rng.lognormvariate(6.3, 1.0)) + 20,
    }


def planted_coolers() -> list[dict]:
    """The running-example query: two strong non-exact items on top under the
    baseline, overtaken by exact items once the exact weight rises."""
    rows = [
        # two planted non-exact top items
        ("cooler-n1", "S", 0.90, 0.85, 4.6, 320, 5000),
        ("cooler-n2", "S", 0.85, 0.80, 4.3, 280, 3000),
        ("cooler-n3", "C", 0.80, 0.75, 4.1, 210, 2000),
        ("cooler-n4", "S", 0.75, 0.70, 3.9, 190, 1500),
        ("cooler-n5", "C", 0.70, 0.65, 4.4, 170, 1200),
        ("cooler-n6", "I", 0.65, 0.60, 3.2, 150, 1100),
        ("cooler-n7", "S", 0.60, 0.58, 3.7, 140, 1050),
        ("cooler-n8", "C", 0.55, 0.52, 4.0, 130, 980),
        ("cooler-n9", "I", 0.35, 0.30, 2.8, 60, 300),
        ("cooler-n10", "I", 0.25, 0.20, 2.2, 40, 150),
        # exact items: lower purchase, big exact boost potential
        ("cooler-e1", "E", 0.70, 0.60, 4.5, 140, 900),
        ("cooler-e2", "E", 0.65, 0.55, 4.2, 120, 800),
        ("cooler-e3", "E", 0.50, 0.40, 3.6, 90, 700),
        ("cooler-e4", "E", 0.45, 0.35, 4.8, 60, 600),
        ("cooler-e5", "E", 0.40, 0.30, 3.9, 50, 500),
        ("cooler-e6", "E", 0.30, 0.22, 4.1, 30, 400),
    ]
    return [
        {
            "item_id": item_id,
            "esci_label": label,
            "click_probability": click,
            "purchase_probability": purchase,
            "review_rating": rating,
            "review_count": count,
            "units_sold": units,
        }
        for item_id, label, click, purchase, rating, count, units in rows
    ]


def uconn_hoodie(rng: random.Random) -> list[dict]:
    """Anecdote two: popular but poorly rated items on top."""
    rows = [
        ("hoodie-h1", "S", 0.80, 0.70, 2.0, 500, 2500),
        ("hoodie-h2", "E", 0.60, 0.50, 4.5, 80, 800),
        ("hoodie-h3", "S", 0.50, 0.45, 4.8, 600, 1500),
        ("hoodie-h4", "E", 0.40, 0.30, 4.2, 70, 300),
        ("hoodie-h5", "S", 0.72, 0.62, 1.8, 420, 2100),
        ("hoodie-h6", "C", 0.30, 0.20, 3.5, 30, 100),
    ]
    out = [
        {
            "item_id": item_id,
            "esci_label": label,
            "click_probability": click,
            "purchase_probability": purchase,
            "review_rating": rating,
            "review_count": count,
            "units_sold": units,
        }
        for item_id, label, click, purchase, rating, count, units in rows
    ]
    while len(out) < 16:
        label = rng.choices(["E", "S", "C", "I"], weights=[0.3, 0.3, 0.2, 0.2])[0]
        item = make_item(rng, label)
        item["item_id"] = f"hoodie-g{len(out):02d}"
        out.append(item)
    return out


def generate_rows() -> list[dict]:
    rng = random.Random(SEED)
    queries = QUANTITY_QUERIES + PLAIN_QUERIES
    rows = []
    for q_index, query in enumerate(queries):
        slug = re.sub(r"[^a-z0-9]+", "-", query.lower()).strip("-")
        if query == "30 quart coolers":
            items = planted_coolers()
        elif query == "uconn hoodie":
            items = uconn_hoodie(rng)
        else:
            items = []
            labels = ["E"] * 5 + ["S"] * 5 + ["C"] * 3 + ["I"] * 3
            rng.shuffle(labels)
            for i, label in enumerate(labels):
                item = make_item(rng, label)
                item["item_id"] = f"{slug}-{i:02d}"
                items.append(item)
        for item in items:
            rows.append({"query_id": query, "query_text": query, **item})
    return rows


# ---------------------------------------------------------------------------
# brute-force scoring and metrics (independent of the engine)
# ---------------------------------------------------------------------------


def objective_scores(row: dict) -> dict:
    return {
        "click": row["click_probability"],
        "purchase": row["purchase_probability"],
        "exact_purchase": 1.0 if row["esci_label"] == "E" else 0.0,
        "popular_purchase": (1.0 if row["units_sold"] > 1000 else 0.0)
        * row["purchase_probability"],
    }


def ranked_rows(rows: list[dict], weights: dict) -> list[dict]:
    def score(row):
        s = objective_scores(row)
        return sum(weights[name] * s[name] for name in weights)

    scores = [score(row) for row in rows]
    order = sorted(range(len(rows)), key=lambda i: (-scores[i], i))
    return [rows[i] for i in order]


def ndcg(gains: list[float], k: int) -> float:
    clamped = [max(0.0, g) for g in gains]
    depth = min(k, len(clamped))
    dcg = sum(clamped[i] / math.log2(i + 2) for i in range(depth))
    ideal = sorted(clamped, reverse=True)
    idcg = sum(ideal[i] / math.log2(i + 2) for i in range(depth))
    return 1.0 if idcg == 0.0 else dcg / idcg


def density(flags: list[float], k: int) -> float:
    depth = min(k, len(flags))
    return sum(flags[:depth]) / depth


def query_metrics(ranked: list[dict]) -> dict:
    return {
        "ndcg_click_prob": ndcg([r["click_probability"] for r in ranked], K),
        "ndcg_purchase_prob": ndcg([r["purchase_probability"] for r in ranked], K),
        "exact_density": density(
            [1.0 if r["esci_label"] == "E" else 0.0 for r in ranked], K
        ),
        "highly_rated_density": density(
            [1.0 if r["review_rating"] > 4 else 0.0 for r in ranked], K
        ),
    }


def evaluate(rows: list[dict]) -> dict:
    by_query: dict[str, list[dict]] = {}
    for row in rows:
        by_query.setdefault(row["query_id"], []).append(row)

    queries = list(by_query)
    slices = {
        "ALL": queries,
        "quantities": [q for q in queries if QUANTITY_RE.search(q)],
    }

    per_query = {}
    for query, items in by_query.items():
        per_query[query] = {
            "baseline": query_metrics(ranked_rows(items, BASELINE_WEIGHTS)),
            "candidate": query_metrics(ranked_rows(items, CANDIDATE_WEIGHTS)),
        }

    values = {}
    deltas = {}
    metric_names = list(query_metrics(list(by_query.values())[0]).keys())
    for slice_name, members in slices.items():
        values[slice_name] = {}
        deltas[slice_name] = {}
        for model in ("baseline", "candidate"):
            values[slice_name][model] = {
                m: sum(per_query[q][model][m] for q in members) / len(members)
                for m in metric_names
            }
        for m in metric_names:
            deltas[slice_name][m] = (
                values[slice_name]["candidate"][m] - values[slice_name]["baseline"][m]
            )

    coolers = by_query["30 quart coolers"]
    rank_a = {r["item_id"]: i + 1 for i, r in enumerate(ranked_rows(coolers, BASELINE_WEIGHTS))}
    rank_b = {r["item_id"]: i + 1 for i, r in enumerate(ranked_rows(coolers, CANDIDATE_WEIGHTS))}
    planted = ["cooler-n1", "cooler-n2"]
    movements = {item: rank_a[item] - rank_b[item] for item in rank_a}

    return {
        "slice_query_counts": {name: len(members) for name, members in slices.items()},
        "values": values,
        "deltas": deltas,
        "planted": {
            "query": "30 quart coolers",
            "items": planted,
            "rank_baseline": {i: rank_a[i] for i in planted},
            "rank_candidate": {i: rank_b[i] for i in planted},
            "movements": movements,
        },
    }


def main():
    rows = generate_rows()
    queries = {row["query_id"] for row in rows}
    assert len(queries) >= 50, f"only {len(queries)} queries"
    assert all(
        sum(1 for r in rows if r["query_id"] == q) == 16 for q in queries
    ), "every query needs 16 items"

    report = evaluate(rows)
    deltas_all = report["deltas"]["ALL"]
    assert deltas_all["exact_density"] > 0, deltas_all
    assert deltas_all["ndcg_purchase_prob"] < 0, deltas_all
    planted = report["planted"]
    for item in planted["items"]:
        assert planted["movements"][item] < 0, (item, planted)

    FIXTURE_DIR.mkdir(parents=True, exist_ok=True)
    csv_path = FIXTURE_DIR / "esci_synth.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row["query_id"],
                    row["item_id"],
                    row["query_text"],
                    row["esci_label"],
                    repr(row["click_probability"]),
                    repr(row["purchase_probability"]),
                    repr(row["review_rating"]),
                    row["review_count"],
                    row["units_sold"],
                ]
            )

    expected = {
        "seed": SEED,
        "weight_change": {"objective": "exact_purchase", "old": 0.2, "new": 1.5},
        **report,
    }
    (FIXTURE_DIR / "expected.json").write_text(
        json.dumps(expected, indent=2, sort_keys=True), encoding="utf-8"
    )

    print(f"wrote {csv_path} ({len(rows)} rows, {len(queries)} queries)")
    print(f"quantities slice: {report['slice_query_counts']['quantities']} queries")
    for name, delta in deltas_all.items():
        print(f"  delta {name}@ALL: {delta:+.6f}")
    print(f"planted movements: {planted['movements']['cooler-n1']}, {planted['movements']['cooler-n2']}")


if __name__ == "__main__":
    main()
