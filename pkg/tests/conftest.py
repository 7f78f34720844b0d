import pytest

from rankbench import expr as E
from rankbench.dataset import ColumnSchema, load_dataset
from rankbench.metrics import MetricSpec, SliceSpec
from rankbench.ranker import ModelSpec, ObjectiveSpec
from rankbench.workspace import Workspace

SCHEMA = (
    ColumnSchema("query_id", "categorical", "query_key"),
    ColumnSchema("item_id", "categorical", "item_key"),
    ColumnSchema("query_text", "text", "query_feature"),
    ColumnSchema("esci_label", "categorical", "item_feature"),
    ColumnSchema("click_probability", "numeric", "item_feature"),
    ColumnSchema("purchase_probability", "numeric", "item_feature"),
    ColumnSchema("review_rating", "numeric", "item_feature"),
    ColumnSchema("review_count", "numeric", "item_feature"),
    ColumnSchema("units_sold", "numeric", "item_feature"),
)

SMALL_CSV = """\
query_id,item_id,query_text,esci_label,click_probability,purchase_probability,review_rating,review_count,units_sold
30 quart coolers,cooler-a,30 quart coolers,S,0.9,0.8,4.6,320,5400
30 quart coolers,cooler-b,30 quart coolers,E,0.5,0.4,4.1,150,900
30 quart coolers,cooler-c,30 quart coolers,E,0.3,0.2,3.8,80,400
uconn hoodie,hoodie-a,uconn hoodie,E,0.7,0.5,2.1,40,2500
uconn hoodie,hoodie-b,uconn hoodie,S,0.4,0.3,4.8,600,1200
uconn hoodie,hoodie-c,uconn hoodie,C,0.2,0.1,3.0,20,150
"""

# Hand-built so that raising the exact weight from 0.2 to 1.5 pulls a third
# exact item into the coolers top-8 (density up 2/8 -> 3/8), demotes the two
# planted non-exact top items (cooler-n1 rank 1->2, cooler-n2 rank 2->4), and
# drops purchase NDCG, since the promoted exact items purchase worse.
TRADEOFF_CSV = """\
query_id,item_id,query_text,esci_label,click_probability,purchase_probability,review_rating,review_count,units_sold
30 quart coolers,cooler-n1,30 quart coolers,S,0.90,0.85,4.6,320,5000
30 quart coolers,cooler-n2,30 quart coolers,S,0.85,0.80,4.3,280,3000
30 quart coolers,cooler-n3,30 quart coolers,C,0.80,0.75,4.1,210,2000
30 quart coolers,cooler-n4,30 quart coolers,S,0.75,0.70,3.9,190,1500
30 quart coolers,cooler-n5,30 quart coolers,C,0.70,0.65,4.4,170,1200
30 quart coolers,cooler-n6,30 quart coolers,I,0.65,0.60,3.2,150,1100
30 quart coolers,cooler-e1,30 quart coolers,E,0.70,0.60,4.5,140,900
30 quart coolers,cooler-e2,30 quart coolers,E,0.65,0.55,4.2,120,800
30 quart coolers,cooler-e3,30 quart coolers,E,0.50,0.40,3.6,90,700
30 quart coolers,cooler-e4,30 quart coolers,E,0.45,0.35,4.8,60,600
uconn hoodie,hoodie-h1,uconn hoodie,S,0.80,0.70,2.0,500,2500
uconn hoodie,hoodie-h2,uconn hoodie,E,0.60,0.50,4.5,80,800
uconn hoodie,hoodie-h3,uconn hoodie,S,0.50,0.45,4.8,600,1500
uconn hoodie,hoodie-h4,uconn hoodie,E,0.40,0.30,4.2,70,300
uconn hoodie,hoodie-h5,uconn hoodie,C,0.30,0.20,3.5,30,100
uconn hoodie,hoodie-h6,uconn hoodie,I,0.10,0.05,1.5,10,50
"""


@pytest.fixture
def schema():
    return SCHEMA


@pytest.fixture
def small_table():
    return load_dataset(SMALL_CSV.encode(), "csv", SCHEMA)


@pytest.fixture
def tradeoff_table():
    return load_dataset(TRADEOFF_CSV.encode(), "csv", SCHEMA)


def make_objectives():
    return {
        "click": ObjectiveSpec("click", E.parse("click_probability")),
        "purchase": ObjectiveSpec("purchase", E.parse("purchase_probability")),
        "exact_purchase": ObjectiveSpec("exact_purchase", E.parse("esci_label == 'E'")),
        "popular_purchase": ObjectiveSpec(
            "popular_purchase", E.parse("(units_sold > 1000) * purchase_probability")
        ),
    }


def make_models(exact_weight_candidate=1.5):
    base = {"click": 3.0, "purchase": 2.0, "exact_purchase": 0.2, "popular_purchase": 0.3}
    candidate = dict(base, exact_purchase=exact_weight_candidate)
    return {
        "baseline": ModelSpec.from_weights("baseline", base),
        "candidate": ModelSpec.from_weights("candidate", candidate),
    }


def make_metrics():
    return {
        "ndcg_click_prob": MetricSpec(
            "ndcg_click_prob", "ndcg", E.parse("click_probability"), k=8
        ),
        "ndcg_purchase_prob": MetricSpec(
            "ndcg_purchase_prob", "ndcg", E.parse("purchase_probability"), k=8
        ),
        "exact_density": MetricSpec(
            "exact_density", "density", E.parse("esci_label == 'E'"), k=8
        ),
        "highly_rated_density": MetricSpec(
            "highly_rated_density", "density", E.parse("review_rating > 4"), k=8
        ),
    }


def make_slices():
    return {
        "quantities": SliceSpec(
            "quantities",
            E.parse("matches(query_text, '[0-9]+\\s*(quart|oz|pack|count)')"),
        ),
    }


@pytest.fixture
def objectives():
    return make_objectives()


@pytest.fixture
def models():
    return make_models()


@pytest.fixture
def small_workspace(tradeoff_table, tmp_path):
    return Workspace(
        tradeoff_table,
        make_objectives(),
        make_models(),
        "baseline",
        make_metrics(),
        make_slices(),
        anecdotes=("30 quart coolers", "uconn hoodie"),
        telemetry_dir=tmp_path / "telemetry",
        clock=_counter_clock(),
    )


def _counter_clock():
    state = {"t": 0}

    def clock():
        state["t"] += 1000
        return state["t"]

    return clock


@pytest.fixture
def counter_clock():
    return _counter_clock()
