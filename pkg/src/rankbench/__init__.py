"""rankbench: design and evaluate multi-objective rankers interactively.

Objectives are expressions over feature columns; models combine them with
weights; metrics, slices, side-by-side diffs, and attribution give example-
and aggregate-level feedback on every change; session telemetry feeds the
offline activity analysis.
"""

from .dataset import (
    ColumnSchema,
    DatasetTable,
    QueryGroup,
    load_dataset,
    load_dataset_file,
    validate_references,
)
from .expr import EvalContext, ParseError, evaluate, format_expr, parse
from .metrics import (
    MetricSpec,
    MetricTable,
    SliceSpec,
    cross_entropy,
    density_at_k,
    evaluate_metric,
    metric_table,
    ndcg_at_k,
    slice_members,
    top_moved_slices,
)
from .ranker import (
    ModelSpec,
    ObjectiveSpec,
    Ranking,
    attribute,
    compare_rankings,
    rank,
    score_items,
)
from .workspace import SessionEvent, Workspace

__all__ = [
    "ColumnSchema",
    "DatasetTable",
    "QueryGroup",
    "load_dataset",
    "load_dataset_file",
    "validate_references",
    "EvalContext",
    "ParseError",
    "evaluate",
    "format_expr",
    "parse",
    "MetricSpec",
    "MetricTable",
    "SliceSpec",
    "cross_entropy",
    "density_at_k",
    "evaluate_metric",
    "metric_table",
    "ndcg_at_k",
    "slice_members",
    "top_moved_slices",
    "ModelSpec",
    "ObjectiveSpec",
    "Ranking",
    "attribute",
    "compare_rankings",
    "rank",
    "score_items",
    "SessionEvent",
    "Workspace",
]

__version__ = "0.1.0"
