"""Ranking metrics at dataset, slice, and example level.

Four metric kinds are supported:

    ndcg(gain expr, k)            position-decayed gain, normalized by ideal
    density(predicate expr, k)    fraction of qualifying items in the top k
    cross_entropy(label, prob)    mean binary cross-entropy over a group
    mean(expr, k)                 mean of an item expression over the top k

Per-query values are aggregated as unweighted means over the member queries
of a slice (every query counts once). Slices are query subsets defined by a
predicate over query-level columns; the reserved slice ``ALL`` is the whole
query set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import expr as E
from .dataset import DatasetTable
from .ranker import (
    ModelSpec,
    ObjectiveSpec,
    combined_scores,
    group_orderings,
    objective_columns,
)

ALL_SLICE = "ALL"

METRIC_KINDS = ("ndcg", "density", "cross_entropy", "mean")

CE_EPSILON = 1e-12


class MetricError(Exception):
    pass


class LengthMismatch(MetricError):
    pass


class EmptyInput(MetricError):
    pass


class UnknownBaseline(MetricError):
    pass


class UnknownMetric(MetricError):
    pass


# ---------------------------------------------------------------------------
# Per-list primitives
# ---------------------------------------------------------------------------


def ndcg_at_k(gains: Sequence[float], k: int) -> float:
    """NDCG of gains listed in ranked order.

    Gains floor at 0 (negative gains are undefined in the normalization);
    a query with no positive gain is scored 1.0, since no ordering of it can
    be better than another.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    clamped = [g if g > 0.0 else 0.0 for g in gains]
    depth = min(k, len(clamped))
    dcg = 0.0
    for i in range(depth):
        dcg += clamped[i] / math.log2(i + 2)
    idcg = 0.0
    for i, g in enumerate(sorted(clamped, reverse=True)[:depth]):
        idcg += g / math.log2(i + 2)
    if idcg == 0.0:
        return 1.0
    return dcg / idcg


def density_at_k(values: Sequence[float], k: int) -> float:
    """Fraction of the top min(k, n) items with a truthy predicate value."""
    if k <= 0:
        raise ValueError("k must be positive")
    depth = min(k, len(values))
    if depth == 0:
        return 0.0
    qualifying = sum(1 for v in values[:depth] if v != 0.0)
    return qualifying / depth


def cross_entropy(labels: Sequence[float], probs: Sequence[float]) -> float:
    """Mean binary cross-entropy with probabilities clipped to [eps, 1-eps]."""
    if len(labels) != len(probs):
        raise LengthMismatch(f"{len(labels)} labels vs {len(probs)} probabilities")
    if not labels:
        raise EmptyInput("cross_entropy of empty lists")
    total = 0.0
    for r, p in zip(labels, probs):
        clipped = min(max(p, CE_EPSILON), 1.0 - CE_EPSILON)
        total += r * math.log(clipped) + (1.0 - r) * math.log(1.0 - clipped)
    return -total / len(labels)


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricSpec:
    """A named metric; `expr` is the gain/predicate/label expression and
    `expr2` the probability expression for cross_entropy."""

    name: str
    kind: str
    expr: E.Expr
    expr2: E.Expr | None = None
    k: int | None = None
    description: str = ""

    def __post_init__(self):
        if self.kind not in METRIC_KINDS:
            raise ValueError(f"metric {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "cross_entropy":
            if self.expr2 is None:
                raise ValueError(
                    f"metric {self.name!r}: cross_entropy needs a probability expression"
                )
        else:
            if self.k is None or self.k <= 0:
                raise ValueError(f"metric {self.name!r}: k must be a positive integer")


@dataclass(frozen=True)
class SliceSpec:
    """A named query subset defined by a predicate over query-level columns."""

    name: str
    predicate: E.Expr


@dataclass(frozen=True)
class MetricValue:
    value: float
    query_count: int
    defined: bool = True

    @classmethod
    def undefined(cls) -> "MetricValue":
        return cls(float("nan"), 0, False)


@dataclass(frozen=True)
class MetricTable:
    """Grid of metric values per (model, metric, slice) with deltas vs. baseline."""

    baseline: str
    models: tuple[str, ...]
    metrics: tuple[str, ...]
    slices: tuple[str, ...]  # ALL first
    values: Mapping[tuple[str, str, str], MetricValue]
    deltas: Mapping[tuple[str, str, str], float | None]

    def value(self, model: str, metric: str, slice_name: str) -> MetricValue:
        return self.values[(model, metric, slice_name)]

    def delta(self, model: str, metric: str, slice_name: str) -> float | None:
        return self.deltas[(model, metric, slice_name)]


# ---------------------------------------------------------------------------
# Slice membership and evaluation
# ---------------------------------------------------------------------------


def slice_members(slice_spec: SliceSpec, dataset: DatasetTable) -> set:
    """Query ids whose query context satisfies the slice predicate."""
    mask = slice_mask(slice_spec, dataset)
    return {g.query_id for g, keep in zip(dataset.groups, mask) if keep}


def slice_mask(slice_spec: SliceSpec, dataset: DatasetTable) -> np.ndarray:
    values, _ = E.evaluate_columns(
        slice_spec.predicate, dataset.query_columns, len(dataset.groups)
    )
    return values != 0.0


def per_query_values(
    metric: MetricSpec,
    dataset: DatasetTable,
    orderings: Sequence[np.ndarray],
) -> np.ndarray:
    """Metric value per query group given rank orderings (absolute row indices)."""
    n = dataset.row_count
    primary, _ = E.evaluate_columns(metric.expr, dataset.columns, n)
    secondary = None
    if metric.expr2 is not None:
        secondary, _ = E.evaluate_columns(metric.expr2, dataset.columns, n)
    out = np.empty(len(orderings))
    for i, order in enumerate(orderings):
        if metric.kind == "ndcg":
            out[i] = ndcg_at_k(primary[order].tolist(), metric.k)
        elif metric.kind == "density":
            out[i] = density_at_k(primary[order].tolist(), metric.k)
        elif metric.kind == "cross_entropy":
            out[i] = cross_entropy(primary[order].tolist(), secondary[order].tolist())
        else:  # mean over top-k
            depth = min(metric.k, len(order))
            out[i] = float(np.mean(primary[order[:depth]]))
    return out


def evaluate_metric(
    metric: MetricSpec,
    model: ModelSpec,
    slice_spec: SliceSpec | None,
    dataset: DatasetTable,
    objectives: Mapping[str, ObjectiveSpec],
) -> MetricValue:
    """Unweighted mean of the per-query metric over the slice's member queries.

    `slice_spec` of None means the full query set. An empty slice has no
    defined value.
    """
    if slice_spec is None:
        mask = np.ones(len(dataset.groups), dtype=bool)
    else:
        mask = slice_mask(slice_spec, dataset)
    count = int(np.count_nonzero(mask))
    if count == 0:
        return MetricValue.undefined()
    raw = objective_columns(objectives, dataset)
    combined = combined_scores(model, raw, dataset.row_count)
    orderings = group_orderings(dataset, combined)
    values = per_query_values(metric, dataset, orderings)
    return MetricValue(float(np.mean(values[mask])), count)


def metric_table(
    models: Sequence[ModelSpec],
    baseline: str,
    metrics: Sequence[MetricSpec],
    slices: Sequence[SliceSpec],
    dataset: DatasetTable,
    objectives: Mapping[str, ObjectiveSpec],
) -> MetricTable:
    """Full (model, metric, slice) grid; slices implicitly include ALL."""
    model_names = [m.name for m in models]
    if baseline not in model_names:
        raise UnknownBaseline(f"baseline {baseline!r} is not among the models")

    masks: dict[str, np.ndarray] = {ALL_SLICE: np.ones(len(dataset.groups), dtype=bool)}
    for s in slices:
        masks[s.name] = slice_mask(s, dataset)
    slice_names = [ALL_SLICE] + [s.name for s in slices]

    raw = objective_columns(objectives, dataset)
    values: dict[tuple[str, str, str], MetricValue] = {}
    for model in models:
        combined = combined_scores(model, raw, dataset.row_count)
        orderings = group_orderings(dataset, combined)
        for metric in metrics:
            per_query = per_query_values(metric, dataset, orderings)
            for slice_name in slice_names:
                mask = masks[slice_name]
                count = int(np.count_nonzero(mask))
                if count == 0:
                    cell = MetricValue.undefined()
                else:
                    cell = MetricValue(float(np.mean(per_query[mask])), count)
                values[(model.name, metric.name, slice_name)] = cell

    deltas: dict[tuple[str, str, str], float | None] = {}
    for model in model_names:
        for metric in metrics:
            for slice_name in slice_names:
                cell = values[(model, metric.name, slice_name)]
                base = values[(baseline, metric.name, slice_name)]
                if cell.defined and base.defined:
                    deltas[(model, metric.name, slice_name)] = cell.value - base.value
                else:
                    deltas[(model, metric.name, slice_name)] = None

    return MetricTable(
        baseline=baseline,
        models=tuple(model_names),
        metrics=tuple(m.name for m in metrics),
        slices=tuple(slice_names),
        values=values,
        deltas=deltas,
    )


def top_moved_slices(
    table: MetricTable, metric: str, limit: int, model: str | None = None
) -> list[str]:
    """Slices ordered by |delta| for one metric, undefined cells excluded.

    With `model` unset, the single non-baseline model is used; ambiguous
    tables require naming one.
    """
    if metric not in table.metrics:
        raise UnknownMetric(f"unknown metric {metric!r}")
    if limit <= 0:
        raise ValueError("limit must be positive")
    if model is None:
        candidates = [m for m in table.models if m != table.baseline]
        if len(candidates) == 1:
            model = candidates[0]
        elif not candidates:
            model = table.baseline
        else:
            raise MetricError(
                "several candidate models; pass `model` to pick one of "
                + ", ".join(candidates)
            )
    if model not in table.models:
        raise MetricError(f"unknown model {model!r}")
    scored = [
        (slice_name, table.deltas[(model, metric, slice_name)])
        for slice_name in table.slices
    ]
    defined = [(name, delta) for name, delta in scored if delta is not None]
    defined.sort(key=lambda pair: (-abs(pair[1]), pair[0]))
    return [name for name, _ in defined[:limit]]
