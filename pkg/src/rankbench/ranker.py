"""Scoring, ranking, attribution, and ranking diffs.

A model is a weighted linear combination of named objectives; an item's
combined score is the sum of per-objective contributions w_k * s_k, which
makes attribution an exact decomposition rather than an estimate. Higher
combined score means better rank; ties break by dataset order, then item id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import expr as E
from .dataset import DatasetTable, QueryGroup


class RankerError(Exception):
    pass


class UnknownObjective(RankerError):
    pass


class ItemSetMismatch(RankerError):
    pass


@dataclass(frozen=True)
class ObjectiveSpec:
    """A named per-item scoring function over feature columns."""

    name: str
    expr: E.Expr
    description: str = ""


@dataclass(frozen=True)
class ModelSpec:
    """Named, ordered list of (objective name, weight) terms."""

    name: str
    terms: tuple[tuple[str, float], ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError(f"model {self.name!r} must have at least one term")
        names = [obj for obj, _ in self.terms]
        if len(set(names)) != len(names):
            raise ValueError(f"model {self.name!r} repeats an objective")
        for obj, weight in self.terms:
            if not math.isfinite(weight):
                raise ValueError(f"model {self.name!r}: weight for {obj!r} is not finite")

    @classmethod
    def from_weights(cls, name: str, weights: Mapping[str, float]) -> "ModelSpec":
        return cls(name, tuple((obj, float(w)) for obj, w in weights.items()))

    def weights(self) -> dict[str, float]:
        return dict(self.terms)

    def canonical_key(self) -> str:
        """Order-insensitive serialization of the trade-off this model encodes."""
        return canonical_terms_key(dict(self.terms))


def canonical_terms_key(terms: Mapping[str, float]) -> str:
    return "|".join(f"{name}={float(w)!r}" for name, w in sorted(terms.items()))


@dataclass(frozen=True)
class ScoreComponent:
    objective: str
    raw: float
    contribution: float


@dataclass(frozen=True)
class ScoredItem:
    item_id: str | float
    components: tuple[ScoreComponent, ...]
    combined: float


@dataclass(frozen=True)
class Ranking:
    query_id: str | float
    entries: tuple[tuple[str | float, float], ...]  # (item_id, score), rank 1 first

    @property
    def item_ids(self) -> tuple:
        return tuple(item_id for item_id, _ in self.entries)

    def rank_of(self, item_id) -> int:
        for rank, (iid, _) in enumerate(self.entries, start=1):
            if iid == item_id:
                return rank
        raise KeyError(item_id)


@dataclass(frozen=True)
class ItemMovement:
    item_id: str | float
    rank_a: int
    rank_b: int
    movement: int  # rank_a - rank_b; positive = promoted in b


@dataclass(frozen=True)
class RankDiff:
    query_id: str | float
    movements: tuple[ItemMovement, ...]  # ordered by rank in a
    promoted: frozenset
    demoted: frozenset


@dataclass(frozen=True)
class Attribution:
    entries: tuple[tuple[str, float, float], ...]  # (objective, contribution, share)
    all_zero: bool


def score_items(
    model: ModelSpec,
    objectives: Mapping[str, ObjectiveSpec],
    group: QueryGroup,
    dataset: DatasetTable,
) -> list[ScoredItem]:
    """Score every item of a group, in input order."""
    for obj, _ in model.terms:
        if obj not in objectives:
            raise UnknownObjective(f"model {model.name!r} references unknown objective {obj!r}")
    scored = []
    for item in group.items:
        ctx = E.EvalContext(dataset.item_context(group, item))
        components = []
        combined = 0.0
        for obj, weight in model.terms:
            raw = E.evaluate(objectives[obj].expr, ctx)
            contribution = weight * raw
            components.append(ScoreComponent(obj, raw, contribution))
            combined += contribution
        scored.append(ScoredItem(item.item_id, tuple(components), combined))
    return scored


def rank(scored: Sequence[ScoredItem], query_id: str | float = "") -> Ranking:
    """Sort by combined score descending; ties keep dataset order, then item id."""
    if not scored:
        raise ValueError("cannot rank an empty item list")
    order = sorted(
        range(len(scored)),
        key=lambda i: (-scored[i].combined, i, str(scored[i].item_id)),
    )
    return Ranking(query_id, tuple((scored[i].item_id, scored[i].combined) for i in order))


def attribute(item: ScoredItem) -> Attribution:
    """Per-objective contribution and |contribution| share of the combined score."""
    total = sum(abs(c.contribution) for c in item.components)
    if total == 0.0:
        return Attribution(
            tuple((c.objective, c.contribution, 0.0) for c in item.components),
            all_zero=True,
        )
    return Attribution(
        tuple(
            (c.objective, c.contribution, abs(c.contribution) / total)
            for c in item.components
        ),
        all_zero=False,
    )


def compare_rankings(a: Ranking, b: Ranking) -> RankDiff:
    """Per-item rank movement from ranking a to ranking b."""
    if a.query_id != b.query_id:
        raise ItemSetMismatch(
            f"rankings are for different queries: {a.query_id!r} vs {b.query_id!r}"
        )
    ids_a = a.item_ids
    if set(ids_a) != set(b.item_ids):
        raise ItemSetMismatch("rankings cover different item sets")
    rank_b = {iid: r for r, (iid, _) in enumerate(b.entries, start=1)}
    movements = []
    promoted = set()
    demoted = set()
    for r_a, (iid, _) in enumerate(a.entries, start=1):
        r_b = rank_b[iid]
        delta = r_a - r_b
        movements.append(ItemMovement(iid, r_a, r_b, delta))
        if delta > 0:
            promoted.add(iid)
        elif delta < 0:
            demoted.add(iid)
    return RankDiff(a.query_id, tuple(movements), frozenset(promoted), frozenset(demoted))


# ---------------------------------------------------------------------------
# Batch path over whole datasets
# ---------------------------------------------------------------------------


def objective_columns(
    objectives: Mapping[str, ObjectiveSpec], dataset: DatasetTable
) -> dict[str, np.ndarray]:
    """Raw score column per objective over all item rows in grouped order."""
    out = {}
    for name, spec in objectives.items():
        values, _warnings = E.evaluate_columns(spec.expr, dataset.columns, dataset.row_count)
        out[name] = values
    return out


def combined_scores(
    model: ModelSpec, raw_columns: Mapping[str, np.ndarray], n: int
) -> np.ndarray:
    """Combined score per row, accumulated in term order like score_items."""
    combined = np.zeros(n)
    for obj, weight in model.terms:
        if obj not in raw_columns:
            raise UnknownObjective(
                f"model {model.name!r} references unknown objective {obj!r}"
            )
        combined += weight * raw_columns[obj]
    return combined


def group_orderings(dataset: DatasetTable, combined: np.ndarray) -> list[np.ndarray]:
    """Per group, absolute row indices in rank order (same tie rule as rank())."""
    orders = []
    for start, end in dataset.group_bounds:
        seg = combined[start:end]
        orders.append(start + np.argsort(-seg, kind="stable"))
    return orders


def rank_group(
    model: ModelSpec,
    objectives: Mapping[str, ObjectiveSpec],
    group: QueryGroup,
    dataset: DatasetTable,
) -> Ranking:
    return rank(score_items(model, objectives, group, dataset), group.query_id)
