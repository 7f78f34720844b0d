"""Workspace state: the dataset plus objectives, models, metrics, and slices,
mutated through typed changes with recompute-on-mutation and telemetry.

Every successful mutation bumps the revision, recomputes the metric table
before returning, and appends exactly one session event, so replaying the
event log against the initial configuration reproduces the final state.
View actions (example, table, metric, slice) are also recorded as events but
never change state.
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence, Union

from . import expr as E
from .dataset import DatasetTable, check_expr
from .metrics import (
    ALL_SLICE,
    METRIC_KINDS,
    MetricSpec,
    MetricTable,
    SliceSpec,
    metric_table,
)
from .ranker import (
    Attribution,
    ModelSpec,
    ObjectiveSpec,
    attribute,
    compare_rankings,
    rank,
    score_items,
)

ACTIONS = (
    "objective.add",
    "objective.edit",
    "objective.remove",
    "model.weight_change",
    "model.term_add",
    "model.term_remove",
    "metric.define",
    "metric.view",
    "slice.define",
    "slice.view",
    "example.view",
    "table.view",
)


class WorkspaceError(Exception):
    pass


class ValidationFailed(WorkspaceError):
    def __init__(self, issues: Sequence):
        self.issues = [self._issue_dict(i) for i in issues]
        super().__init__("; ".join(i["message"] for i in self.issues))

    @staticmethod
    def _issue_dict(issue) -> dict:
        if isinstance(issue, E.TypeIssue):
            return {"kind": issue.kind, "message": issue.message}
        if isinstance(issue, dict):
            return issue
        return {"kind": "error", "message": str(issue)}


class UnknownEntity(WorkspaceError):
    pass


class UnknownQuery(WorkspaceError):
    pass


class UnknownModel(WorkspaceError):
    pass


class SchemaMismatch(WorkspaceError):
    pass


class DatasetHashMismatch(WorkspaceError):
    pass


# ---------------------------------------------------------------------------
# Events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SessionEvent:
    seq: int
    timestamp: int  # milliseconds
    actor: str
    action: str
    payload: Mapping

    def to_json(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "timestamp": self.timestamp,
                "actor": self.actor,
                "action": self.action,
                "payload": dict(self.payload),
            },
            sort_keys=True,
        )

    @classmethod
    def from_dict(cls, obj: Mapping) -> "SessionEvent":
        return cls(
            seq=int(obj["seq"]),
            timestamp=int(obj["timestamp"]),
            actor=str(obj.get("actor", "")),
            action=str(obj["action"]),
            payload=dict(obj.get("payload", {})),
        )


def read_event_log(path) -> list[SessionEvent]:
    events = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                events.append(SessionEvent.from_dict(json.loads(line)))
    return events


# ---------------------------------------------------------------------------
# Typed mutations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AddObjective:
    name: str
    expr_text: str
    description: str = ""


@dataclass(frozen=True)
class EditObjective:
    name: str
    expr_text: str
    description: str = ""


@dataclass(frozen=True)
class RemoveObjective:
    name: str


@dataclass(frozen=True)
class SetWeight:
    model: str
    objective: str
    weight: float


@dataclass(frozen=True)
class AddTerm:
    model: str
    objective: str
    weight: float


@dataclass(frozen=True)
class RemoveTerm:
    model: str
    objective: str


@dataclass(frozen=True)
class DefineMetric:
    name: str
    kind: str
    expr_text: str
    expr2_text: str | None = None
    k: int | None = None
    description: str = ""


@dataclass(frozen=True)
class DefineSlice:
    name: str
    predicate_text: str


Mutation = Union[
    AddObjective,
    EditObjective,
    RemoveObjective,
    SetWeight,
    AddTerm,
    RemoveTerm,
    DefineMetric,
    DefineSlice,
]


@dataclass
class MutationResult:
    revision: int
    event: SessionEvent
    recompute_ms: float


# ---------------------------------------------------------------------------
# Workspace
# ---------------------------------------------------------------------------


class Workspace:
    """Single-writer workspace over an immutable dataset.

    Mutations are serialized by a lock; reads see the last completed
    revision. The metric table is recomputed synchronously inside each
    mutation, which is quick at desk scale.
    """

    def __init__(
        self,
        dataset: DatasetTable,
        objectives: Mapping[str, ObjectiveSpec],
        models: Mapping[str, ModelSpec],
        baseline: str,
        metrics: Mapping[str, MetricSpec],
        slices: Mapping[str, SliceSpec],
        anecdotes: Sequence[str] = (),
        telemetry_dir: str | Path | None = None,
        actor: str = "local",
        clock: Callable[[], int] | None = None,
    ):
        self.dataset = dataset
        self.objectives: dict[str, ObjectiveSpec] = dict(objectives)
        self.models: dict[str, ModelSpec] = dict(models)
        self.baseline = baseline
        self.metrics: dict[str, MetricSpec] = dict(metrics)
        self.slices: dict[str, SliceSpec] = dict(slices)
        self.anecdotes = tuple(anecdotes)
        self.telemetry_dir = Path(telemetry_dir) if telemetry_dir else None
        self.actor = actor
        self._clock = clock or (lambda: int(time.time() * 1000))
        self.revision = 0
        self.events: list[SessionEvent] = []
        self._seq = 0
        self._lock = threading.Lock()
        self.current_model = baseline
        self._check_integrity()
        self._table = self._recompute()

    # -- bootstrap checks --------------------------------------------------

    def _check_integrity(self) -> None:
        if self.baseline not in self.models:
            raise ValidationFailed(
                [{"kind": "error", "message": f"baseline model {self.baseline!r} not defined"}]
            )
        issues: list = []
        for name, spec in self.objectives.items():
            issues.extend(check_expr(self.dataset, spec.expr))
        for model in self.models.values():
            for obj, _ in model.terms:
                if obj not in self.objectives:
                    issues.append(
                        {
                            "kind": "error",
                            "message": f"model {model.name!r} references unknown objective {obj!r}",
                        }
                    )
        for metric in self.metrics.values():
            issues.extend(check_expr(self.dataset, metric.expr))
            if metric.expr2 is not None:
                issues.extend(check_expr(self.dataset, metric.expr2))
        for s in self.slices.values():
            if s.name == ALL_SLICE:
                issues.append(
                    {"kind": "error", "message": f"slice name {ALL_SLICE!r} is reserved"}
                )
            issues.extend(check_expr(self.dataset, s.predicate, query_level_only=True))
        if issues:
            raise ValidationFailed(issues)

    # -- reads --------------------------------------------------------------

    def table(self) -> MetricTable:
        return self._table

    def _recompute(self) -> MetricTable:
        return metric_table(
            list(self.models.values()),
            self.baseline,
            list(self.metrics.values()),
            list(self.slices.values()),
            self.dataset,
            self.objectives,
        )

    # -- events ---------------------------------------------------------------

    def _emit(self, action: str, payload: Mapping, actor: str | None = None) -> SessionEvent:
        assert action in ACTIONS
        self._seq += 1
        event = SessionEvent(
            seq=self._seq,
            timestamp=self._clock(),
            actor=actor or self.actor,
            action=action,
            payload=dict(payload),
        )
        self.events.append(event)
        if self.telemetry_dir is not None:
            self.telemetry_dir.mkdir(parents=True, exist_ok=True)
            path = self.telemetry_dir / f"{event.actor}.jsonl"
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(event.to_json() + "\n")
        return event

    def record_view(self, action: str, payload: Mapping, actor: str | None = None) -> SessionEvent:
        """Record an evaluation view (example/table/metric/slice); no state change."""
        if action not in ("metric.view", "slice.view", "example.view", "table.view"):
            raise ValueError(f"{action!r} is not a view action")
        with self._lock:
            return self._emit(action, payload, actor)

    # -- mutation ---------------------------------------------------------------

    def mutate(self, change: Mutation, actor: str | None = None) -> MutationResult:
        """Validate and apply one change; bump revision, recompute, log event."""
        with self._lock:
            action, payload, apply = self._prepare(change)
            started = time.perf_counter()
            apply()
            self.revision += 1
            try:
                self._table = self._recompute()
            except Exception:
                # A prepared mutation should never break recompute; surface loudly.
                raise
            elapsed_ms = (time.perf_counter() - started) * 1000.0
            event = self._emit(action, payload, actor)
            return MutationResult(self.revision, event, elapsed_ms)

    def _prepare(self, change: Mutation) -> tuple[str, dict, Callable[[], None]]:
        if isinstance(change, AddObjective):
            return self._prepare_add_objective(change)
        if isinstance(change, EditObjective):
            return self._prepare_edit_objective(change)
        if isinstance(change, RemoveObjective):
            return self._prepare_remove_objective(change)
        if isinstance(change, SetWeight):
            return self._prepare_set_weight(change)
        if isinstance(change, AddTerm):
            return self._prepare_add_term(change)
        if isinstance(change, RemoveTerm):
            return self._prepare_remove_term(change)
        if isinstance(change, DefineMetric):
            return self._prepare_define_metric(change)
        if isinstance(change, DefineSlice):
            return self._prepare_define_slice(change)
        raise TypeError(f"unknown mutation type {type(change).__name__}")

    def _parse_checked(self, text: str, *, query_level_only: bool = False) -> E.Expr:
        try:
            ast = E.parse(text)
        except E.ParseError as exc:
            raise ValidationFailed(
                [
                    {
                        "kind": "parse_error",
                        "message": str(exc),
                        "offset": exc.pos,
                        "expected": list(exc.expected),
                    }
                ]
            ) from None
        issues = check_expr(self.dataset, ast, query_level_only=query_level_only)
        if issues:
            raise ValidationFailed(issues)
        return ast

    def _prepare_add_objective(self, change: AddObjective):
        if change.name in self.objectives:
            raise ValidationFailed(
                [{"kind": "error", "message": f"objective {change.name!r} already exists"}]
            )
        ast = self._parse_checked(change.expr_text)
        spec = ObjectiveSpec(change.name, ast, change.description)
        payload = {
            "name": change.name,
            "expr": E.format_expr(ast),
            "description": change.description,
        }

        def apply():
            self.objectives[change.name] = spec

        return "objective.add", payload, apply

    def _prepare_edit_objective(self, change: EditObjective):
        old = self.objectives.get(change.name)
        if old is None:
            raise UnknownEntity(f"unknown objective {change.name!r}")
        ast = self._parse_checked(change.expr_text)
        spec = ObjectiveSpec(change.name, ast, change.description)
        payload = {
            "name": change.name,
            "old_expr": E.format_expr(old.expr),
            "new_expr": E.format_expr(ast),
            "description": change.description,
        }

        def apply():
            self.objectives[change.name] = spec

        return "objective.edit", payload, apply

    def _prepare_remove_objective(self, change: RemoveObjective):
        if change.name not in self.objectives:
            raise UnknownEntity(f"unknown objective {change.name!r}")
        referencing = [
            m.name for m in self.models.values() if change.name in dict(m.terms)
        ]
        if referencing:
            raise ValidationFailed(
                [
                    {
                        "kind": "referential",
                        "message": (
                            f"objective {change.name!r} is still used by model(s): "
                            + ", ".join(sorted(referencing))
                        ),
                        "models": sorted(referencing),
                    }
                ]
            )
        payload = {"name": change.name}

        def apply():
            del self.objectives[change.name]

        return "objective.remove", payload, apply

    def _model_for_change(self, name: str) -> ModelSpec:
        model = self.models.get(name)
        if model is None:
            raise UnknownEntity(f"unknown model {name!r}")
        return model

    def _prepare_set_weight(self, change: SetWeight):
        model = self._model_for_change(change.model)
        weights = dict(model.terms)
        if change.objective not in weights:
            raise UnknownEntity(
                f"model {change.model!r} has no term for objective {change.objective!r}"
            )
        if not math.isfinite(change.weight):
            raise ValidationFailed(
                [{"kind": "error", "message": "weight must be finite"}]
            )
        old = weights[change.objective]
        new_terms = tuple(
            (obj, change.weight if obj == change.objective else w)
            for obj, w in model.terms
        )
        payload = {
            "model": change.model,
            "objective": change.objective,
            "old": old,
            "new": change.weight,
            "terms": dict(new_terms),
        }

        def apply():
            self.models[change.model] = ModelSpec(change.model, new_terms)
            self.current_model = change.model

        return "model.weight_change", payload, apply

    def _prepare_add_term(self, change: AddTerm):
        model = self._model_for_change(change.model)
        if change.objective in dict(model.terms):
            raise ValidationFailed(
                [
                    {
                        "kind": "error",
                        "message": (
                            f"model {change.model!r} already has a term for "
                            f"{change.objective!r}"
                        ),
                    }
                ]
            )
        if change.objective not in self.objectives:
            raise UnknownEntity(f"unknown objective {change.objective!r}")
        if not math.isfinite(change.weight):
            raise ValidationFailed(
                [{"kind": "error", "message": "weight must be finite"}]
            )
        new_terms = model.terms + ((change.objective, change.weight),)
        payload = {
            "model": change.model,
            "objective": change.objective,
            "weight": change.weight,
            "terms": dict(new_terms),
        }

        def apply():
            self.models[change.model] = ModelSpec(change.model, new_terms)
            self.current_model = change.model

        return "model.term_add", payload, apply

    def _prepare_remove_term(self, change: RemoveTerm):
        model = self._model_for_change(change.model)
        weights = dict(model.terms)
        if change.objective not in weights:
            raise UnknownEntity(
                f"model {change.model!r} has no term for objective {change.objective!r}"
            )
        if len(model.terms) == 1:
            raise ValidationFailed(
                [
                    {
                        "kind": "error",
                        "message": f"model {change.model!r} must keep at least one term",
                    }
                ]
            )
        new_terms = tuple((obj, w) for obj, w in model.terms if obj != change.objective)
        payload = {
            "model": change.model,
            "objective": change.objective,
            "old_weight": weights[change.objective],
            "terms": dict(new_terms),
        }

        def apply():
            self.models[change.model] = ModelSpec(change.model, new_terms)
            self.current_model = change.model

        return "model.term_remove", payload, apply

    def _prepare_define_metric(self, change: DefineMetric):
        if change.kind not in METRIC_KINDS:
            raise ValidationFailed(
                [{"kind": "error", "message": f"unknown metric kind {change.kind!r}"}]
            )
        ast = self._parse_checked(change.expr_text)
        ast2 = None
        if change.kind == "cross_entropy":
            if not change.expr2_text:
                raise ValidationFailed(
                    [
                        {
                            "kind": "error",
                            "message": "cross_entropy needs a probability expression",
                        }
                    ]
                )
            ast2 = self._parse_checked(change.expr2_text)
        else:
            if change.k is None or change.k <= 0:
                raise ValidationFailed(
                    [{"kind": "error", "message": "k must be a positive integer"}]
                )
        spec = MetricSpec(
            change.name, change.kind, ast, ast2, change.k, change.description
        )
        payload = {
            "name": change.name,
            "kind": change.kind,
            "expr": E.format_expr(ast),
            "expr2": E.format_expr(ast2) if ast2 is not None else None,
            "k": change.k,
            "description": change.description,
        }

        def apply():
            self.metrics[change.name] = spec

        return "metric.define", payload, apply

    def _prepare_define_slice(self, change: DefineSlice):
        if change.name == ALL_SLICE:
            raise ValidationFailed(
                [{"kind": "error", "message": f"slice name {ALL_SLICE!r} is reserved"}]
            )
        ast = self._parse_checked(change.predicate_text, query_level_only=True)
        spec = SliceSpec(change.name, ast)
        payload = {"name": change.name, "predicate": E.format_expr(ast)}

        def apply():
            self.slices[change.name] = spec

        return "slice.define", payload, apply

    # -- side-by-side --------------------------------------------------------

    def side_by_side(
        self,
        query_id,
        model_a: str,
        model_b: str,
        columns: Sequence[str] = (),
        actor: str | None = None,
        record: bool = True,
    ) -> dict:
        """Paired rankings, rank diff, attributions, and requested feature columns."""
        group = self.dataset.group(query_id)
        if group is None:
            raise UnknownQuery(f"unknown query {query_id!r}")
        for name in (model_a, model_b):
            if name not in self.models:
                raise UnknownModel(f"unknown model {name!r}")
        for name in columns:
            if name not in self.dataset.column_kinds():
                raise UnknownEntity(f"unknown column {name!r}")

        sides = {}
        rankings = {}
        for label, model_name in (("a", model_a), ("b", model_b)):
            scored = score_items(
                self.models[model_name], self.objectives, group, self.dataset
            )
            ranking = rank(scored, group.query_id)
            rankings[label] = ranking
            by_id = {s.item_id: s for s in scored}
            entries = []
            for item_id, score in ranking.entries:
                attr = attribute(by_id[item_id])
                entries.append(
                    {
                        "item_id": item_id,
                        "score": score,
                        "attribution": [
                            {"objective": obj, "contribution": c, "share": share}
                            for obj, c, share in attr.entries
                        ],
                        "all_zero": attr.all_zero,
                    }
                )
            sides[label] = {"model": model_name, "items": entries}

        diff = compare_rankings(rankings["a"], rankings["b"])
        feature_rows = {}
        for item in group.items:
            ctx = self.dataset.item_context(group, item)
            feature_rows[str(item.item_id)] = {name: ctx[name] for name in columns}

        if record:
            self.record_view(
                "example.view",
                {"query_id": group.query_id, "a": model_a, "b": model_b},
                actor,
            )
        return {
            "query_id": group.query_id,
            "a": sides["a"],
            "b": sides["b"],
            "diff": {
                "movements": [
                    {
                        "item_id": m.item_id,
                        "rank_a": m.rank_a,
                        "rank_b": m.rank_b,
                        "movement": m.movement,
                    }
                    for m in diff.movements
                ],
                "promoted": sorted(str(i) for i in diff.promoted),
                "demoted": sorted(str(i) for i in diff.demoted),
            },
            "columns": feature_rows,
        }

    # -- snapshot ---------------------------------------------------------------

    def export_snapshot(self) -> dict:
        """Design state plus the dataset content hash; importable elsewhere."""
        return {
            "version": 1,
            "dataset_sha256": self.dataset.content_hash,
            "baseline": self.baseline,
            "objectives": {
                name: {"expr": E.format_expr(o.expr), "description": o.description}
                for name, o in self.objectives.items()
            },
            "models": {
                name: {"terms": {obj: w for obj, w in m.terms}}
                for name, m in self.models.items()
            },
            "metrics": {
                name: {
                    "kind": m.kind,
                    "expr": E.format_expr(m.expr),
                    "expr2": E.format_expr(m.expr2) if m.expr2 is not None else None,
                    "k": m.k,
                    "description": m.description,
                }
                for name, m in self.metrics.items()
            },
            "slices": {
                name: {"predicate": E.format_expr(s.predicate)}
                for name, s in self.slices.items()
            },
        }

    @classmethod
    def import_snapshot(
        cls,
        document: Mapping,
        dataset: DatasetTable,
        **session_kwargs,
    ) -> "Workspace":
        """Rebuild a workspace from a snapshot; the dataset must hash-match."""
        if not isinstance(document, Mapping):
            raise SchemaMismatch("snapshot must be a JSON object")
        for key in ("dataset_sha256", "baseline", "objectives", "models", "metrics", "slices"):
            if key not in document:
                raise SchemaMismatch(f"snapshot is missing {key!r}")
        if document["dataset_sha256"] != dataset.content_hash:
            raise DatasetHashMismatch(
                "snapshot was exported against a different dataset file"
            )

        def parse_or_mismatch(text, what):
            try:
                return E.parse(text)
            except (E.ParseError, TypeError) as exc:
                raise SchemaMismatch(f"{what}: {exc}") from None

        try:
            objectives = {
                name: ObjectiveSpec(
                    name,
                    parse_or_mismatch(spec["expr"], f"objective {name!r}"),
                    spec.get("description", ""),
                )
                for name, spec in document["objectives"].items()
            }
            models = {}
            for name, spec in document["models"].items():
                terms = spec["terms"]
                for obj in terms:
                    if obj not in objectives:
                        raise SchemaMismatch(
                            f"model {name!r} references missing objective {obj!r}"
                        )
                models[name] = ModelSpec.from_weights(name, terms)
            metrics = {}
            for name, spec in document["metrics"].items():
                metrics[name] = MetricSpec(
                    name,
                    spec["kind"],
                    parse_or_mismatch(spec["expr"], f"metric {name!r}"),
                    parse_or_mismatch(spec["expr2"], f"metric {name!r}")
                    if spec.get("expr2")
                    else None,
                    spec.get("k"),
                    spec.get("description", ""),
                )
            slices = {
                name: SliceSpec(
                    name, parse_or_mismatch(spec["predicate"], f"slice {name!r}")
                )
                for name, spec in document["slices"].items()
            }
            baseline = document["baseline"]
            if baseline not in models:
                raise SchemaMismatch(f"baseline {baseline!r} is not a defined model")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaMismatch):
                raise
            raise SchemaMismatch(f"malformed snapshot: {exc}") from None
        return cls(dataset, objectives, models, baseline, metrics, slices, **session_kwargs)

    # -- event sourcing -----------------------------------------------------

    @staticmethod
    def mutation_from_event(event: SessionEvent) -> Mutation | None:
        """Typed mutation for a mutation event; None for view events."""
        p = event.payload
        if event.action == "objective.add":
            return AddObjective(p["name"], p["expr"], p.get("description", ""))
        if event.action == "objective.edit":
            return EditObjective(p["name"], p["new_expr"], p.get("description", ""))
        if event.action == "objective.remove":
            return RemoveObjective(p["name"])
        if event.action == "model.weight_change":
            return SetWeight(p["model"], p["objective"], float(p["new"]))
        if event.action == "model.term_add":
            return AddTerm(p["model"], p["objective"], float(p["weight"]))
        if event.action == "model.term_remove":
            return RemoveTerm(p["model"], p["objective"])
        if event.action == "metric.define":
            return DefineMetric(
                p["name"], p["kind"], p["expr"], p.get("expr2"), p.get("k"),
                p.get("description", ""),
            )
        if event.action == "slice.define":
            return DefineSlice(p["name"], p["predicate"])
        return None

    def replay(self, events: Iterable[SessionEvent]) -> None:
        """Apply the mutation events of a recorded log, in order."""
        for event in events:
            mutation = self.mutation_from_event(event)
            if mutation is not None:
                self.mutate(mutation)

    # -- equality helpers ------------------------------------------------------

    def state_dict(self) -> dict:
        """Canonical design state, for comparing two workspaces field by field."""
        return {
            "baseline": self.baseline,
            "objectives": {
                n: (E.format_expr(o.expr), o.description)
                for n, o in self.objectives.items()
            },
            "models": {n: tuple(m.terms) for n, m in self.models.items()},
            "metrics": {
                n: (
                    m.kind,
                    E.format_expr(m.expr),
                    E.format_expr(m.expr2) if m.expr2 is not None else None,
                    m.k,
                )
                for n, m in self.metrics.items()
            },
            "slices": {n: E.format_expr(s.predicate) for n, s in self.slices.items()},
        }

    def table_dict(self) -> dict:
        """Metric table cells as plain floats, for exact comparisons."""
        table = self._table
        return {
            "baseline": table.baseline,
            "cells": {
                key: (v.value if v.defined else None, v.query_count, table.deltas[key])
                for key, v in table.values.items()
            },
        }
