"""HTTP session service over a workspace.

Resource-oriented JSON API: GET/PUT (and DELETE) on /objectives/{name},
/models/{name}, /metrics/{name}, /slices/{name}; GET /table, /compare,
/slices/top-moved; GET/POST /snapshot. Mutations recompute the metric table
before the response returns, and every view endpoint records the matching
session event, which feeds the offline activity analysis.

One extra fine-grained endpoint, PUT /models/{name}/terms/{objective},
carries explicit weight-change intent (a slider commit re-submitting the
current value still bumps the revision); a full-map PUT on /models/{name} is
diffed into elementary term mutations instead.
"""

from __future__ import annotations

from typing import Mapping

from fastapi import FastAPI, Header, Query, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import expr as E
from .metrics import MetricError, MetricValue, UnknownMetric, top_moved_slices
from .workspace import (
    AddObjective,
    AddTerm,
    DatasetHashMismatch,
    DefineMetric,
    DefineSlice,
    EditObjective,
    RemoveObjective,
    RemoveTerm,
    SchemaMismatch,
    SetWeight,
    UnknownEntity,
    UnknownModel,
    UnknownQuery,
    ValidationFailed,
    Workspace,
)


class ObjectiveIn(BaseModel):
    expr: str
    description: str = ""


class ModelIn(BaseModel):
    terms: dict[str, float]


class TermIn(BaseModel):
    weight: float


class MetricIn(BaseModel):
    kind: str
    expr: str
    expr2: str | None = None
    k: int | None = None
    description: str = ""


class SliceIn(BaseModel):
    predicate: str


class _Holder:
    """The live workspace; snapshot import swaps it for a fresh session."""

    def __init__(self, workspace: Workspace):
        self.ws = workspace


def _cell_json(key: tuple[str, str, str], value: MetricValue, delta: float | None) -> dict:
    model, metric, slice_name = key
    return {
        "model": model,
        "metric": metric,
        "slice": slice_name,
        "value": value.value if value.defined else None,
        "query_count": value.query_count,
        "defined": value.defined,
        "delta": delta,
    }


def _table_json(ws: Workspace, slice_name: str | None = None) -> dict:
    table = ws.table()
    cells = [
        _cell_json(key, value, table.deltas[key])
        for key, value in table.values.items()
        if slice_name is None or key[2] == slice_name
    ]
    return {
        "revision": ws.revision,
        "baseline": table.baseline,
        "models": list(table.models),
        "metrics": list(table.metrics),
        "slices": list(table.slices),
        "cells": cells,
    }


def _mutation_json(ws: Workspace, result) -> dict:
    return {
        "revision": result.revision,
        "seq": result.event.seq,
        "action": result.event.action,
        "recompute_ms": result.recompute_ms,
    }


def create_app(workspace: Workspace, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="rankbench", version="0.1.0")
    holder = _Holder(workspace)

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.exception_handler(ValidationFailed)
    async def _validation_failed(_req: Request, exc: ValidationFailed):
        return JSONResponse(
            status_code=422,
            content={"error": "validation_failed", "issues": exc.issues},
        )

    @app.exception_handler(UnknownEntity)
    @app.exception_handler(UnknownQuery)
    @app.exception_handler(UnknownModel)
    @app.exception_handler(UnknownMetric)
    async def _not_found(_req: Request, exc: Exception):
        return JSONResponse(status_code=404, content={"error": "not_found", "detail": str(exc)})

    @app.exception_handler(SchemaMismatch)
    async def _schema_mismatch(_req: Request, exc: SchemaMismatch):
        return JSONResponse(
            status_code=422, content={"error": "schema_mismatch", "detail": str(exc)}
        )

    @app.exception_handler(DatasetHashMismatch)
    async def _hash_mismatch(_req: Request, exc: DatasetHashMismatch):
        return JSONResponse(
            status_code=409, content={"error": "dataset_hash_mismatch", "detail": str(exc)}
        )

    @app.exception_handler(MetricError)
    async def _metric_error(_req: Request, exc: MetricError):
        return JSONResponse(status_code=422, content={"error": "metric_error", "detail": str(exc)})

    def ws() -> Workspace:
        return holder.ws

    # -- overview -----------------------------------------------------------

    @app.get("/")
    def overview():
        w = ws()
        return {
            "revision": w.revision,
            "baseline": w.baseline,
            "objectives": list(w.objectives),
            "models": list(w.models),
            "metrics": list(w.metrics),
            "slices": list(w.slices),
            "queries": len(w.dataset.groups),
            "rows": w.dataset.row_count,
        }

    @app.get("/queries")
    def list_queries():
        w = ws()
        return {
            "revision": w.revision,
            "queries": [str(g.query_id) for g in w.dataset.groups],
            "anecdotes": list(w.anecdotes),
        }

    # -- objectives -----------------------------------------------------------

    @app.get("/objectives")
    def list_objectives():
        w = ws()
        return {
            name: {"expr": E.format_expr(o.expr), "description": o.description}
            for name, o in w.objectives.items()
        }

    @app.get("/objectives/{name}")
    def get_objective(name: str):
        w = ws()
        spec = w.objectives.get(name)
        if spec is None:
            raise UnknownEntity(f"unknown objective {name!r}")
        return {"name": name, "expr": E.format_expr(spec.expr), "description": spec.description}

    @app.put("/objectives/{name}")
    def put_objective(name: str, body: ObjectiveIn, x_actor: str | None = Header(None)):
        w = ws()
        if name in w.objectives:
            change = EditObjective(name, body.expr, body.description)
        else:
            change = AddObjective(name, body.expr, body.description)
        return _mutation_json(w, w.mutate(change, actor=x_actor))

    @app.delete("/objectives/{name}")
    def delete_objective(name: str, x_actor: str | None = Header(None)):
        w = ws()
        return _mutation_json(w, w.mutate(RemoveObjective(name), actor=x_actor))

    # -- models -----------------------------------------------------------

    @app.get("/models")
    def list_models():
        w = ws()
        return {
            name: {"terms": dict(m.terms), "is_baseline": name == w.baseline}
            for name, m in w.models.items()
        }

    @app.get("/models/{name}")
    def get_model(name: str):
        w = ws()
        model = w.models.get(name)
        if model is None:
            raise UnknownModel(f"unknown model {name!r}")
        return {"name": name, "terms": dict(model.terms), "is_baseline": name == w.baseline}

    @app.put("/models/{name}")
    def put_model(name: str, body: ModelIn, x_actor: str | None = Header(None)):
        w = ws()
        model = w.models.get(name)
        if model is None:
            raise UnknownModel(f"unknown model {name!r}")
        if not body.terms:
            raise ValidationFailed(
                [{"kind": "error", "message": "a model needs at least one term"}]
            )
        old = dict(model.terms)
        new = {str(k): float(v) for k, v in body.terms.items()}
        events = []
        for obj, weight in new.items():
            if obj not in old:
                events.append(w.mutate(AddTerm(name, obj, weight), actor=x_actor))
        for obj, weight in new.items():
            if obj in old and old[obj] != weight:
                events.append(w.mutate(SetWeight(name, obj, weight), actor=x_actor))
        for obj in old:
            if obj not in new:
                events.append(w.mutate(RemoveTerm(name, obj), actor=x_actor))
        return {
            "revision": w.revision,
            "events": [r.event.seq for r in events],
            "terms": dict(w.models[name].terms),
        }

    @app.put("/models/{name}/terms/{objective}")
    def put_term(
        name: str, objective: str, body: TermIn, x_actor: str | None = Header(None)
    ):
        w = ws()
        model = w.models.get(name)
        if model is None:
            raise UnknownModel(f"unknown model {name!r}")
        if objective in dict(model.terms):
            change = SetWeight(name, objective, body.weight)
        else:
            change = AddTerm(name, objective, body.weight)
        return _mutation_json(w, w.mutate(change, actor=x_actor))

    @app.delete("/models/{name}/terms/{objective}")
    def delete_term(name: str, objective: str, x_actor: str | None = Header(None)):
        w = ws()
        return _mutation_json(w, w.mutate(RemoveTerm(name, objective), actor=x_actor))

    # -- metrics -----------------------------------------------------------

    @app.get("/metrics")
    def list_metrics():
        w = ws()
        return {
            name: {
                "kind": m.kind,
                "expr": E.format_expr(m.expr),
                "expr2": E.format_expr(m.expr2) if m.expr2 is not None else None,
                "k": m.k,
                "description": m.description,
            }
            for name, m in w.metrics.items()
        }

    @app.get("/metrics/{name}")
    def get_metric(name: str, x_actor: str | None = Header(None)):
        w = ws()
        spec = w.metrics.get(name)
        if spec is None:
            raise UnknownEntity(f"unknown metric {name!r}")
        w.record_view("metric.view", {"name": name}, actor=x_actor)
        table = w.table()
        return {
            "name": name,
            "kind": spec.kind,
            "expr": E.format_expr(spec.expr),
            "expr2": E.format_expr(spec.expr2) if spec.expr2 is not None else None,
            "k": spec.k,
            "description": spec.description,
            "cells": [
                _cell_json(key, value, table.deltas[key])
                for key, value in table.values.items()
                if key[1] == name
            ],
            "revision": w.revision,
        }

    @app.put("/metrics/{name}")
    def put_metric(name: str, body: MetricIn, x_actor: str | None = Header(None)):
        w = ws()
        change = DefineMetric(name, body.kind, body.expr, body.expr2, body.k, body.description)
        return _mutation_json(w, w.mutate(change, actor=x_actor))

    # -- slices -----------------------------------------------------------

    @app.get("/slices")
    def list_slices():
        w = ws()
        return {name: {"predicate": E.format_expr(s.predicate)} for name, s in w.slices.items()}

    @app.get("/slices/top-moved")
    def get_top_moved(
        metric: str,
        limit: int = 10,
        model: str | None = None,
    ):
        w = ws()
        table = w.table()
        names = top_moved_slices(table, metric, limit, model)
        chosen = model
        if chosen is None:
            candidates = [m for m in table.models if m != table.baseline]
            chosen = candidates[0] if len(candidates) == 1 else table.baseline
        return {
            "metric": metric,
            "model": chosen,
            "slices": [
                {"slice": name, "delta": table.deltas[(chosen, metric, name)]}
                for name in names
            ],
            "revision": w.revision,
        }

    @app.get("/slices/{name}")
    def get_slice(name: str, x_actor: str | None = Header(None)):
        w = ws()
        spec = w.slices.get(name)
        if spec is None:
            raise UnknownEntity(f"unknown slice {name!r}")
        w.record_view("slice.view", {"name": name}, actor=x_actor)
        table = w.table()
        return {
            "name": name,
            "predicate": E.format_expr(spec.predicate),
            "cells": [
                _cell_json(key, value, table.deltas[key])
                for key, value in table.values.items()
                if key[2] == name
            ],
            "revision": w.revision,
        }

    @app.put("/slices/{name}")
    def put_slice(name: str, body: SliceIn, x_actor: str | None = Header(None)):
        w = ws()
        return _mutation_json(w, w.mutate(DefineSlice(name, body.predicate), actor=x_actor))

    # -- table and side-by-side ------------------------------------------------

    @app.get("/table")
    def get_table(
        slice: str | None = Query(None), x_actor: str | None = Header(None)
    ):
        w = ws()
        scope = slice if slice is not None else "ALL"
        w.record_view("table.view", {"slice": scope}, actor=x_actor)
        return _table_json(w, slice_name=slice)

    @app.get("/compare")
    def get_compare(
        query: str,
        a: str,
        b: str,
        columns: str | None = None,
        x_actor: str | None = Header(None),
    ):
        w = ws()
        wanted = [c for c in (columns.split(",") if columns else []) if c]
        view = w.side_by_side(query, a, b, wanted, actor=x_actor)
        view["revision"] = w.revision
        return view

    # -- snapshot -----------------------------------------------------------

    @app.get("/snapshot")
    def export_snapshot():
        return ws().export_snapshot()

    @app.post("/snapshot")
    def import_snapshot(document: dict):
        w = ws()
        holder.ws = Workspace.import_snapshot(
            document,
            w.dataset,
            anecdotes=w.anecdotes,
            telemetry_dir=w.telemetry_dir,
            actor=w.actor,
        )
        return {"revision": holder.ws.revision, "imported": True}

    # -- events -----------------------------------------------------------

    @app.get("/events")
    def list_events(since: int = 0):
        w = ws()
        return [
            {
                "seq": e.seq,
                "timestamp": e.timestamp,
                "actor": e.actor,
                "action": e.action,
                "payload": dict(e.payload),
            }
            for e in w.events
            if e.seq > since
        ]

    return app
