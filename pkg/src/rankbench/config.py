"""Declarative workspace configuration.

A YAML (or JSON) file bootstraps a workspace: dataset path plus schema, and
objective/model/metric/slice definitions written as expression strings. See
fixtures/workspace.yaml for a complete example.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from . import expr as E
from .dataset import ColumnSchema, load_dataset_file
from .metrics import MetricSpec, SliceSpec
from .ranker import ModelSpec, ObjectiveSpec
from .workspace import Workspace


class ConfigError(Exception):
    pass


@dataclass
class WorkspaceConfig:
    dataset_path: Path
    dataset_format: str
    schema: tuple[ColumnSchema, ...]
    objectives: dict[str, tuple[str, str]]  # name -> (expr text, description)
    models: dict[str, dict[str, float]]
    baseline: str
    metrics: dict[str, dict]
    slices: dict[str, str]
    anecdotes: tuple[str, ...] = ()
    telemetry_dir: Path | None = None


def load_config(path: str | Path) -> WorkspaceConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(raw, Mapping):
        raise ConfigError(f"{path}: config must be a mapping")
    base = path.parent

    dataset_cfg = _require(raw, "dataset", Mapping, path)
    dataset_path = base / str(_require(dataset_cfg, "path", str, path))
    dataset_format = dataset_cfg.get("format", "csv")
    schema_raw = _require(dataset_cfg, "schema", list, path)
    schema = []
    for entry in schema_raw:
        try:
            schema.append(
                ColumnSchema(str(entry["name"]), str(entry["kind"]), str(entry["role"]))
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: bad schema entry {entry!r}: {exc}") from None

    objectives = {}
    for name, spec in _require(raw, "objectives", Mapping, path).items():
        if isinstance(spec, str):
            objectives[str(name)] = (spec, "")
        elif isinstance(spec, Mapping):
            objectives[str(name)] = (
                str(_require(spec, "expr", str, path)),
                str(spec.get("description", "")),
            )
        else:
            raise ConfigError(f"{path}: objective {name!r} must be a string or mapping")

    models = {}
    for name, weights in _require(raw, "models", Mapping, path).items():
        if not isinstance(weights, Mapping):
            raise ConfigError(f"{path}: model {name!r} must map objectives to weights")
        models[str(name)] = {str(obj): float(w) for obj, w in weights.items()}

    baseline = str(_require(raw, "baseline", str, path))

    metrics = {}
    for name, spec in raw.get("metrics", {}).items():
        if not isinstance(spec, Mapping):
            raise ConfigError(f"{path}: metric {name!r} must be a mapping")
        metrics[str(name)] = dict(spec)

    slices = {}
    for name, spec in raw.get("slices", {}).items():
        if isinstance(spec, str):
            slices[str(name)] = spec
        elif isinstance(spec, Mapping) and "predicate" in spec:
            slices[str(name)] = str(spec["predicate"])
        else:
            raise ConfigError(f"{path}: slice {name!r} needs a predicate string")

    anecdotes = tuple(str(q) for q in raw.get("anecdotes", []))
    telemetry_dir = raw.get("telemetry_dir")
    return WorkspaceConfig(
        dataset_path=dataset_path,
        dataset_format=str(dataset_format),
        schema=tuple(schema),
        objectives=objectives,
        models=models,
        baseline=baseline,
        metrics=metrics,
        slices=slices,
        anecdotes=anecdotes,
        telemetry_dir=base / str(telemetry_dir) if telemetry_dir else None,
    )


def _require(mapping: Mapping, key: str, kind, path):
    if key not in mapping:
        raise ConfigError(f"{path}: missing required key {key!r}")
    value = mapping[key]
    if not isinstance(value, kind):
        raise ConfigError(f"{path}: key {key!r} has the wrong type")
    return value


def open_workspace(config: WorkspaceConfig, **session_kwargs) -> Workspace:
    """Load the dataset and build the initial workspace from a parsed config."""
    dataset = load_dataset_file(config.dataset_path, config.dataset_format, config.schema)

    def parse_named(text: str, what: str) -> E.Expr:
        try:
            return E.parse(text)
        except E.ParseError as exc:
            raise ConfigError(f"{what}: {exc}") from None

    objectives = {
        name: ObjectiveSpec(name, parse_named(text, f"objective {name!r}"), desc)
        for name, (text, desc) in config.objectives.items()
    }
    models = {
        name: ModelSpec.from_weights(name, weights)
        for name, weights in config.models.items()
    }
    metrics = {}
    for name, spec in config.metrics.items():
        kind = spec.get("kind")
        expr_text = spec.get("expr") or spec.get("gain") or spec.get("predicate") or spec.get("labels")
        if not kind or not expr_text:
            raise ConfigError(f"metric {name!r} needs a kind and an expression")
        expr2_text = spec.get("expr2") or spec.get("probs")
        try:
            metrics[name] = MetricSpec(
                name,
                str(kind),
                parse_named(str(expr_text), f"metric {name!r}"),
                parse_named(str(expr2_text), f"metric {name!r}") if expr2_text else None,
                int(spec["k"]) if spec.get("k") is not None else None,
                str(spec.get("description", "")),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    slices = {
        name: SliceSpec(name, parse_named(text, f"slice {name!r}"))
        for name, text in config.slices.items()
    }
    session_kwargs.setdefault("anecdotes", config.anecdotes)
    session_kwargs.setdefault("telemetry_dir", config.telemetry_dir)
    return Workspace(
        dataset, objectives, models, config.baseline, metrics, slices, **session_kwargs
    )


def open_workspace_file(path: str | Path, **session_kwargs) -> Workspace:
    return open_workspace(load_config(path), **session_kwargs)
