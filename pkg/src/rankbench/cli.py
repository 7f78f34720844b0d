"""Command line: serve the workbench, batch-evaluate, diff, and analyze logs."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import click

from .analysis import activity_rows, read_event_log, session_metrics
from .config import load_config, open_workspace, open_workspace_file


@click.group()
def main():
    """Multi-objective ranker design and evaluation workbench."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option(
    "--ui",
    "ui_dir",
    default=None,
    type=click.Path(exists=True, file_okay=False),
    help="serve the built frontend directory at /ui",
)
def serve(config_path, port, host, ui_dir):
    """Run the HTTP session service for a workspace config."""
    import uvicorn

    from .service import create_app

    workspace = open_workspace_file(config_path)
    if ui_dir:
        click.echo(f"workbench UI at http://{host}:{port}/ui/")
    uvicorn.run(create_app(workspace, ui_dir=ui_dir), host=host, port=port)


@main.command("eval")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def eval_cmd(config_path, out_dir):
    """Compute the metric table and per-slice deltas; write CSV and JSON."""
    workspace = open_workspace_file(config_path)
    table = workspace.table()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = []
    for (model, metric, slice_name), value in table.values.items():
        rows.append(
            {
                "model": model,
                "metric": metric,
                "slice": slice_name,
                "value": value.value if value.defined else "",
                "query_count": value.query_count,
                "delta": _fmt_delta(table.deltas[(model, metric, slice_name)]),
            }
        )
    with open(out / "metric_table.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["model", "metric", "slice", "value", "query_count", "delta"]
        )
        writer.writeheader()
        writer.writerows(rows)

    doc = {
        "baseline": table.baseline,
        "models": list(table.models),
        "metrics": list(table.metrics),
        "slices": list(table.slices),
        "cells": [
            {
                "model": model,
                "metric": metric,
                "slice": slice_name,
                "value": value.value if value.defined else None,
                "query_count": value.query_count,
                "defined": value.defined,
                "delta": table.deltas[(model, metric, slice_name)],
            }
            for (model, metric, slice_name), value in table.values.items()
        ],
    }
    (out / "metric_table.json").write_text(json.dumps(doc, indent=2), encoding="utf-8")

    with open(out / "deltas.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "metric", "slice", "delta"])
        for (model, metric, slice_name), delta in table.deltas.items():
            if model != table.baseline:
                writer.writerow([model, metric, slice_name, _fmt_delta(delta)])

    click.echo(f"wrote metric_table.csv, metric_table.json, deltas.csv to {out}")


def _fmt_delta(delta):
    return "" if delta is None else repr(delta)


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--query", required=True)
@click.option("--a", "model_a", required=True)
@click.option("--b", "model_b", required=True)
@click.option("--columns", default="", help="comma-separated feature columns to show")
@click.option("--json", "as_json", is_flag=True, help="emit the raw comparison JSON")
def diff(config_path, query, model_a, model_b, columns, as_json):
    """Side-by-side comparison of two models on one query."""
    workspace = open_workspace_file(config_path)
    wanted = [c for c in columns.split(",") if c]
    view = workspace.side_by_side(query, model_a, model_b, wanted, record=False)
    if as_json:
        click.echo(json.dumps(view, indent=2))
        return
    movements = {m["item_id"]: m for m in view["diff"]["movements"]}
    click.echo(f"query: {view['query_id']}")
    click.echo(f"{'rank':>4}  {model_a:<28} {model_b:<28} movement")
    b_order = sorted(movements.values(), key=lambda m: m["rank_b"])
    for pos, m_a in enumerate(view["a"]["items"], start=1):
        left = str(m_a["item_id"])
        right = str(b_order[pos - 1]["item_id"])
        move = movements[b_order[pos - 1]["item_id"]]["movement"]
        badge = "" if move == 0 else (f"+{move}" if move > 0 else str(move))
        click.echo(f"{pos:>4}  {left:<28} {right:<28} {badge}")
    demoted = view["diff"]["demoted"]
    if demoted:
        click.echo("demoted: " + ", ".join(demoted))


@main.command()
@click.option("--log", "log_path", required=True, type=click.Path(exists=True))
@click.option("--anecdotes", default="", help="comma-separated anecdote query ids")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option(
    "--config",
    "config_path",
    default=None,
    type=click.Path(exists=True),
    help="workspace config supplying the initial baseline trade-off",
)
def analyze(log_path, anecdotes, out_path, config_path):
    """Classify a telemetry log and write session measures plus an activity CSV."""
    events = read_event_log(log_path)
    anecdote_list = [q.strip() for q in anecdotes.split(",") if q.strip()]
    initial_terms = None
    if config_path:
        cfg = load_config(config_path)
        initial_terms = cfg.models[cfg.baseline]
        if not anecdote_list:
            anecdote_list = list(cfg.anecdotes)

    metrics = session_metrics(events, anecdote_list, initial_terms)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(metrics.to_dict(), indent=2), encoding="utf-8")

    rows = activity_rows(events, anecdote_list, initial_terms)
    activity_path = out.with_name(out.stem + "_activity.csv")
    with open(activity_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)

    click.echo(json.dumps(metrics.to_dict(), indent=2))
    click.echo(f"wrote {out} and {activity_path}")


if __name__ == "__main__":
    main()
