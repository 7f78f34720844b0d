#!/usr/bin/env python3
"""Drive a scripted design session end to end and analyze its telemetry.

Walks the running-example flow against the shipped fixture workspace:
inspect the baseline, raise exact_purchase 0.2 -> 1.5, check the anecdote
examples and the quantity slice, define a custom metric and an extra
objective, and settle on a compromise weight. The session events are
written as JSONL telemetry, then classified into the activity taxonomy to
produce the five session measures.

Usage: python scripts/demo_session.py [out_dir]
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from rankbench.analysis import activity_rows, session_metrics
from rankbench.config import load_config, open_workspace
from rankbench.workspace import AddObjective, AddTerm, DefineMetric, DefineSlice, SetWeight

ROOT = Path(__file__).resolve().parent.parent


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "out" / "demo"
    out.mkdir(parents=True, exist_ok=True)

    config = load_config(ROOT / "fixtures" / "workspace.yaml")
    ws = open_workspace(config, telemetry_dir=out / "telemetry", actor="demo")

    def show_table(slice_name="ALL"):
        ws.record_view("table.view", {"slice": slice_name})
        table = ws.table()
        print(f"-- metric table @revision {ws.revision} (slice {slice_name})")
        for metric in table.metrics:
            cell = table.value("candidate", metric, slice_name)
            delta = table.delta("candidate", metric, slice_name)
            print(f"   {metric:>22}: {cell.value:.4f}  ({delta:+.4f} vs baseline)")

    def show_example(query):
        view = ws.side_by_side(query, "baseline", "candidate")
        demoted = ", ".join(view["diff"]["demoted"]) or "none"
        print(f"-- {query!r}: demoted items: {demoted}")

    print(f"loaded {len(ws.dataset.groups)} queries x 16 items")
    show_table()
    show_example("30 quart coolers")

    print("\nraising exact_purchase weight 0.2 -> 1.5")
    ws.mutate(SetWeight("candidate", "exact_purchase", 1.5))
    show_table()
    show_example("30 quart coolers")
    show_table("quantities")

    print("\ndefining a popularity metric and a scoped objective")
    ws.mutate(
        DefineMetric(
            "highly_rated_top8",
            "mean",
            "(review_rating > 4)",
            k=8,
            description="share of top-8 items rated above 4",
        )
    )
    ws.record_view("metric.view", {"name": "highly_rated_top8"})
    ws.mutate(DefineSlice("hoodies", "matches(query_text, 'hoodie')"))
    ws.record_view("slice.view", {"name": "hoodies"})
    ws.mutate(
        AddObjective(
            "exact_for_quantities",
            "(esci_label == 'E') * matches(query_text, '[0-9]+')",
            "exact match, scoped to quantity queries",
        )
    )
    ws.mutate(AddTerm("candidate", "exact_for_quantities", 0.5))
    show_example("uconn hoodie")

    print("\nsettling on a compromise weight 0.8")
    ws.mutate(SetWeight("candidate", "exact_purchase", 0.8))
    show_table()
    show_example("30 quart coolers")

    log_path = out / "telemetry" / "demo.jsonl"
    metrics = session_metrics(
        ws.events, config.anecdotes, config.models[config.baseline]
    )
    (out / "session_metrics.json").write_text(
        json.dumps(metrics.to_dict(), indent=2), encoding="utf-8"
    )
    rows = activity_rows(ws.events, config.anecdotes, config.models[config.baseline])
    strip = out / "activity.csv"
    with open(strip, "w", encoding="utf-8") as fh:
        fh.write(",".join(rows[0].keys()) + "\n")
        for row in rows:
            fh.write(",".join(str(v).replace(",", ";") for v in row.values()) + "\n")

    print(f"\nsession of {len(ws.events)} events -> {log_path}")
    print(json.dumps(metrics.to_dict(), indent=2))
    print(f"wrote {out / 'session_metrics.json'} and {strip}")


if __name__ == "__main__":
    main()
