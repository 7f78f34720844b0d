#!/usr/bin/env python3
"""Record API responses from the live service into frontend/fixtures/.

The frontend contract tests replay these files instead of talking to a
server, so they must come from the real service over the shipped fixture
workspace. Re-run after changing the API surface or the fixture dataset.

The recorded flow is the walkthrough the UI tests exercise: look at the
initial table, raise exact_purchase 0.2 -> 1.5, then re-fetch every panel
at the new revision.
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from rankbench.config import open_workspace_file
from rankbench.service import create_app

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "frontend" / "fixtures"


def main():
    workspace = open_workspace_file(ROOT / "fixtures" / "workspace.yaml", telemetry_dir=None)
    recorded: dict[str, object] = {}
    with TestClient(create_app(workspace)) as client:
        def grab(name: str, response):
            assert response.status_code == 200, (name, response.status_code, response.text)
            recorded[name] = response.json()

        compare_params = {
            "query": "30 quart coolers",
            "a": "baseline",
            "b": "candidate",
            "columns": "esci_label,purchase_probability,review_rating",
        }

        grab("workspace", client.get("/"))
        grab("queries", client.get("/queries"))
        grab("objectives", client.get("/objectives"))
        grab("models", client.get("/models"))
        grab("metrics", client.get("/metrics"))
        grab("slices", client.get("/slices"))
        grab("table_before", client.get("/table"))
        grab("compare_before", client.get("/compare", params=compare_params))
        grab(
            "top_moved_before",
            client.get("/slices/top-moved", params={"metric": "exact_density", "limit": 5}),
        )
        grab(
            "weight_change",
            client.put("/models/candidate/terms/exact_purchase", json={"weight": 1.5}),
        )
        grab("table_after", client.get("/table"))
        grab("compare_after", client.get("/compare", params=compare_params))
        grab(
            "top_moved_after",
            client.get("/slices/top-moved", params={"metric": "exact_density", "limit": 5}),
        )
        # an invalid definition, for the inline-error rendering test
        bad = client.put("/objectives/broken", json={"expr": "(click_probability"})
        assert bad.status_code == 422
        recorded["validation_error"] = bad.json()

    OUT.mkdir(parents=True, exist_ok=True)
    for name, payload in recorded.items():
        (OUT / f"{name}.json").write_text(
            json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8"
        )
    print(f"recorded {len(recorded)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
