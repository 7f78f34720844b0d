import { describe, expect, it } from "vitest";

import {
  escapeHtml,
  renderErrorCard,
  renderMetricPanel,
  renderObjectiveBar,
  renderSideBySide,
  renderSliceTable,
} from "../src/render";
import { buildMetricPanel, buildSideBySide, buildSliceTable } from "../src/viewmodel";
import type { CompareResponse, TableResponse, TopMovedResponse } from "../src/types";

import compareAfter from "../fixtures/compare_after.json";
import objectives from "../fixtures/objectives.json";
import tableAfter from "../fixtures/table_after.json";
import topMovedAfter from "../fixtures/top_moved_after.json";
import validationError from "../fixtures/validation_error.json";

const compare = compareAfter as unknown as CompareResponse;
const table = tableAfter as unknown as TableResponse;
const topMoved = topMovedAfter as unknown as TopMovedResponse;

describe("escapeHtml", () => {
  it("escapes markup and quotes", () => {
    expect(escapeHtml(`<b a="x" b='y'>&`)).toBe(
      "&lt;b a=&quot;x&quot; b=&#39;y&#39;&gt;&amp;",
    );
  });
});

describe("renderSideBySide", () => {
  it("emits one badge per item with the movement in a data attribute", () => {
    const html = renderSideBySide(buildSideBySide(compare));
    for (const movement of compare.diff.movements) {
      expect(html).toContain(`data-item="${movement.item_id}"`);
      expect(html).toContain(`data-movement="${movement.movement}"`);
    }
    expect(html).toContain(`data-revision="${compare.revision}"`);
    // a planted demotion renders a ▼ badge
    expect(html).toMatch(/badge down[^>]*>▼/);
  });

  it("renders attribution bars with percentage widths", () => {
    const html = renderSideBySide(buildSideBySide(compare));
    expect(html).toMatch(/class="segment[^"]*" data-objective="exact_purchase"/);
    expect(html).toMatch(/width:\d+(\.\d+)?%/);
  });
});

describe("renderMetricPanel", () => {
  it("prints cell values verbatim", () => {
    const html = renderMetricPanel(buildMetricPanel(table));
    for (const cell of table.cells.slice(0, 6)) {
      if (cell.defined && cell.value !== null) {
        expect(html).toContain(`<span class="value">${escapeHtml(String(cell.value))}</span>`);
      }
    }
    expect(html).toContain(`data-revision="${table.revision}"`);
  });

  it("marks deltas with direction classes for candidates only", () => {
    const html = renderMetricPanel(buildMetricPanel(table));
    expect(html).toMatch(/class="cell up"[^>]*data-metric="exact_density"/);
    expect(html).toMatch(/class="cell down"[^>]*data-metric="ndcg_purchase_prob"/);
  });
});

describe("renderSliceTable", () => {
  it("keeps the top-moved order", () => {
    const html = renderSliceTable(buildSliceTable(table, topMoved));
    const order = [...html.matchAll(/data-slice="([^"]+)"/g)].map((m) => m[1]);
    expect(order).toEqual(topMoved.slices.map((s) => s.slice));
  });
});

describe("renderObjectiveBar", () => {
  it("shows each objective with its expression", () => {
    const html = renderObjectiveBar(objectives);
    expect(html).toContain("exact_purchase");
    expect(html).toContain(escapeHtml("esci_label == 'E'"));
  });
});

describe("renderErrorCard", () => {
  it("renders the server issues with offsets", () => {
    const html = renderErrorCard({
      source: "objective",
      issues: (validationError as { issues: { kind: string; message: string; offset?: number }[] }).issues,
      message: "nope",
    });
    expect(html).toContain("change rejected");
    expect(html).toContain("at offset");
    expect(renderErrorCard(null)).toBe("");
  });
});
