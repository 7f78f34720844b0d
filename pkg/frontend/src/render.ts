/**
 * HTML renderers for the workbench panels. Pure string builders so they are
 * testable without a DOM; app.ts assigns the output to container elements.
 */

import type {
  AttributionView,
  MetricPanelView,
  SideBySideRow,
  SideBySideView,
  SliceTableView,
} from "./viewmodel";
import type { InlineError } from "./state";
import type { ObjectiveMap } from "./types";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

function attributionHtml(attribution: AttributionView): string {
  if (attribution.allZero) {
    return `<div class="attribution placeholder">${escapeHtml(
      attribution.placeholder ?? "no contribution",
    )}</div>`;
  }
  const segments = attribution.segments
    .map(
      (segment) =>
        `<span class="segment${segment.negative ? " negative" : ""}" ` +
        `data-objective="${escapeHtml(segment.objective)}" ` +
        `style="width:${segment.widthPct.toFixed(2)}%" ` +
        `title="${escapeHtml(segment.objective)}: ${segment.contribution}"></span>`,
    )
    .join("");
  return `<div class="attribution">${segments}</div>`;
}

function rowHtml(row: SideBySideRow): string {
  const badgeClass = row.promoted ? "badge up" : row.demoted ? "badge down" : "badge";
  const badge = row.badge
    ? `<span class="${badgeClass}" data-movement="${row.movement}">${row.badge}</span>`
    : `<span class="badge" data-movement="0"></span>`;
  const columns = Object.entries(row.columns)
    .map(([name, value]) => `<span class="col">${escapeHtml(name)}=${escapeHtml(String(value))}</span>`)
    .join(" ");
  return (
    `<li class="item" data-item="${escapeHtml(row.itemId)}">` +
    `<span class="rank">${row.rank}</span>` +
    `<span class="item-id">${escapeHtml(row.itemId)}</span>` +
    badge +
    `<span class="score">${row.score}</span>` +
    (columns ? `<span class="columns">${columns}</span>` : "") +
    attributionHtml(row.attribution) +
    `</li>`
  );
}

export function renderSideBySide(view: SideBySideView): string {
  const list = (side: { model: string; rows: SideBySideRow[] }) =>
    `<div class="ranking"><h3>${escapeHtml(side.model)}</h3><ol>` +
    side.rows.map(rowHtml).join("") +
    `</ol></div>`;
  return (
    `<section class="side-by-side" data-revision="${view.revision}" ` +
    `data-query="${escapeHtml(view.query)}">` +
    list(view.left) +
    list(view.right) +
    `</section>`
  );
}

export function renderMetricPanel(view: MetricPanelView): string {
  const header =
    `<tr><th>metric</th><th>slice</th>` +
    view.models.map((m) => `<th>${escapeHtml(m)}</th>`).join("") +
    `</tr>`;
  const rows = view.rows
    .map((row) => {
      const cells = row.cells
        .map(
          (cell) =>
            `<td class="cell ${cell.direction}" data-model="${escapeHtml(cell.model)}" ` +
            `data-metric="${escapeHtml(row.metric)}" data-slice="${escapeHtml(row.slice)}">` +
            `<span class="value">${escapeHtml(cell.valueText)}</span>` +
            (cell.model === view.baseline || !cell.deltaText
              ? ""
              : `<span class="delta">${escapeHtml(cell.deltaText)}</span>`) +
            `</td>`,
        )
        .join("");
      return (
        `<tr><td>${escapeHtml(row.metric)}</td>` +
        `<td>${escapeHtml(row.slice)}</td>${cells}</tr>`
      );
    })
    .join("");
  return (
    `<table class="metric-panel" data-revision="${view.revision}">` +
    `<thead>${header}</thead><tbody>${rows}</tbody></table>`
  );
}

export function renderSliceTable(view: SliceTableView): string {
  const rows = view.rows
    .map(
      (row) =>
        `<tr data-slice="${escapeHtml(row.slice)}">` +
        `<td>${escapeHtml(row.slice)}</td>` +
        `<td>${row.queryCount}</td>` +
        `<td class="delta">${escapeHtml(row.deltaText)}</td></tr>`,
    )
    .join("");
  return (
    `<table class="slice-table" data-revision="${view.revision}" ` +
    `data-metric="${escapeHtml(view.metric)}">` +
    `<thead><tr><th>slice</th><th>queries</th>` +
    `<th>Δ ${escapeHtml(view.metric)}</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderObjectiveBar(objectives: ObjectiveMap): string {
  const chips = Object.entries(objectives)
    .map(
      ([name, def]) =>
        `<span class="objective-chip" data-name="${escapeHtml(name)}" ` +
        `title="${escapeHtml(def.description)}">` +
        `<strong>${escapeHtml(name)}</strong> = <code>${escapeHtml(def.expr)}</code></span>`,
    )
    .join("");
  return `<div class="objective-bar">${chips}</div>`;
}

export function renderErrorCard(error: InlineError | null): string {
  if (!error) return "";
  const issues = error.issues
    .map(
      (issue) =>
        `<li data-kind="${escapeHtml(issue.kind)}">${escapeHtml(issue.message)}` +
        (issue.offset !== undefined ? ` <em>at offset ${issue.offset}</em>` : "") +
        `</li>`,
    )
    .join("");
  return (
    `<div class="error-card" data-source="${escapeHtml(error.source)}">` +
    `<strong>change rejected</strong><ul>${issues}</ul></div>`
  );
}
