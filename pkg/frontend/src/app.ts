/**
 * Browser bootstrap: binds the store to the page. All feedback panels are
 * re-rendered from the latest consistent revision whenever the store
 * changes; there is no optimistic rendering, just a brief busy state while
 * the server recomputes.
 */

import { ApiClient } from "./api";
import { WorkbenchStore } from "./state";
import {
  renderErrorCard,
  renderMetricPanel,
  renderObjectiveBar,
  renderSideBySide,
  renderSliceTable,
} from "./render";
import { buildMetricPanel, buildSideBySide, buildSliceTable } from "./viewmodel";

function element<T extends HTMLElement>(id: string): T {
  const found = document.getElementById(id);
  if (!found) throw new Error(`missing #${id}`);
  return found as T;
}

function renderAll(store: WorkbenchStore) {
  element("objective-bar").innerHTML = renderObjectiveBar(store.objectives);
  element("error-card").innerHTML = renderErrorCard(store.error);
  element("status").textContent = store.busy
    ? "recomputing…"
    : store.revision !== null
      ? `revision ${store.revision}`
      : "loading…";
  if (!store.panels) return;
  const { table, compare, topMoved } = store.panels;
  element("metric-panel").innerHTML = renderMetricPanel(buildMetricPanel(table));
  element("side-by-side").innerHTML = compare
    ? renderSideBySide(buildSideBySide(compare))
    : "<p>select a query</p>";
  element("slice-table").innerHTML = topMoved
    ? renderSliceTable(buildSliceTable(table, topMoved))
    : "";
  renderModelEditor(store);
  renderQueryPicker(store);
}

function renderQueryPicker(store: WorkbenchStore) {
  const select = element<HTMLSelectElement>("query-picker");
  if (select.options.length !== store.queries.length) {
    select.innerHTML = store.queries
      .map((q) => `<option value="${q.replace(/"/g, "&quot;")}">${q}</option>`)
      .join("");
  }
  if (store.view.selectedQuery) select.value = store.view.selectedQuery;
}

function renderModelEditor(store: WorkbenchStore) {
  const container = element("model-editor");
  const model = store.models[store.view.modelB];
  if (!model) {
    container.innerHTML = "";
    return;
  }
  container.innerHTML = Object.entries(model.terms)
    .map(
      ([objective, weight]) =>
        `<label class="term">` +
        `<span>${objective}</span>` +
        `<input type="range" min="-5" max="5" step="0.1" value="${weight}" ` +
        `data-objective="${objective}">` +
        `<input type="number" step="0.1" value="${weight}" data-weight="${objective}">` +
        `</label>`,
    )
    .join("");
  for (const slider of container.querySelectorAll<HTMLInputElement>("input[type=range]")) {
    slider.addEventListener("change", () => {
      const objective = slider.dataset.objective!;
      void store.submitWeightChange(objective, Number(slider.value)).catch(() => {});
    });
  }
  for (const box of container.querySelectorAll<HTMLInputElement>("input[type=number]")) {
    box.addEventListener("change", () => {
      const weight = Number(box.value);
      if (!Number.isFinite(weight)) return; // client-side rejection, no request
      void store.submitWeightChange(box.dataset.weight!, weight).catch(() => {});
    });
  }
}

function wireForms(store: WorkbenchStore) {
  element<HTMLSelectElement>("query-picker").addEventListener("change", (ev) => {
    void store.selectQuery((ev.target as HTMLSelectElement).value);
  });
  const bind = (id: string, key: keyof typeof store.view.buffers) => {
    element<HTMLInputElement>(id).addEventListener("input", (ev) => {
      store.view.buffers[key] = (ev.target as HTMLInputElement).value;
    });
  };
  bind("objective-name", "objectiveName");
  bind("objective-expr", "objectiveExpr");
  bind("slice-name", "sliceName");
  bind("slice-predicate", "slicePredicate");
  bind("metric-name", "metricName");
  bind("metric-expr", "metricExpr");
  bind("metric-k", "metricK");
  element("objective-submit").addEventListener("click", () => {
    void store.defineObjective().catch(() => {});
  });
  element("slice-submit").addEventListener("click", () => {
    void store.defineSlice().catch(() => {});
  });
  element("metric-submit").addEventListener("click", () => {
    void store.defineMetric().catch(() => {});
  });
}

export async function start(base = ""): Promise<WorkbenchStore> {
  const store = new WorkbenchStore(new ApiClient(base, (url, init) => fetch(url, init)));
  store.subscribe(() => renderAll(store));
  wireForms(store);
  await store.init();
  renderAll(store);
  return store;
}

declare global {
  interface Window {
    rankbench?: { start: typeof start };
  }
}

if (typeof window !== "undefined" && typeof document !== "undefined") {
  window.rankbench = { start };
  if (document.readyState !== "loading") {
    void start();
  } else {
    document.addEventListener("DOMContentLoaded", () => void start());
  }
}
