/**
 * Workbench view state and fetch orchestration.
 *
 * Invariants the store maintains:
 *  - at most one mutation in flight; further submissions are rejected
 *  - after any successful mutation every panel is re-fetched until all
 *    carry one single workspace revision (no mixed-revision render)
 *  - edit buffers never touch server state until submitted, and a rejected
 *    submission keeps the buffer so the user can fix it in place
 */

import { ApiClient, ApiError } from "./api";
import type {
  CompareResponse,
  MetricMap,
  ModelMap,
  ObjectiveMap,
  SliceMap,
  TableResponse,
  TopMovedResponse,
  ValidationIssue,
} from "./types";

export interface EditBuffers {
  objectiveName: string;
  objectiveExpr: string;
  metricName: string;
  metricKind: string;
  metricExpr: string;
  metricK: string;
  sliceName: string;
  slicePredicate: string;
}

export interface PanelData {
  table: TableResponse;
  compare: CompareResponse | null;
  topMoved: TopMovedResponse | null;
}

export interface ViewState {
  selectedQuery: string | null;
  modelA: string;
  modelB: string;
  visibleColumns: string[];
  pinnedMetric: string | null;
  pinnedSlices: string[];
  buffers: EditBuffers;
}

export interface InlineError {
  source: string;
  issues: ValidationIssue[];
  message: string;
}

const EMPTY_BUFFERS: EditBuffers = {
  objectiveName: "",
  objectiveExpr: "",
  metricName: "",
  metricKind: "density",
  metricExpr: "",
  metricK: "8",
  sliceName: "",
  slicePredicate: "",
};

export class WorkbenchStore {
  readonly api: ApiClient;
  view: ViewState;
  objectives: ObjectiveMap = {};
  models: ModelMap = {};
  metricDefs: MetricMap = {};
  sliceDefs: SliceMap = {};
  queries: string[] = [];
  anecdotes: string[] = [];
  panels: PanelData | null = null;
  /** revision shown by every panel; null until the first full load */
  revision: number | null = null;
  error: InlineError | null = null;
  busy = false;
  private listeners: (() => void)[] = [];

  constructor(api: ApiClient) {
    this.api = api;
    this.view = {
      selectedQuery: null,
      modelA: "",
      modelB: "",
      visibleColumns: ["esci_label"],
      pinnedMetric: null,
      pinnedSlices: [],
      buffers: { ...EMPTY_BUFFERS },
    };
  }

  subscribe(listener: () => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify() {
    for (const listener of this.listeners) listener();
  }

  /** Initial load: entity listings, defaults, then a consistent panel fetch. */
  async init(): Promise<void> {
    const [overview, queries, objectives, models, metricDefs, sliceDefs] =
      await Promise.all([
        this.api.overview(),
        this.api.queries(),
        this.api.objectives(),
        this.api.models(),
        this.api.metrics(),
        this.api.slices(),
      ]);
    this.objectives = objectives;
    this.models = models;
    this.metricDefs = metricDefs;
    this.sliceDefs = sliceDefs;
    this.queries = queries.queries;
    this.anecdotes = queries.anecdotes;

    const candidates = Object.keys(models).filter((m) => !models[m]?.is_baseline);
    this.view.modelA = overview.baseline;
    this.view.modelB = candidates[0] ?? overview.baseline;
    this.view.selectedQuery = queries.anecdotes[0] ?? queries.queries[0] ?? null;
    this.view.pinnedMetric = overview.metrics[0] ?? null;
    await this.refreshPanels();
    this.notify();
  }

  /**
   * Fetch all panels and retry until they agree on one revision (a mutation
   * from another session can land between fetches).
   */
  async refreshPanels(maxAttempts = 3): Promise<void> {
    for (let attempt = 0; attempt < maxAttempts; attempt++) {
      const table = await this.api.table();
      const compare = this.view.selectedQuery
        ? await this.api.compare(
            this.view.selectedQuery,
            this.view.modelA,
            this.view.modelB,
            this.view.visibleColumns,
          )
        : null;
      const topMoved = this.view.pinnedMetric
        ? await this.api.topMoved(this.view.pinnedMetric, 10)
        : null;
      const revisions = [table.revision];
      if (compare) revisions.push(compare.revision);
      if (topMoved) revisions.push(topMoved.revision);
      if (revisions.every((r) => r === table.revision)) {
        this.panels = { table, compare, topMoved };
        this.revision = table.revision;
        this.notify();
        return;
      }
    }
    throw new Error("panels kept changing revision while refreshing");
  }

  async selectQuery(query: string): Promise<void> {
    this.view.selectedQuery = query;
    await this.refreshPanels();
  }

  async selectModels(a: string, b: string): Promise<void> {
    this.view.modelA = a;
    this.view.modelB = b;
    await this.refreshPanels();
  }

  /** Commit one weight; on success every panel reflects the new revision. */
  async submitWeightChange(objective: string, weight: number): Promise<number> {
    if (!Number.isFinite(weight)) {
      throw new Error("weight must be a finite number");
    }
    return this.mutate("weight", async () => {
      const result = await this.api.setWeight(this.view.modelB, objective, weight);
      const model = this.models[this.view.modelB];
      if (model) model.terms[objective] = weight;
      return result.revision;
    });
  }

  async defineObjective(): Promise<number> {
    const { objectiveName, objectiveExpr } = this.view.buffers;
    return this.mutate("objective", async () => {
      const result = await this.api.putObjective(objectiveName, objectiveExpr);
      this.objectives = await this.api.objectives();
      this.view.buffers.objectiveName = "";
      this.view.buffers.objectiveExpr = "";
      return result.revision;
    });
  }

  async defineMetric(): Promise<number> {
    const { metricName, metricKind, metricExpr, metricK } = this.view.buffers;
    return this.mutate("metric", async () => {
      const result = await this.api.putMetric(metricName, {
        kind: metricKind,
        expr: metricExpr,
        k: metricKind === "cross_entropy" ? null : Number(metricK),
      });
      this.metricDefs = await this.api.metrics();
      this.view.buffers.metricName = "";
      this.view.buffers.metricExpr = "";
      return result.revision;
    });
  }

  async defineSlice(): Promise<number> {
    const { sliceName, slicePredicate } = this.view.buffers;
    return this.mutate("slice", async () => {
      const result = await this.api.putSlice(sliceName, slicePredicate);
      this.sliceDefs = await this.api.slices();
      this.view.buffers.sliceName = "";
      this.view.buffers.slicePredicate = "";
      return result.revision;
    });
  }

  /** Single-flight mutation wrapper: run, then refresh to one revision. */
  private async mutate(source: string, action: () => Promise<number>): Promise<number> {
    if (this.busy) {
      throw new Error("another change is still being applied");
    }
    this.busy = true;
    this.error = null;
    this.notify();
    try {
      const revision = await action();
      await this.refreshPanels();
      return revision;
    } catch (err) {
      if (err instanceof ApiError) {
        // validation failed: keep the edit buffers, surface the report
        this.error = {
          source,
          issues: err.issues,
          message: err.issues.map((i) => i.message).join("; ") || err.message,
        };
        this.notify();
      }
      throw err;
    } finally {
      this.busy = false;
      this.notify();
    }
  }
}
