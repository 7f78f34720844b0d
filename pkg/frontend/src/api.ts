/**
 * Typed client for the rankbench session service. Every rendered number in
 * the UI comes from these calls; the fetch implementation is injectable so
 * tests can replay recorded responses.
 */

import type {
  CompareResponse,
  MetricMap,
  ModelMap,
  MutationResponse,
  ObjectiveMap,
  QueryListing,
  SliceMap,
  TableResponse,
  TopMovedResponse,
  ValidationErrorBody,
  WorkspaceOverview,
} from "./types";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Server-side rejection (validation failure, unknown entity, ...). */
export class ApiError extends Error {
  readonly status: number;
  readonly body: ValidationErrorBody | null;

  constructor(status: number, message: string, body: ValidationErrorBody | null) {
    super(message);
    this.status = status;
    this.body = body;
  }

  get issues() {
    return this.body?.issues ?? [];
  }
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;
  private readonly actor: string | null;

  constructor(base = "", fetchFn: FetchLike = fetch, actor: string | null = null) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = fetchFn;
    this.actor = actor;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (this.actor) headers["x-actor"] = this.actor;
    const response = await this.fetchFn(this.base + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let parsed: ValidationErrorBody | null = null;
      try {
        parsed = (await response.json()) as ValidationErrorBody;
      } catch {
        parsed = null;
      }
      const detail = parsed ? JSON.stringify(parsed) : response.statusText;
      throw new ApiError(response.status, `${method} ${path}: ${detail}`, parsed);
    }
    return (await response.json()) as T;
  }

  overview(): Promise<WorkspaceOverview> {
    return this.request("GET", "/");
  }

  queries(): Promise<QueryListing> {
    return this.request("GET", "/queries");
  }

  objectives(): Promise<ObjectiveMap> {
    return this.request("GET", "/objectives");
  }

  models(): Promise<ModelMap> {
    return this.request("GET", "/models");
  }

  metrics(): Promise<MetricMap> {
    return this.request("GET", "/metrics");
  }

  slices(): Promise<SliceMap> {
    return this.request("GET", "/slices");
  }

  table(slice?: string): Promise<TableResponse> {
    const suffix = slice ? `?slice=${encodeURIComponent(slice)}` : "";
    return this.request("GET", `/table${suffix}`);
  }

  compare(query: string, a: string, b: string, columns: string[]): Promise<CompareResponse> {
    const params = new URLSearchParams({ query, a, b });
    if (columns.length) params.set("columns", columns.join(","));
    return this.request("GET", `/compare?${params.toString()}`);
  }

  topMoved(metric: string, limit: number, model?: string): Promise<TopMovedResponse> {
    const params = new URLSearchParams({ metric, limit: String(limit) });
    if (model) params.set("model", model);
    return this.request("GET", `/slices/top-moved?${params.toString()}`);
  }

  setWeight(model: string, objective: string, weight: number): Promise<MutationResponse> {
    return this.request(
      "PUT",
      `/models/${encodeURIComponent(model)}/terms/${encodeURIComponent(objective)}`,
      { weight },
    );
  }

  removeTerm(model: string, objective: string): Promise<MutationResponse> {
    return this.request(
      "DELETE",
      `/models/${encodeURIComponent(model)}/terms/${encodeURIComponent(objective)}`,
    );
  }

  putObjective(name: string, expr: string, description = ""): Promise<MutationResponse> {
    return this.request("PUT", `/objectives/${encodeURIComponent(name)}`, {
      expr,
      description,
    });
  }

  putMetric(
    name: string,
    def: { kind: string; expr: string; expr2?: string | null; k?: number | null },
  ): Promise<MutationResponse> {
    return this.request("PUT", `/metrics/${encodeURIComponent(name)}`, def);
  }

  putSlice(name: string, predicate: string): Promise<MutationResponse> {
    return this.request("PUT", `/slices/${encodeURIComponent(name)}`, { predicate });
  }
}
