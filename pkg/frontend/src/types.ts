/**
 * Wire types for the rankbench HTTP API. The workbench renders these
 * payloads directly; nothing numeric is recomputed client-side.
 */

export interface WorkspaceOverview {
  revision: number;
  baseline: string;
  objectives: string[];
  models: string[];
  metrics: string[];
  slices: string[];
  queries: number;
  rows: number;
}

export interface QueryListing {
  revision: number;
  queries: string[];
  anecdotes: string[];
}

export interface ObjectiveDef {
  expr: string;
  description: string;
}

export type ObjectiveMap = Record<string, ObjectiveDef>;

export interface ModelDef {
  terms: Record<string, number>;
  is_baseline: boolean;
}

export type ModelMap = Record<string, ModelDef>;

export interface MetricDef {
  kind: string;
  expr: string;
  expr2: string | null;
  k: number | null;
  description: string;
}

export type MetricMap = Record<string, MetricDef>;

export type SliceMap = Record<string, { predicate: string }>;

export interface TableCell {
  model: string;
  metric: string;
  slice: string;
  value: number | null;
  query_count: number;
  defined: boolean;
  delta: number | null;
}

export interface TableResponse {
  revision: number;
  baseline: string;
  models: string[];
  metrics: string[];
  slices: string[];
  cells: TableCell[];
}

export interface AttributionEntry {
  objective: string;
  contribution: number;
  share: number;
}

export interface ComparedItem {
  item_id: string;
  score: number;
  attribution: AttributionEntry[];
  all_zero: boolean;
}

export interface Movement {
  item_id: string;
  rank_a: number;
  rank_b: number;
  movement: number;
}

export interface CompareResponse {
  query_id: string;
  a: { model: string; items: ComparedItem[] };
  b: { model: string; items: ComparedItem[] };
  diff: {
    movements: Movement[];
    promoted: string[];
    demoted: string[];
  };
  columns: Record<string, Record<string, number | string>>;
  revision: number;
}

export interface MutationResponse {
  revision: number;
  seq: number;
  action: string;
  recompute_ms: number;
}

export interface TopMovedResponse {
  metric: string;
  model: string;
  slices: { slice: string; delta: number | null }[];
  revision: number;
}

export interface ValidationIssue {
  kind: string;
  message: string;
  offset?: number;
  expected?: string[];
}

export interface ValidationErrorBody {
  error: string;
  issues: ValidationIssue[];
}
