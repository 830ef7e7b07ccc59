// Response shapes of the scenario-analysis HTTP API. The client is
// display-only: every number rendered comes from one of these fields.

export type Relation = "eq" | "le" | "ge";
export type Statistic =
  | "weighted-mean"
  | "weighted-proportion"
  | "conditional-mean"
  | "count-multiplier";
export type TargetMode = "absolute" | "multiple-of-baseline" | "lift-percent";

export interface TargetJson {
  mode: TargetMode;
  value: number;
}

export interface ConstraintJson {
  label?: string;
  feature: string;
  condition?: string;
  statistic: Statistic;
  relation: Relation;
  target: TargetJson;
}

export interface ScenarioJson {
  constraints: ConstraintJson[];
}

export interface ColumnSummary {
  name: string;
  kind: "numeric-feature" | "indicator-feature" | "metric";
  units: string;
}

export interface DatasetSummary {
  id: string;
  n_rows: number;
  n_features: number;
  columns: ColumnSummary[];
  means: Record<string, number>;
  digest: string;
}

export interface WeightDiagnosticsJson {
  min: number;
  max: number;
  quantiles: Record<string, number>;
  ess: number;
  ess_ratio: number;
  entropy_ratio: number;
  outlier_count: number;
  threshold: number;
  warnings: string[];
  relative_weights?: number[];
}

export interface SolveResponse {
  seed: number;
  status: string;
  estimates: Record<string, number>;
  entropy: number;
  constraints: string[];
  residuals: number[];
  relative_weights: number[];
  diagnostics: WeightDiagnosticsJson;
}

export interface HistogramJson {
  edges: number[];
  counts: number[];
}

export interface DistributionJson {
  metric: string;
  B_requested: number;
  infeasible_fraction: number;
  summary: Record<string, number>; // mean, median, sd, q05, q95
  histogram: HistogramJson;
  warnings: string[];
  values: number[];
}

export interface BootstrapResponse {
  seed: number;
  B: number;
  m: number;
  distributions: Record<string, DistributionJson>;
}

export interface BoxplotJson {
  label: string;
  median: number;
  q1: number;
  q3: number;
  whisker_low: number;
  whisker_high: number;
  outliers: number[];
}

export interface SweepCellJson {
  a_value: number;
  b_value: number | null;
  summary: Record<string, number> | null;
  infeasible_fraction: number;
  boxplot: BoxplotJson | null;
  values: number[];
}

export interface SweepResponse {
  axes: { feature: string; grid: number[] }[];
  B: number;
  cells: SweepCellJson[];
  seed: number;
  metric: string;
  contour?: { level: number; points: [number, number][] };
}

// 422 payload: the scenario cannot be satisfied on this dataset
export interface InfeasibilityDetail {
  offending_labels: string[];
  evidence: string;
  dual_norm_at_stop: number;
  message: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: unknown,
  ) {
    super(`HTTP ${status}`);
  }

  infeasibility(): InfeasibilityDetail | null {
    if (this.status !== 422) return null;
    const d = this.detail as Partial<InfeasibilityDetail> | undefined;
    if (!d || !Array.isArray(d.offending_labels)) return null;
    return d as InfeasibilityDetail;
  }
}
