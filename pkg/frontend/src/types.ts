/**
 * Shapes of the JSON documents the API serves. These mirror the server
 * payloads field for field; the UI renders these values verbatim and
 * never derives metrics of its own.
 */

export type Mode = "unadjusted" | "equalized" | "proportional";

/** Scenario labels used by the tradeoff endpoint, in menu order. */
export const SCENARIO_TOP_K = "top_k_unadjusted";
export const SCENARIO_EXPANDED_EQUALIZED = "expanded_equalized";
export const SCENARIO_EXPANDED_PROPORTIONAL = "expanded_proportional";
export const SCENARIO_CURRENT_EQUALIZED = "current_scale_equalized";
export const SCENARIO_CURRENT_PROPORTIONAL = "current_scale_proportional";

export interface GroupStatsPayload {
  group: string;
  n: number;
  positives: number;
  prevalence: number;
}

/** GET /api/dataset */
export interface DatasetSummary {
  version: string;
  rows: number;
  attributes: string[];
  groups: Record<string, GroupStatsPayload[]>;
}

/** Per-group rates; null where the denominator is zero. */
export interface MetricValues {
  recall: number | null;
  precision: number | null;
  fdr: number | null;
  fpr: number | null;
  fnr: number | null;
  for: number | null;
  fp_over_group_size: number | null;
  fn_over_group_size: number | null;
  selected: number;
}

export interface AuditGroupRow {
  group: string;
  n: number;
  positives: number;
  prevalence: number;
  tp: number;
  fp: number;
  fn: number;
  tn: number;
  metrics: MetricValues;
  ratios: Record<string, number | null>;
}

/** GET /api/audit */
export interface AuditReportPayload {
  attribute: string;
  k: number;
  reference_group: string;
  groups: AuditGroupRow[];
  overall_precision: number | null;
}

export interface ConstraintPayload {
  kind: string;
  value: number;
}

export interface PlanGroupRow {
  group: string;
  k_g: number;
  target_recall: number | null;
  achieved_recall: number | null;
  r_g: number | null;
}

export interface PlanPayload {
  mode: string;
  constraint: ConstraintPayload;
  reference_group: string | null;
  step_size: number;
  search_strategy: string;
  tie_break: string;
  seed: number | null;
  groups: PlanGroupRow[];
  total: number;
  requested_K: number | null;
  warnings: string[];
  diagnostics: Record<string, unknown>;
}

/** POST /api/balance: the plan plus the audit of its realized selection. */
export interface BalanceOutcomePayload extends PlanPayload {
  audit: AuditReportPayload;
}

export interface TradeoffScenarioPayload {
  label: string;
  total: number;
  overall_precision: number | null;
  precision_delta_vs_unadjusted: number | null;
  plan: PlanPayload;
  audit: AuditReportPayload;
  notes: string[];
}

/** GET /api/tradeoff */
export interface TradeoffMenuPayload {
  attribute: string;
  k: number;
  reference_group: string;
  tie_break: string;
  seed: number | null;
  scenarios: TradeoffScenarioPayload[];
}

export function scenarioByLabel(
  menu: TradeoffMenuPayload,
  label: string
): TradeoffScenarioPayload {
  const found = menu.scenarios.find((s) => s.label === label);
  if (!found) {
    throw new Error(`tradeoff menu has no scenario labeled ${label}`);
  }
  return found;
}

/**
 * The fixed-size scenario that corresponds to a mode: the baseline
 * itself for unadjusted, otherwise the balanced plan held at size K.
 */
export function fixedScenarioLabel(mode: Mode): string {
  switch (mode) {
    case "unadjusted":
      return SCENARIO_TOP_K;
    case "equalized":
      return SCENARIO_CURRENT_EQUALIZED;
    case "proportional":
      return SCENARIO_CURRENT_PROPORTIONAL;
  }
}

/** The expanded scenario for a balancing mode; none for unadjusted. */
export function expandedScenarioLabel(mode: Mode): string | null {
  switch (mode) {
    case "unadjusted":
      return null;
    case "equalized":
      return SCENARIO_EXPANDED_EQUALIZED;
    case "proportional":
      return SCENARIO_EXPANDED_PROPORTIONAL;
  }
}
