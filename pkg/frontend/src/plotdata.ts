/**
 * Chart input rows in the same long format the CLI's plot-data files
 * use, so a chart fed from a live API response and one fed from an
 * exported file are structurally identical. Every `value` is copied
 * from the payload untouched.
 */

import type { PlanPayload, TradeoffMenuPayload } from "./types";

/** One row of a plan's plot data: columns group, metric, value. */
export interface PlanPlotRow {
  group: string;
  metric: "count" | "recall";
  value: number | null;
}

/** One row of a menu's plot data: columns scenario, group, metric, value. */
export interface MenuPlotRow {
  scenario: string;
  group: string;
  metric: string;
  value: number | null;
}

/** Long-format rows for one selection plan: a count and a recall per group. */
export function planPlotRows(plan: PlanPayload): PlanPlotRow[] {
  const rows: PlanPlotRow[] = [];
  for (const q of plan.groups) {
    rows.push({ group: q.group, metric: "count", value: q.k_g });
    rows.push({ group: q.group, metric: "recall", value: q.achieved_recall });
  }
  return rows;
}

/**
 * Long-format rows for a tradeoff menu: per-group recall (where
 * defined) and count for every scenario, then the scenario's overall
 * total, precision, and precision delta against the unadjusted
 * baseline (where defined).
 */
export function menuPlotRows(menu: TradeoffMenuPayload): MenuPlotRow[] {
  const rows: MenuPlotRow[] = [];
  for (const s of menu.scenarios) {
    for (const g of s.audit.groups) {
      if (g.metrics.recall !== null) {
        rows.push({
          scenario: s.label,
          group: g.group,
          metric: "recall",
          value: g.metrics.recall,
        });
      }
      rows.push({
        scenario: s.label,
        group: g.group,
        metric: "count",
        value: g.metrics.selected,
      });
    }
    rows.push({
      scenario: s.label,
      group: "overall",
      metric: "total",
      value: s.total,
    });
    if (s.overall_precision !== null) {
      rows.push({
        scenario: s.label,
        group: "overall",
        metric: "precision",
        value: s.overall_precision,
      });
    }
    if (s.precision_delta_vs_unadjusted !== null) {
      rows.push({
        scenario: s.label,
        group: "overall",
        metric: "precision_delta",
        value: s.precision_delta_vs_unadjusted,
      });
    }
  }
  return rows;
}

/** Bars for one metric, one series per scenario, keyed by group. */
export interface BarDatum {
  series: string;
  group: string;
  value: number | null;
}

export function barsFor(rows: MenuPlotRow[], metric: string): BarDatum[] {
  return rows
    .filter((r) => r.metric === metric)
    .map((r) => ({ series: r.scenario, group: r.group, value: r.value }));
}
