/**
 * Deterministic DOM rendering: the same committed responses always
 * produce the same markup. Every displayed number is the verbatim
 * string form of a value from an API response, carried both as text
 * and in a data-value attribute; bar widths are layout geometry only.
 */

import type { BarDatum } from "./plotdata";
import { barsFor, menuPlotRows, planPlotRows } from "./plotdata";
import type {
  CommittedData,
  ExplorerSettings,
  HistoryEntry,
} from "./state";
import type { DatasetSummary, TradeoffScenarioPayload } from "./types";
import {
  SCENARIO_TOP_K,
  expandedScenarioLabel,
  fixedScenarioLabel,
  scenarioByLabel,
} from "./types";

export interface RenderInput {
  dataset: DatasetSummary;
  settings: ExplorerSettings;
  current: CommittedData | null;
  history: readonly HistoryEntry[];
  error: string | null;
}

/** Series key for the plan currently in force. */
export const SERIES_CURRENT = "current_plan";

const MODE_LABELS: Record<string, string> = {
  unadjusted: "unadjusted top-K",
  equalized: "equalized recall",
  proportional: "proportional to prevalence",
};

function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Verbatim display form of an API number; empty/n-a when undefined. */
function num(value: number | null): { text: string; attr: string } {
  if (value === null) {
    return { text: "n/a", attr: "" };
  }
  return { text: String(value), attr: String(value) };
}

function widthPercent(value: number | null, max: number): string {
  if (value === null || max <= 0) {
    return "0";
  }
  return ((value / max) * 100).toFixed(4);
}

function valueSpan(role: string, value: number | null): string {
  const v = num(value);
  return `<span data-role="${role}" data-value="${v.attr}">${v.text}</span>`;
}

// ---------------------------------------------------------------------------
// Controls

function renderControls(input: RenderInput): string {
  const { dataset, settings, current } = input;
  const attributeOptions = dataset.attributes
    .map(
      (a) =>
        `<option value="${escapeHtml(a)}"${
          a === settings.attribute ? " selected" : ""
        }>${escapeHtml(a)}</option>`
    )
    .join("");
  const groups = dataset.groups[settings.attribute] ?? [];
  const reference =
    settings.referenceGroup ?? current?.menu.reference_group ?? "";
  const referenceOptions = groups
    .map(
      (g) =>
        `<option value="${escapeHtml(g.group)}"${
          g.group === reference ? " selected" : ""
        }>${escapeHtml(g.group)}</option>`
    )
    .join("");
  const modeRadios = (
    ["unadjusted", "equalized", "proportional"] as const
  )
    .map(
      (mode) =>
        `<label class="mode-option"><input type="radio" name="mode" value="${mode}"${
          settings.mode === mode ? " checked" : ""
        }> ${MODE_LABELS[mode]}</label>`
    )
    .join("");
  return `
  <section class="controls">
    <label class="control">attribute
      <select id="attribute">${attributeOptions}</select>
    </label>
    <label class="control">list size K
      <input id="k-slider" type="range" min="0" max="${dataset.rows}" step="1" value="${settings.k}">
      <input id="k-number" type="number" min="0" max="${dataset.rows}" step="1" value="${settings.k}">
    </label>
    <fieldset class="control mode-picker"><legend>balancing mode</legend>${modeRadios}</fieldset>
    <label class="control">reference group
      <select id="reference">${referenceOptions}</select>
    </label>
    <label class="control checkbox"><input id="trim" type="checkbox"${
      settings.trim ? " checked" : ""
    }${settings.mode === "unadjusted" ? " disabled" : ""}> trim recall plateaus</label>
  </section>`;
}

// ---------------------------------------------------------------------------
// Bar charts

/** Plan targets shown beside a group's bars, where the plan reports them. */
export interface GroupTarget {
  target: number | null;
  ratio: number | null;
}

function renderTarget(target: GroupTarget | undefined): string {
  if (!target) {
    return "";
  }
  const parts: string[] = [];
  if (target.target !== null) {
    const v = num(target.target);
    parts.push(
      `<span class="plan-target" data-role="plan-target" data-value="${v.attr}">target ${v.text}</span>`
    );
  }
  if (target.ratio !== null) {
    const v = num(target.ratio);
    parts.push(
      `<span class="plan-ratio" data-role="plan-ratio" data-value="${v.attr}">r ${v.text}</span>`
    );
  }
  return parts.join(" ");
}

function renderBars(
  view: string,
  title: string,
  bars: BarDatum[],
  seriesNames: Record<string, string>,
  targets?: Record<string, GroupTarget>
): string {
  const groups = [...new Set(bars.map((b) => b.group))];
  const max = Math.max(
    0,
    ...bars.map((b) => (b.value === null ? 0 : b.value))
  );
  const rows = groups
    .map((group) => {
      const groupBars = bars
        .filter((b) => b.group === group)
        .map((b) => {
          const v = num(b.value);
          return `<div class="bar series-${escapeHtml(b.series)}${
            b.value === null ? " bar-undefined" : ""
          }" data-series="${escapeHtml(b.series)}" data-group="${escapeHtml(
            group
          )}" data-value="${v.attr}" style="width: ${widthPercent(
            b.value,
            max
          )}%"><span class="bar-value">${v.text}</span></div>`;
        })
        .join("");
      const target = renderTarget(targets?.[group]);
      return `<div class="chart-row" data-group="${escapeHtml(group)}">
        <span class="chart-label">${escapeHtml(group)}</span>
        <div class="chart-bars">${groupBars}</div>
        ${target}
      </div>`;
    })
    .join("");
  const legend = Object.entries(seriesNames)
    .map(
      ([series, label]) =>
        `<span class="legend-item series-${escapeHtml(series)}">${escapeHtml(
          label
        )}</span>`
    )
    .join("");
  return `
  <div class="chart" data-view="${view}">
    <h3>${escapeHtml(title)}</h3>
    <div class="legend">${legend}</div>
    ${rows}
  </div>`;
}

/**
 * Chart input for one metric: the current plan's series next to the
 * unadjusted top-K series, both in plot-data row form.
 */
function chartBars(current: CommittedData, metric: string): BarDatum[] {
  const menuRows = menuPlotRows(current.menu);
  const baseline = barsFor(menuRows, metric).filter(
    (b) => b.series === SCENARIO_TOP_K && b.group !== "overall"
  );
  const plan =
    current.balance ??
    scenarioByLabel(current.menu, SCENARIO_TOP_K).plan;
  const currentSeries: BarDatum[] = planPlotRows(plan)
    .filter((r) => r.metric === metric)
    .map((r) => ({ series: SERIES_CURRENT, group: r.group, value: r.value }));
  // Interleave per group: current first, baseline second.
  const byGroup = new Map<string, BarDatum[]>();
  for (const b of [...currentSeries, ...baseline]) {
    const bucket = byGroup.get(b.group) ?? [];
    bucket.push(b);
    byGroup.set(b.group, bucket);
  }
  return [...byGroup.values()].flat();
}

// ---------------------------------------------------------------------------
// Readouts

function renderPrecision(current: CommittedData): string {
  const baseline = scenarioByLabel(current.menu, SCENARIO_TOP_K);
  const fixed = scenarioByLabel(
    current.menu,
    fixedScenarioLabel(current.settings.mode)
  );
  const planPrecision = current.balance
    ? current.balance.audit.overall_precision
    : baseline.overall_precision;
  const delta = fixed.precision_delta_vs_unadjusted;
  const deltaClass =
    delta === null ? "" : delta < 0 ? " delta-cost" : " delta-gain";
  return `
  <div class="readout" data-view="precision">
    <h3>Efficiency</h3>
    <p>current plan precision: ${valueSpan("current-precision", planPrecision)}</p>
    <p>unadjusted top-${current.menu.k} precision: ${valueSpan(
      "unadjusted-precision",
      baseline.overall_precision
    )}</p>
    <p class="delta${deltaClass}">precision delta, fixed-size plan vs unadjusted:
      <strong data-role="delta" data-value="${num(delta).attr}">${
        num(delta).text
      }</strong></p>
  </div>`;
}

function scenarioRow(
  scenario: TradeoffScenarioPayload,
  active: boolean
): string {
  const total = num(scenario.total);
  const precision = num(scenario.overall_precision);
  const delta = num(scenario.precision_delta_vs_unadjusted);
  return `<tr data-scenario="${escapeHtml(scenario.label)}" data-active="${active}"${
    active ? ' class="active"' : ""
  }>
    <td>${escapeHtml(scenario.label)}</td>
    <td data-role="total" data-value="${total.attr}">${total.text}</td>
    <td data-role="precision" data-value="${precision.attr}">${precision.text}</td>
    <td data-role="delta" data-value="${delta.attr}">${delta.text}</td>
  </tr>`;
}

function renderProgramSize(current: CommittedData): string {
  const { menu, settings, balance } = current;
  const fixedLabel = fixedScenarioLabel(settings.mode);
  const expandedLabel = expandedScenarioLabel(settings.mode);
  const activeLabels = new Set(
    [fixedLabel, expandedLabel].filter((l): l is string => l !== null)
  );
  const plan = balance ?? scenarioByLabel(menu, SCENARIO_TOP_K).plan;
  const expandedLine = expandedLabel
    ? `<p>expanding instead of holding at K = ${menu.k} would select ${valueSpan(
        "expanded-total",
        scenarioByLabel(menu, expandedLabel).total
      )} people</p>`
    : "";
  const warnings = plan.warnings.length
    ? `<ul class="warnings">${plan.warnings
        .map((w) => `<li>${escapeHtml(w)}</li>`)
        .join("")}</ul>`
    : "";
  const rows = menu.scenarios
    .map((s) => scenarioRow(s, activeLabels.has(s.label)))
    .join("");
  return `
  <div class="readout" data-view="size">
    <h3>Program size</h3>
    <p>current plan selects ${valueSpan("current-total", plan.total)} people</p>
    ${expandedLine}
    ${warnings}
    <div class="table-scroll"><table class="scenario-table">
      <thead><tr><th>scenario</th><th>total</th><th>overall precision</th><th>precision delta vs unadjusted</th></tr></thead>
      <tbody>${rows}</tbody>
    </table></div>
  </div>`;
}

// ---------------------------------------------------------------------------
// History

function describeEntry(entry: HistoryEntry): string {
  const { settings } = entry;
  const parts = [
    MODE_LABELS[settings.mode] ?? settings.mode,
    `attribute ${settings.attribute}`,
    `K ${settings.k}`,
    `reference ${entry.referenceGroup}`,
    settings.trim ? "trimmed" : null,
  ].filter((p): p is string => p !== null);
  return parts.join(" · ");
}

function renderHistory(history: readonly HistoryEntry[]): string {
  const items = history
    .map(
      (entry) => `<li data-entry-id="${entry.id}">
        <span class="entry-settings">${escapeHtml(describeEntry(entry))}</span>
        — total ${valueSpan("entry-total", entry.total)},
        precision ${valueSpan("entry-precision", entry.overallPrecision)},
        delta ${valueSpan("entry-delta", entry.precisionDeltaVsUnadjusted)}
      </li>`
    )
    .join("");
  return `
  <section class="history" data-view="history">
    <h3>Explored options</h3>
    <button id="export-history" type="button">export history as JSON</button>
    <ol>${items}</ol>
  </section>`;
}

// ---------------------------------------------------------------------------
// Page

export function renderApp(root: HTMLElement, input: RenderInput): void {
  const { dataset, current, error } = input;
  const banner = error
    ? `<div class="banner" role="alert"><span>${escapeHtml(
        error
      )}</span> <button id="dismiss-banner" type="button">dismiss</button></div>`
    : "";
  let views = `<p class="placeholder">waiting for the first API response…</p>`;
  if (current) {
    const plan =
      current.balance ?? scenarioByLabel(current.menu, SCENARIO_TOP_K).plan;
    const targets: Record<string, GroupTarget> = {};
    for (const g of plan.groups) {
      targets[g.group] = { target: g.target_recall, ratio: g.r_g };
    }
    views = `
    <section class="views">
      ${renderBars(
        "recall",
        "Recall by group",
        chartBars(current, "recall"),
        { [SERIES_CURRENT]: "current plan", [SCENARIO_TOP_K]: "unadjusted top-K" },
        targets
      )}
      ${renderBars(
        "counts",
        "Selected count by group",
        chartBars(current, "count"),
        { [SERIES_CURRENT]: "current plan", [SCENARIO_TOP_K]: "unadjusted top-K" }
      )}
      ${renderPrecision(current)}
      ${renderProgramSize(current)}
    </section>`;
  }
  root.innerHTML = `
  <header>
    <h1>Selection tradeoff explorer</h1>
    <p class="dataset-line">dataset ${escapeHtml(dataset.version)} · ${
      dataset.rows
    } rows</p>
  </header>
  ${banner}
  ${renderControls(input)}
  ${views}
  ${renderHistory(input.history)}`;
}
