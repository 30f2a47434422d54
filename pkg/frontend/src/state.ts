/**
 * Explorer state: the user's current control settings, the most recent
 * committed API responses, and the session history of explored options.
 *
 * Requests are ordered by a monotone version counter. Only the newest
 * issued request may commit, so a slow response from an earlier request
 * can never overwrite a later one, and a failed newest request leaves
 * the last good data in place with an error banner.
 */

import type {
  BalanceOutcomePayload,
  Mode,
  TradeoffMenuPayload,
} from "./types";
import {
  SCENARIO_EXPANDED_EQUALIZED,
  SCENARIO_EXPANDED_PROPORTIONAL,
  SCENARIO_TOP_K,
  fixedScenarioLabel,
  scenarioByLabel,
} from "./types";

export interface ExplorerSettings {
  attribute: string;
  k: number;
  mode: Mode;
  /** null means "let the server pick its default reference group". */
  referenceGroup: string | null;
  trim: boolean;
}

/** The responses a completed refresh committed, tagged by version. */
export interface CommittedData {
  version: number;
  settings: ExplorerSettings;
  menu: TradeoffMenuPayload;
  /** The standalone plan for the selected mode; null when unadjusted. */
  balance: BalanceOutcomePayload | null;
}

/**
 * One explored option, kept so previously viewed configurations can be
 * compared side by side and exported. Every number is copied verbatim
 * from the API responses that were committed for it.
 */
export interface HistoryEntry {
  id: number;
  settings: ExplorerSettings;
  referenceGroup: string;
  total: number;
  overallPrecision: number | null;
  unadjustedPrecision: number | null;
  precisionDeltaVsUnadjusted: number | null;
  recalls: Record<string, number | null>;
  counts: Record<string, number>;
  expandedEqualizedTotal: number;
  expandedProportionalTotal: number;
}

export function deriveHistoryEntry(
  version: number,
  settings: ExplorerSettings,
  menu: TradeoffMenuPayload,
  balance: BalanceOutcomePayload | null
): HistoryEntry {
  const baseline = scenarioByLabel(menu, SCENARIO_TOP_K);
  const fixed = scenarioByLabel(menu, fixedScenarioLabel(settings.mode));
  const plan = balance ?? baseline.plan;
  const recalls: Record<string, number | null> = {};
  const counts: Record<string, number> = {};
  for (const g of plan.groups) {
    recalls[g.group] = g.achieved_recall;
    counts[g.group] = g.k_g;
  }
  return {
    id: version,
    settings: { ...settings },
    referenceGroup: menu.reference_group,
    total: plan.total,
    overallPrecision: balance
      ? balance.audit.overall_precision
      : baseline.overall_precision,
    unadjustedPrecision: baseline.overall_precision,
    precisionDeltaVsUnadjusted: fixed.precision_delta_vs_unadjusted,
    recalls,
    counts,
    expandedEqualizedTotal: scenarioByLabel(menu, SCENARIO_EXPANDED_EQUALIZED)
      .total,
    expandedProportionalTotal: scenarioByLabel(
      menu,
      SCENARIO_EXPANDED_PROPORTIONAL
    ).total,
  };
}

export class ExplorerStore {
  private versionCounter = 0;
  current: CommittedData | null = null;
  history: HistoryEntry[] = [];
  error: string | null = null;

  /** Hand out the next request version; one per issued refresh. */
  nextVersion(): number {
    return ++this.versionCounter;
  }

  private isNewest(version: number): boolean {
    return version === this.versionCounter;
  }

  /**
   * Record a completed refresh. Returns false (and changes nothing)
   * when a newer request was issued meanwhile — the stale response is
   * discarded.
   */
  commit(
    version: number,
    settings: ExplorerSettings,
    menu: TradeoffMenuPayload,
    balance: BalanceOutcomePayload | null
  ): boolean {
    if (!this.isNewest(version)) {
      return false;
    }
    this.current = { version, settings: { ...settings }, menu, balance };
    this.error = null;
    this.history.push(deriveHistoryEntry(version, settings, menu, balance));
    return true;
  }

  /**
   * Record a failed refresh. The banner is raised only when the failure
   * belongs to the newest request; the last good data is always kept.
   */
  reportFailure(version: number, message: string): boolean {
    if (!this.isNewest(version)) {
      return false;
    }
    this.error = message;
    return true;
  }

  dismissError(): void {
    this.error = null;
  }
}

// ---------------------------------------------------------------------------
// History export

const HISTORY_FORMAT = "tradeoff-explorer-history";

/** Serialize explored options to a standalone JSON document. */
export function exportHistory(entries: readonly HistoryEntry[]): string {
  return JSON.stringify({ format: HISTORY_FORMAT, entries }, null, 2);
}

const MODES: readonly string[] = ["unadjusted", "equalized", "proportional"];

function isEntry(value: unknown): value is HistoryEntry {
  if (typeof value !== "object" || value === null) {
    return false;
  }
  const entry = value as Record<string, unknown>;
  const settings = entry.settings as Record<string, unknown> | undefined;
  return (
    typeof entry.id === "number" &&
    typeof settings === "object" &&
    settings !== null &&
    typeof settings.attribute === "string" &&
    typeof settings.k === "number" &&
    MODES.includes(settings.mode as string) &&
    typeof entry.recalls === "object" &&
    entry.recalls !== null &&
    typeof entry.counts === "object" &&
    entry.counts !== null
  );
}

/** Parse a document produced by exportHistory, validating its shape. */
export function parseHistory(text: string): HistoryEntry[] {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (err) {
    throw new Error(`history document is not JSON: ${err}`);
  }
  if (
    typeof doc !== "object" ||
    doc === null ||
    (doc as Record<string, unknown>).format !== HISTORY_FORMAT ||
    !Array.isArray((doc as Record<string, unknown>).entries)
  ) {
    throw new Error("not a scenario history document");
  }
  const entries = (doc as { entries: unknown[] }).entries;
  if (!entries.every(isEntry)) {
    throw new Error("history document has malformed entries");
  }
  return entries;
}
