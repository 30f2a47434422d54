/**
 * Application assembly: load the dataset summary, issue the first
 * refresh, and wire the controls. Event listeners are delegated from
 * the root element, so re-rendering the markup never loses them.
 */

import type { ApiClient } from "./api";
import { ExplorerController } from "./controller";
import type { ExplorerSettings } from "./state";
import { ExplorerStore, exportHistory } from "./state";
import { renderApp } from "./render";
import type { DatasetSummary, Mode } from "./types";

/** Starting list size; clamped to the cohort when it is smaller. */
export const DEFAULT_K = 150;

export interface App {
  root: HTMLElement;
  dataset: DatasetSummary;
  settings: ExplorerSettings;
  store: ExplorerStore;
  controller: ExplorerController;
  /** Re-issue the API calls for the current settings. */
  refresh(): Promise<void>;
  /** Resolves once the newest refresh has settled. */
  idle(): Promise<void>;
  /** JSON document of every explored option. */
  exportHistory(): string;
}

function clampK(raw: string, rows: number): number {
  const parsed = Number.parseInt(raw, 10);
  if (Number.isNaN(parsed)) {
    return 0;
  }
  return Math.min(Math.max(parsed, 0), rows);
}

function triggerDownload(text: string): void {
  if (typeof URL.createObjectURL !== "function") {
    return; // environment without object URLs (e.g. some test DOMs)
  }
  const blob = new Blob([text], { type: "application/json" });
  const url = URL.createObjectURL(blob);
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = "scenario-history.json";
  anchor.click();
  URL.revokeObjectURL(url);
}

export async function startApp(
  root: HTMLElement,
  api: ApiClient
): Promise<App> {
  const dataset = await api.getDataset();
  if (dataset.attributes.length === 0) {
    throw new Error("dataset exposes no group attributes");
  }
  const settings: ExplorerSettings = {
    attribute: dataset.attributes[0],
    k: Math.min(DEFAULT_K, dataset.rows),
    mode: "unadjusted",
    referenceGroup: null,
    trim: false,
  };
  const store = new ExplorerStore();
  const rerender = () =>
    renderApp(root, {
      dataset,
      settings,
      current: store.current,
      history: store.history,
      error: store.error,
    });
  const controller = new ExplorerController(api, store, rerender);
  const refresh = () => controller.refresh(settings);

  root.addEventListener("change", (event) => {
    const target = event.target as HTMLElement;
    if (target instanceof HTMLSelectElement && target.id === "attribute") {
      settings.attribute = target.value;
      settings.referenceGroup = null; // adopt the new attribute's default
      refresh();
    } else if (
      target instanceof HTMLInputElement &&
      target.name === "mode"
    ) {
      settings.mode = target.value as Mode;
      refresh();
    } else if (
      target instanceof HTMLSelectElement &&
      target.id === "reference"
    ) {
      settings.referenceGroup = target.value;
      refresh();
    } else if (target instanceof HTMLInputElement && target.id === "trim") {
      settings.trim = target.checked;
      refresh();
    } else if (
      target instanceof HTMLInputElement &&
      (target.id === "k-slider" || target.id === "k-number")
    ) {
      settings.k = clampK(target.value, dataset.rows);
      refresh();
    }
  });

  root.addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    if (target.id === "export-history") {
      triggerDownload(exportHistory(store.history));
    } else if (target.id === "dismiss-banner") {
      store.dismissError();
      rerender();
    }
  });

  rerender(); // controls are usable while the first refresh is in flight
  await refresh();

  return {
    root,
    dataset,
    settings,
    store,
    controller,
    refresh,
    idle: () => controller.idle(),
    exportHistory: () => exportHistory(store.history),
  };
}
