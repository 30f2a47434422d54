/**
 * Orchestrates one refresh per user input: fetch the tradeoff menu for
 * the current settings, then the standalone plan when a balancing mode
 * is selected, and commit both to the store. At most one refresh is in
 * flight; issuing a new one aborts the old, and the store's version
 * counter discards any response that slips through after a newer
 * request.
 */

import type { ApiClient, BalanceRequest } from "./api";
import type { ExplorerSettings, ExplorerStore } from "./state";

export class ExplorerController {
  private inflight: AbortController | null = null;
  private lastRun: Promise<void> = Promise.resolve();

  constructor(
    private readonly api: ApiClient,
    private readonly store: ExplorerStore,
    private readonly notify: () => void
  ) {}

  /** Issue the API calls for `settings`, superseding any in-flight refresh. */
  refresh(settings: ExplorerSettings): Promise<void> {
    const version = this.store.nextVersion();
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    this.lastRun = this.execute(version, { ...settings }, controller.signal);
    return this.lastRun;
  }

  /** Resolves when the most recently issued refresh has settled. */
  async idle(): Promise<void> {
    let seen: Promise<void>;
    do {
      seen = this.lastRun;
      await seen;
    } while (seen !== this.lastRun);
  }

  private async execute(
    version: number,
    settings: ExplorerSettings,
    signal: AbortSignal
  ): Promise<void> {
    try {
      const menu = await this.api.getTradeoff(
        {
          attribute: settings.attribute,
          k: settings.k,
          reference: settings.referenceGroup ?? undefined,
        },
        signal
      );
      let balance = null;
      if (settings.mode !== "unadjusted") {
        const body: BalanceRequest = {
          attribute: settings.attribute,
          mode: settings.mode,
          k: settings.k,
        };
        if (settings.mode === "proportional") {
          body.reference_group = settings.referenceGroup ?? menu.reference_group;
          // Fill the list to exactly K, matching the menu's fixed-size
          // proportional scenario.
          body.search_strategy = "merged_prefix";
        }
        if (settings.trim) {
          body.trim = true;
        }
        balance = await this.api.postBalance(body, signal);
      }
      if (this.store.commit(version, settings, menu, balance)) {
        this.notify();
      }
    } catch (err) {
      if (signal.aborted) {
        return; // superseded by newer input
      }
      const message = err instanceof Error ? err.message : String(err);
      if (this.store.reportFailure(version, message)) {
        this.notify();
      }
    }
  }
}
