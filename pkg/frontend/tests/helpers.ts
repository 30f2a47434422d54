/**
 * Test support: fixture loading and a fetch-compatible fake API that
 * serves the captured responses byte for byte. Fixtures are verbatim
 * API response bodies for the benchmark cohort; regenerate them with
 * scripts/capture_fixtures.py after an API change.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export function fixtureText(name: string): string {
  return readFileSync(join(FIXTURES, name), "utf-8");
}

export function fixtureJson<T>(name: string): T {
  return JSON.parse(fixtureText(name)) as T;
}

/** Naive CSV split; the plot-data files contain no quoted cells. */
export function parseCsv(text: string): { header: string[]; rows: string[][] } {
  const lines = text.trimEnd().split("\n");
  const [header, ...rows] = lines.map((line) => line.split(","));
  return { header, rows };
}

export interface RecordedCall {
  method: string;
  url: string;
  body: unknown;
}

function abortError(): Error {
  const err = new Error("the request was aborted");
  err.name = "AbortError";
  return err;
}

/** What the fake server should do instead of answering normally. */
export type Failure = { status: number; error: string } | "network";

export class FixtureServer {
  calls: RecordedCall[] = [];
  /** When set, every request fails this way. */
  failure: Failure | null = null;
  /** Routes held open until the gate promise resolves, keyed by path. */
  private gates = new Map<string, Promise<void>>();

  /** Hold responses for `path` (e.g. "/api/tradeoff") until `gate` resolves. */
  holdUntil(path: string, gate: Promise<void>): void {
    this.gates.set(path, gate);
  }

  fetch: typeof fetch = async (input, init) => {
    const url = typeof input === "string" ? input : input.toString();
    const method = init?.method ?? "GET";
    const body =
      typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
    this.calls.push({ method, url, body });

    const signal = init?.signal ?? null;
    const path = url.split("?")[0];
    await this.waitGate(path, signal);
    if (signal?.aborted) {
      throw abortError();
    }

    if (this.failure === "network") {
      throw new TypeError("fetch failed");
    }
    if (this.failure) {
      return json(JSON.stringify({ error: this.failure.error }), this.failure.status);
    }

    if (path.endsWith("/api/dataset")) {
      return json(fixtureText("dataset.json"));
    }
    if (path.endsWith("/api/audit")) {
      return json(fixtureText("audit_k150.json"));
    }
    if (path.endsWith("/api/tradeoff")) {
      const reference = new URL(url, "http://test").searchParams.get(
        "reference"
      );
      return json(
        fixtureText(
          reference === "c" ? "tradeoff_k150_ref_c.json" : "tradeoff_k150.json"
        )
      );
    }
    if (path.endsWith("/api/balance") && method === "POST") {
      const request = body as
        | { mode?: string; reference_group?: string }
        | undefined;
      if (request?.mode === "equalized") {
        return json(fixtureText("balance_equalized_k150.json"));
      }
      if (request?.mode === "proportional") {
        return json(
          fixtureText(
            request.reference_group === "c"
              ? "balance_proportional_k150_ref_c.json"
              : "balance_proportional_k150.json"
          )
        );
      }
      return json(JSON.stringify({ error: `unknown mode ${request?.mode}` }), 400);
    }
    return json(JSON.stringify({ error: `no route for ${method} ${path}` }), 404);
  };

  private async waitGate(
    path: string,
    signal: AbortSignal | null
  ): Promise<void> {
    const gate = this.gates.get(path);
    if (!gate) {
      return;
    }
    await new Promise<void>((resolve, reject) => {
      if (signal?.aborted) {
        reject(abortError());
        return;
      }
      const onAbort = () => reject(abortError());
      signal?.addEventListener("abort", onAbort, { once: true });
      void gate.then(() => {
        signal?.removeEventListener("abort", onAbort);
        resolve();
      });
    });
  }
}

function json(text: string, status = 200): Response {
  return new Response(text, {
    status,
    headers: { "content-type": "application/json" },
  });
}
