/**
 * Typed client for the selection-audit API. One method per endpoint;
 * every response is returned as parsed JSON with no reshaping, so
 * callers see exactly what the server sent.
 */

import type {
  AuditReportPayload,
  BalanceOutcomePayload,
  DatasetSummary,
  TradeoffMenuPayload,
} from "./types";

/** Deterministic tie rule the explorer pins on every request. */
export const TIE_BREAK = "by_entity_id";

export interface AuditParams {
  attribute: string;
  k: number;
  reference?: string;
}

export interface TradeoffParams {
  attribute: string;
  k: number;
  reference?: string;
}

export interface BalanceRequest {
  attribute: string;
  mode: "equalized" | "proportional";
  k: number;
  reference_group?: string;
  search_strategy?: string;
  trim?: boolean;
  tie_break?: string;
}

/** A non-2xx response, carrying the server's error message. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let message = `HTTP ${response.status}`;
  try {
    const body = await response.json();
    if (body && typeof body.error === "string") {
      message = body.error;
    }
  } catch {
    // non-JSON error body; keep the status line
  }
  return new ApiError(response.status, message);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: typeof fetch = (...args) => fetch(...args)
  ) {}

  private async getJson<T>(
    path: string,
    params: Record<string, string>,
    signal?: AbortSignal
  ): Promise<T> {
    const query = new URLSearchParams(params).toString();
    const response = await this.fetchFn(`${this.baseUrl}${path}?${query}`, {
      signal,
    });
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return (await response.json()) as T;
  }

  async getDataset(signal?: AbortSignal): Promise<DatasetSummary> {
    const response = await this.fetchFn(`${this.baseUrl}/api/dataset`, {
      signal,
    });
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return (await response.json()) as DatasetSummary;
  }

  async getAudit(
    params: AuditParams,
    signal?: AbortSignal
  ): Promise<AuditReportPayload> {
    const query: Record<string, string> = {
      attribute: params.attribute,
      k: String(params.k),
      tie_break: TIE_BREAK,
    };
    if (params.reference !== undefined) {
      query.reference = params.reference;
    }
    return this.getJson("/api/audit", query, signal);
  }

  async getTradeoff(
    params: TradeoffParams,
    signal?: AbortSignal
  ): Promise<TradeoffMenuPayload> {
    const query: Record<string, string> = {
      attribute: params.attribute,
      k: String(params.k),
      tie_break: TIE_BREAK,
    };
    if (params.reference !== undefined) {
      query.reference = params.reference;
    }
    return this.getJson("/api/tradeoff", query, signal);
  }

  async postBalance(
    body: BalanceRequest,
    signal?: AbortSignal
  ): Promise<BalanceOutcomePayload> {
    const response = await this.fetchFn(`${this.baseUrl}/api/balance`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ tie_break: TIE_BREAK, ...body }),
      signal,
    });
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return (await response.json()) as BalanceOutcomePayload;
  }
}
