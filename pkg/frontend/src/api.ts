/** Thin typed client for the exchange service HTTP API.
 *
 * The UI performs no pricing math; every number it shows comes from one
 * of these responses.
 */

import type {
  BidAck,
  BidRecord,
  MarketSummary,
  OutcomeRecord,
  PoolInfo,
  TranslateResponse,
  WindowInfo,
} from "./types.js";

/** Error body returned by the service: shown to users verbatim. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ExchangeClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      const record = body as { error?: string; detail?: string };
      throw new ApiError(
        response.status,
        record.error ?? "unknown",
        record.detail ?? `request failed with status ${response.status}`,
      );
    }
    return body as T;
  }

  pools(): Promise<PoolInfo[]> {
    return this.request("/pools");
  }

  windows(): Promise<WindowInfo[]> {
    return this.request("/windows");
  }

  summary(windowId: string): Promise<MarketSummary> {
    return this.request(`/windows/${windowId}/summary`);
  }

  translate(
    windowId: string,
    services: Record<string, number>,
    cluster: string,
  ): Promise<TranslateResponse> {
    return this.request(`/windows/${windowId}/translate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ services, cluster }),
    });
  }

  submitBid(windowId: string, bid: BidRecord): Promise<BidAck> {
    return this.request(`/windows/${windowId}/bids`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(bid),
    });
  }

  preliminary(windowId: string): Promise<OutcomeRecord> {
    return this.request(`/windows/${windowId}/preliminary`);
  }
}
