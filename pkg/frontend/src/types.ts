/** Wire types mirroring the exchange service responses. */

export interface PoolInfo {
  id: string;
  cluster: string;
  resource_kind: string;
  unit: string;
  cost: number;
  utilization: number;
  reserve_price: number;
}

export interface WindowInfo {
  window_id: string;
  state: "open" | "closed" | "settled";
  opened_at: number;
  closes_at: number;
}

export interface SummaryRow {
  pool_id: string;
  cluster: string;
  resource_kind: string;
  unit: string;
  price: number;
  price_stage: "reserve" | "preliminary" | "final";
  reserve_price: number;
  active_bids: number;
  active_offers: number;
  utilization: number;
}

export interface MarketSummary {
  window_id: string;
  state: "open" | "closed" | "settled";
  opened_at: number;
  closes_at: number;
  seconds_remaining: number;
  pools: SummaryRow[];
}

export interface TranslateResponse {
  window_id: string;
  cluster: string;
  bundle: Record<string, number>;
  current_prices: Record<string, number>;
  cost_at_current_prices: number;
}

export interface BidRecord {
  user_id: string;
  bundles: Record<string, number>[];
  willingness: number;
  budget?: number;
}

export interface BidAck {
  window_id: string;
  user_id: string;
  replaced: boolean;
  bid: BidRecord;
}

export interface OutcomeRecord {
  status: "converged" | "round-limit" | "price-ceiling";
  final_prices: Record<string, number>;
  allocations: Record<string, Record<string, number>>;
  winners: string[];
  losers: string[];
  rounds: number;
}
