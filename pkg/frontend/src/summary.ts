/** View model for the market summary page.
 *
 * Holds the latest summary straight off the wire plus presentation
 * state: which prices moved since the previous poll, and whether the
 * data went stale because a poll failed. Pure functions, no I/O.
 */

import type { MarketSummary } from "./types.js";

export type PriceFlag = "up" | "down" | "same" | "new";

export interface SummaryViewState {
  summary: MarketSummary | null;
  flags: Record<string, PriceFlag>;
  stale: boolean;
  lastError: string | null;
  lastUpdatedMs: number | null;
}

export function initialSummaryState(): SummaryViewState {
  return { summary: null, flags: {}, stale: false, lastError: null, lastUpdatedMs: null };
}

/** Merge a fresh summary in, flagging per-pool price movement. */
export function applySummary(
  state: SummaryViewState,
  next: MarketSummary,
  nowMs: number,
): SummaryViewState {
  const flags: Record<string, PriceFlag> = {};
  for (const row of next.pools) {
    const previous = state.summary?.pools.find((p) => p.pool_id === row.pool_id);
    if (previous === undefined) {
      flags[row.pool_id] = "new";
    } else if (row.price > previous.price) {
      flags[row.pool_id] = "up";
    } else if (row.price < previous.price) {
      flags[row.pool_id] = "down";
    } else {
      flags[row.pool_id] = "same";
    }
  }
  return { summary: next, flags, stale: false, lastError: null, lastUpdatedMs: nowMs };
}

/** A poll failed: keep the last data, raise the stale banner. */
export function applyFetchFailure(state: SummaryViewState, error: string): SummaryViewState {
  return { ...state, stale: true, lastError: error };
}

/** Bids can only be entered while the window is open. */
export function bidEntryEnabled(state: SummaryViewState): boolean {
  return state.summary !== null && state.summary.state === "open";
}
