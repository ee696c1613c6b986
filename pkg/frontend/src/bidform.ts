/** Two-step bid entry.
 *
 * Step 1: the user states requirements in service units (e.g. 10 units
 * of blobstore) and picks a cluster. The translate endpoint expands that
 * into the covering resource bundle and shows current prices.
 *
 * Step 2: only reachable once translation succeeded. The user enters a
 * maximum bid (buy side) or a minimum acceptable receipt (sell side),
 * always as a positive number; the client applies the market's sign
 * convention (offers carry negated quantities and negative willingness)
 * so humans never type minus signs.
 */

import type { ExchangeClient } from "./api.js";
import type { BidAck, BidRecord, TranslateResponse } from "./types.js";

export type Side = "bid" | "offer";

export interface BidDraft {
  userId: string;
  services: Record<string, number>;
  cluster: string;
  side: Side;
  /** max bid (bid side) or min receive (offer side); entered positive */
  amount: number | null;
  budget: number | null;
  translated: TranslateResponse | null;
}

export function emptyDraft(): BidDraft {
  return {
    userId: "",
    services: {},
    cluster: "",
    side: "bid",
    amount: null,
    budget: null,
    translated: null,
  };
}

/** Step 2 is locked until step 1 translated successfully. */
export function canEnterStep2(draft: BidDraft): boolean {
  return draft.translated !== null && Object.keys(draft.translated.bundle).length > 0;
}

/** Run step 1: expand requirements into a covering bundle. */
export async function translateDraft(
  client: ExchangeClient,
  windowId: string,
  draft: BidDraft,
): Promise<BidDraft> {
  const translated = await client.translate(windowId, draft.services, draft.cluster);
  return { ...draft, translated };
}

/** Client-side checks mirroring the service's bid invariants. */
export function validateDraft(draft: BidDraft): string[] {
  const problems: string[] = [];
  if (!draft.userId.trim()) {
    problems.push("user id is required");
  }
  if (!canEnterStep2(draft)) {
    problems.push("requirements must be translated into a non-empty bundle first");
  }
  if (draft.amount === null || Number.isNaN(draft.amount)) {
    problems.push(
      draft.side === "bid" ? "enter a maximum bid" : "enter a minimum amount to receive",
    );
  } else if (draft.amount <= 0) {
    problems.push("enter the amount as a positive number");
  }
  if (
    draft.side === "bid" &&
    draft.budget !== null &&
    draft.amount !== null &&
    draft.amount > draft.budget
  ) {
    problems.push("maximum bid exceeds the stated budget");
  }
  return problems;
}

/** Apply the sign convention and produce the wire-format bid. */
export function toBidRecord(draft: BidDraft): BidRecord {
  if (draft.translated === null || draft.amount === null) {
    throw new Error("draft is incomplete");
  }
  const sign = draft.side === "bid" ? 1 : -1;
  const bundle: Record<string, number> = {};
  for (const [poolId, qty] of Object.entries(draft.translated.bundle)) {
    bundle[poolId] = sign * qty;
  }
  const record: BidRecord = {
    user_id: draft.userId,
    bundles: [bundle],
    willingness: sign * draft.amount,
  };
  if (draft.side === "bid" && draft.budget !== null) {
    record.budget = draft.budget;
  }
  return record;
}

/** Post the completed draft; service errors surface to the caller. */
export async function submitDraft(
  client: ExchangeClient,
  windowId: string,
  draft: BidDraft,
): Promise<BidAck> {
  const problems = validateDraft(draft);
  if (problems.length > 0) {
    throw new Error(problems.join("; "));
  }
  return client.submitBid(windowId, toBidRecord(draft));
}
