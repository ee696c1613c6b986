/** HTML renderers: pure functions from view state to markup strings.
 *
 * Keeping these DOM-free means every pixel of market data is testable
 * without a browser; main.ts only assigns the results to innerHTML.
 */

import type { BidDraft } from "./bidform.js";
import { canEnterStep2 } from "./bidform.js";
import type { SummaryViewState } from "./summary.js";
import { bidEntryEnabled } from "./summary.js";
import type { BidAck } from "./types.js";

export function formatPrice(value: number): string {
  const fixed = value.toFixed(4);
  return fixed.replace(/(\.\d*?)0+$/, "$1").replace(/\.$/, "");
}

export function formatCountdown(secondsRemaining: number): string {
  const total = Math.max(0, Math.floor(secondsRemaining));
  const minutes = Math.floor(total / 60);
  const seconds = total % 60;
  return `${minutes}m ${seconds.toString().padStart(2, "0")}s`;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

const FLAG_MARKUP: Record<string, string> = {
  up: '<span class="flag flag-up" title="rose since last refresh">&#9650;</span>',
  down: '<span class="flag flag-down" title="fell since last refresh">&#9660;</span>',
  same: "",
  new: "",
};

export function renderSummary(state: SummaryViewState): string {
  if (state.summary === null) {
    return '<p class="loading">Loading market summary&hellip;</p>';
  }
  const summary = state.summary;
  const parts: string[] = [];

  if (state.stale) {
    const updated =
      state.lastUpdatedMs !== null
        ? new Date(state.lastUpdatedMs).toISOString()
        : "never";
    parts.push(
      `<div class="banner banner-stale">Market data may be stale (last update ${updated}): ` +
        `${escapeHtml(state.lastError ?? "service unreachable")}</div>`,
    );
  }

  const badge = `<span class="badge badge-${summary.state}">${summary.state}</span>`;
  const countdown =
    summary.state === "open"
      ? `closes in ${formatCountdown(summary.seconds_remaining)}`
      : summary.state === "settled"
        ? "prices are final and binding"
        : "bidding closed, awaiting settlement";
  parts.push(`<div class="window-state">Window ${summary.window_id} ${badge} &middot; ${countdown}</div>`);

  const rows = summary.pools
    .map((row) => {
      const flag = FLAG_MARKUP[state.flags[row.pool_id] ?? "same"] ?? "";
      const stage =
        row.price_stage === "final"
          ? '<span class="badge badge-final">final</span>'
          : `<span class="badge badge-${row.price_stage}">${row.price_stage}</span>`;
      return (
        "<tr>" +
        `<td>${escapeHtml(row.cluster)}</td>` +
        `<td>${escapeHtml(row.resource_kind)}</td>` +
        `<td class="num">${formatPrice(row.price)} ${flag} ${stage}</td>` +
        `<td class="num">${row.active_bids}</td>` +
        `<td class="num">${row.active_offers}</td>` +
        `<td class="num">${(row.utilization * 100).toFixed(0)}%</td>` +
        "</tr>"
      );
    })
    .join("");
  parts.push(
    "<table class=\"summary\"><thead><tr>" +
      "<th>Cluster</th><th>Resource</th><th>Current price</th>" +
      "<th>Bids</th><th>Offers</th><th>Utilization</th>" +
      "</tr></thead><tbody>" +
      rows +
      "</tbody></table>",
  );

  if (!bidEntryEnabled(state)) {
    parts.push('<p class="bid-entry-disabled">Bid entry is disabled for this window.</p>');
  }
  return parts.join("\n");
}

export function renderDraft(draft: BidDraft, problems: string[], ack: BidAck | null): string {
  const parts: string[] = [];
  if (problems.length > 0) {
    parts.push(
      '<ul class="problems">' +
        problems.map((p) => `<li>${escapeHtml(p)}</li>`).join("") +
        "</ul>",
    );
  }
  if (draft.translated !== null) {
    const rows = Object.entries(draft.translated.bundle)
      .map(([poolId, qty]) => {
        const price = draft.translated?.current_prices[poolId] ?? 0;
        return (
          `<tr><td>${escapeHtml(poolId)}</td>` +
          `<td class="num">${qty}</td>` +
          `<td class="num">${formatPrice(price)}</td></tr>`
        );
      })
      .join("");
    parts.push(
      '<table class="covering"><thead><tr><th>Pool</th><th>Covering amount</th>' +
        "<th>Current price</th></tr></thead><tbody>" +
        rows +
        "</tbody></table>",
    );
    parts.push(
      `<p class="cost">Cost at current prices: ` +
        `${formatPrice(draft.translated.cost_at_current_prices)}</p>`,
    );
  }
  if (!canEnterStep2(draft)) {
    parts.push('<p class="step2-locked">Translate your requirements to continue.</p>');
  }
  if (ack !== null) {
    parts.push(
      `<div class="banner banner-ok">Bid stored for ${escapeHtml(ack.user_id)}` +
        `${ack.replaced ? " (replaced your earlier bid)" : ""}: willingness ` +
        `${ack.bid.willingness}. <a href="#summary">Back to the market summary</a></div>`,
    );
  }
  return parts.join("\n");
}
