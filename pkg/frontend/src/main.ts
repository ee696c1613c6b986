/** Browser bootstrap: wires the poller and the two-step bid form.
 *
 * Query parameters: ?api=http://host:port (default same origin),
 * ?window=w0001 (default: the first open window), ?poll=10 (seconds).
 */

import { ApiError, ExchangeClient } from "./api.js";
import { SummaryPoller } from "./app.js";
import {
  BidDraft,
  emptyDraft,
  submitDraft,
  translateDraft,
  validateDraft,
} from "./bidform.js";
import { renderDraft, renderSummary } from "./render.js";
import type { BidAck } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

async function resolveWindowId(client: ExchangeClient, requested: string | null): Promise<string> {
  if (requested !== null) {
    return requested;
  }
  const windows = await client.windows();
  const open = windows.find((w) => w.state === "open") ?? windows[0];
  if (open === undefined) {
    throw new Error("the exchange has no windows");
  }
  return open.window_id;
}

function parseServices(text: string): Record<string, number> {
  // one "service=units" pair per line
  const services: Record<string, number> = {};
  for (const line of text.split("\n")) {
    const trimmed = line.trim();
    if (!trimmed) {
      continue;
    }
    const [name, amount] = trimmed.split("=");
    if (name === undefined || amount === undefined) {
      throw new Error(`cannot parse requirement line: ${trimmed}`);
    }
    services[name.trim()] = Number(amount.trim());
  }
  return services;
}

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const client = new ExchangeClient(params.get("api") ?? "");
  const windowId = await resolveWindowId(client, params.get("window"));
  const pollSeconds = Number(params.get("poll") ?? "10");

  const summaryPane = el<HTMLDivElement>("summary");
  const poller = new SummaryPoller(client, windowId, pollSeconds * 1000, (state) => {
    summaryPane.innerHTML = renderSummary(state);
  });
  poller.start();

  let draft: BidDraft = emptyDraft();
  let ack: BidAck | null = null;
  const draftPane = el<HTMLDivElement>("draft");
  const redrawDraft = (problems: string[] = []) => {
    draftPane.innerHTML = renderDraft(draft, problems, ack);
  };

  el<HTMLButtonElement>("translate").addEventListener("click", async () => {
    try {
      draft = {
        ...draft,
        userId: el<HTMLInputElement>("user-id").value,
        cluster: el<HTMLInputElement>("cluster").value,
        services: parseServices(el<HTMLTextAreaElement>("requirements").value),
        side: el<HTMLSelectElement>("side").value === "offer" ? "offer" : "bid",
      };
      draft = await translateDraft(client, windowId, draft);
      ack = null;
      redrawDraft();
    } catch (error) {
      redrawDraft([error instanceof ApiError ? error.message : String(error)]);
    }
  });

  el<HTMLButtonElement>("submit").addEventListener("click", async () => {
    try {
      const amount = el<HTMLInputElement>("amount").value;
      const budget = el<HTMLInputElement>("budget").value;
      draft = {
        ...draft,
        amount: amount === "" ? null : Number(amount),
        budget: budget === "" ? null : Number(budget),
      };
      const problems = validateDraft(draft);
      if (problems.length > 0) {
        redrawDraft(problems);
        return;
      }
      ack = await submitDraft(client, windowId, draft);
      redrawDraft();
      await poller.tick();
    } catch (error) {
      // service errors (window closed, budget exceeded, ...) verbatim
      redrawDraft([error instanceof ApiError ? error.message : String(error)]);
    }
  });

  redrawDraft();
}

void boot().catch((error) => {
  document.body.innerHTML = `<div class="banner banner-stale">${String(error)}</div>`;
});
