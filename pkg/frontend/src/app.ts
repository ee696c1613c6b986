/** Polling loop for the summary page: one in-flight request at most. */

import type { ExchangeClient } from "./api.js";
import type { SummaryViewState } from "./summary.js";
import { applyFetchFailure, applySummary, initialSummaryState } from "./summary.js";

export class SummaryPoller {
  private state: SummaryViewState = initialSummaryState();
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;

  constructor(
    private readonly client: ExchangeClient,
    private readonly windowId: string,
    private readonly intervalMs: number,
    private readonly onChange: (state: SummaryViewState) => void,
    private readonly now: () => number = () => Date.now(),
  ) {}

  current(): SummaryViewState {
    return this.state;
  }

  async tick(): Promise<void> {
    if (this.inFlight) {
      return;
    }
    this.inFlight = true;
    try {
      const summary = await this.client.summary(this.windowId);
      this.state = applySummary(this.state, summary, this.now());
    } catch (error) {
      this.state = applyFetchFailure(this.state, String(error));
    } finally {
      this.inFlight = false;
    }
    this.onChange(this.state);
  }

  start(): void {
    if (this.timer !== null) {
      return;
    }
    void this.tick();
    this.timer = setInterval(() => void this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
