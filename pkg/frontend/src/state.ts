/**
 * Observable console state shared by the queue table, the detail panel,
 * and the decision bar.
 *
 * Decisions apply optimistically: the task leaves the queue at once, and a
 * gateway refusal (409 already decided, 422 failed re-verification, network
 * down) restores the previous queue and surfaces the server's reason in the
 * banner. Success re-pulls the queue and, if the decided case is on screen,
 * its final state.
 */

import {
  ApiClient,
  ApiError,
  type CaseDetail,
  type MetricsSnapshot,
  type ReviewTask,
  type UnitDelta,
} from "./api.js";

export interface ConsoleState {
  queue: ReviewTask[];
  selectedCaseId: string | null;
  detail: CaseDetail | null;
  /** Exact response body behind `detail`; the panel must not invent data. */
  detailRaw: string | null;
  metrics: MetricsSnapshot | null;
  banner: string | null;
  /** Case id with a decision in flight, to disable its buttons. */
  pendingDecision: string | null;
}

export type Listener = (state: ConsoleState) => void;

/** Human-readable line for the error banner. */
export function describeError(err: unknown): string {
  if (err instanceof ApiError) {
    if (err.status === 409) return `Already decided: ${err.message}`;
    if (err.status === 422) {
      const detail = err.detail as { reason?: string; findings?: { kind: string }[] };
      if (detail && typeof detail === "object" && detail.findings) {
        const kinds = detail.findings.map((f) => f.kind).join(", ");
        return `${detail.reason ?? "rejected"} (${kinds})`;
      }
      return `Rejected: ${err.message}`;
    }
    return `Gateway error ${err.status}: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}

export class ConsoleStore {
  private state: ConsoleState = {
    queue: [],
    selectedCaseId: null,
    detail: null,
    detailRaw: null,
    metrics: null,
    banner: null,
    pendingDecision: null,
  };
  private listeners = new Set<Listener>();

  constructor(
    private readonly client: ApiClient,
    private readonly reviewer: string = "console",
  ) {}

  getState(): ConsoleState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  private patch(partial: Partial<ConsoleState>): void {
    this.state = { ...this.state, ...partial };
    for (const listener of this.listeners) listener(this.state);
  }

  async refreshQueue(): Promise<void> {
    const queue = await this.client.reviewQueue();
    this.patch({ queue });
  }

  async refreshMetrics(): Promise<void> {
    const metrics = await this.client.metrics();
    this.patch({ metrics });
  }

  async select(caseId: string): Promise<void> {
    const { data, raw } = await this.client.caseDetailWithRaw(caseId);
    this.patch({ selectedCaseId: caseId, detail: data, detailRaw: raw });
  }

  clearSelection(): void {
    this.patch({ selectedCaseId: null, detail: null, detailRaw: null });
  }

  dismissBanner(): void {
    this.patch({ banner: null });
  }

  /**
   * Submit a verdict for a pending case. Returns true when the gateway
   * accepted it; false restores the queue and raises the banner.
   */
  async decide(
    caseId: string,
    verdict: "accept" | "reject" | "modify",
    modifiedUnits?: UnitDelta[],
  ): Promise<boolean> {
    const before = this.state.queue;
    this.patch({
      queue: before.filter((t) => t.case_id !== caseId),
      pendingDecision: caseId,
      banner: null,
    });
    try {
      await this.client.submitDecision(caseId, {
        verdict,
        reviewer: this.reviewer,
        modified_units: modifiedUnits,
      });
    } catch (err) {
      this.patch({ queue: before, pendingDecision: null, banner: describeError(err) });
      return false;
    }
    this.patch({ pendingDecision: null });
    await this.refreshQueue();
    if (this.state.selectedCaseId === caseId) {
      // re-pull so the panel shows the terminal disposition
      await this.select(caseId);
    }
    return true;
  }
}
