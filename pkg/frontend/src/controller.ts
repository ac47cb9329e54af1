/** Orchestrates the edit loop: submit, poll to settle, fold in diffs, metrics. */

import { ApiClient, ApiError, type MetricsResponse } from "./api.js";
import type { PollOptions } from "./polling.js";
import { pollUntilSettled } from "./polling.js";
import {
  applySnapshot,
  emptyView,
  outputs,
  settleAfterEdit,
  type SessionView,
} from "./sessionView.js";

export interface EditOutcome {
  view: SessionView;
  /** poll cycles until the regeneration settled */
  cycles: number;
  /** true when the edit was rejected and the view was refetched instead */
  conflict: boolean;
}

export class SessionController {
  constructor(
    private client: ApiClient,
    private pollOptions: PollOptions = {},
  ) {}

  async openSession(sessionId: string): Promise<SessionView> {
    const snapshot = await this.client.getSession(sessionId);
    return applySnapshot(emptyView(sessionId), snapshot);
  }

  async refresh(view: SessionView): Promise<SessionView> {
    const snapshot = await this.client.getSession(view.sessionId, view.revision);
    return applySnapshot(view, snapshot);
  }

  /**
   * Submit one correction and wait for the suffix regeneration to settle.
   * Rows whose output changed since before the edit carry char diffs.
   * A rejected edit (stale view, bad index) refetches and reports a conflict
   * so the UI can re-prompt instead of silently dropping the correction.
   */
  async submitEdit(view: SessionView, index: number, text: string): Promise<EditOutcome> {
    const before = outputs(view);
    try {
      await this.client.submitEdit(view.sessionId, index, text);
    } catch (error) {
      if (error instanceof ApiError && error.status < 500) {
        const refetched = await this.openSession(view.sessionId);
        return { view: refetched, cycles: 0, conflict: true };
      }
      throw error;
    }
    const { snapshot, cycles } = await pollUntilSettled(this.client, view.sessionId, this.pollOptions);
    return { view: settleAfterEdit(view, before, snapshot), cycles, conflict: false };
  }

  async metrics(view: SessionView, references: string[]): Promise<MetricsResponse> {
    return this.client.getMetrics(view.sessionId, references);
  }
}
