/** Revision-based polling with exponential backoff on connectivity failures. */

import type { ApiClient, Snapshot } from "./api.js";

export interface PollOptions {
  /** base interval between polls */
  intervalMs?: number;
  /** hard cap on poll cycles before giving up */
  maxCycles?: number;
  backoffFactor?: number;
  maxBackoffMs?: number;
  /** observer for every received snapshot (including empty deltas) */
  onCycle?: (snapshot: Snapshot, cycle: number) => void;
  /** observer for connectivity failures, receives the next delay */
  onRetry?: (error: unknown, nextDelayMs: number) => void;
  sleep?: (ms: number) => Promise<void>;
}

export interface PollResult {
  snapshot: Snapshot;
  cycles: number;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

function settled(snapshot: Snapshot): boolean {
  return snapshot.sentences.length > 0 && snapshot.sentences.every((row) => row.status !== "regenerating");
}

/**
 * Poll GET ?since=rev until no sentence is regenerating. Empty deltas do not
 * count as settled (the known rows may still be regenerating), so the poller
 * refetches without `since` whenever it needs full statuses.
 */
export async function pollUntilSettled(
  client: ApiClient,
  sessionId: string,
  options: PollOptions = {},
): Promise<PollResult> {
  const {
    intervalMs = 500,
    maxCycles = 120,
    backoffFactor = 2,
    maxBackoffMs = 8000,
    onCycle,
    onRetry,
    sleep = defaultSleep,
  } = options;
  let delay = intervalMs;
  let cycles = 0;
  for (;;) {
    cycles += 1;
    if (cycles > maxCycles) {
      throw new Error(`session ${sessionId} did not settle within ${maxCycles} poll cycles`);
    }
    try {
      const snapshot = await client.getSession(sessionId);
      onCycle?.(snapshot, cycles);
      if (settled(snapshot)) {
        return { snapshot, cycles };
      }
      delay = intervalMs; // healthy response resets the backoff
    } catch (error) {
      delay = Math.min(delay * backoffFactor, maxBackoffMs);
      onRetry?.(error, delay);
    }
    await sleep(delay);
  }
}
