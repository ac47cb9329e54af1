/** Pure view-state for one open session: rows, badges, dirty flags, diffs.
 *
 * All state changes flow from API snapshots; the view never invents outputs.
 */

import type { Snapshot, SnapshotRow, SentenceStatus } from "./api.js";
import { changedRows, charDiff, type DiffSegment } from "./diff.js";

export interface ViewRow {
  index: number;
  src: string;
  nmtHyp: string;
  output: string;
  status: SentenceStatus;
  provenance: string;
  /** locally edited, not yet submitted */
  dirty: boolean;
  /** set after an edit settles, for rows whose output changed */
  diff?: DiffSegment[];
}

export interface SessionView {
  sessionId: string;
  revision: number;
  rows: ViewRow[];
  strategy?: string;
  changed: number[];
}

export function emptyView(sessionId: string): SessionView {
  return { sessionId, revision: 0, rows: [], changed: [] };
}

function rowFromSnapshot(row: SnapshotRow): ViewRow {
  return {
    index: row.index,
    src: row.src,
    nmtHyp: row.nmt_hyp,
    output: row.output,
    status: row.status,
    provenance: row.provenance,
    dirty: false,
  };
}

/** Merge a polled snapshot; an empty delta (same revision) keeps the rows. */
export function applySnapshot(view: SessionView, snapshot: Snapshot): SessionView {
  if (snapshot.sentences.length === 0 && snapshot.revision === view.revision) {
    return view;
  }
  const dirtyIndices = new Set(view.rows.filter((r) => r.dirty).map((r) => r.index));
  const rows = snapshot.sentences.map(rowFromSnapshot);
  for (const row of rows) {
    if (dirtyIndices.has(row.index)) {
      row.dirty = true;
    }
  }
  return { ...view, revision: snapshot.revision, rows, changed: view.changed };
}

export function markDirty(view: SessionView, index: number): SessionView {
  const rows = view.rows.map((row) => (row.index === index ? { ...row, dirty: true } : row));
  return { ...view, rows };
}

/** A human-pinned row renders locked until the annotator explicitly re-edits. */
export function isLocked(row: ViewRow): boolean {
  return row.status === "human" && !row.dirty;
}

export function outputs(view: SessionView): string[] {
  return view.rows.map((row) => row.output);
}

export function anyRegenerating(view: SessionView): boolean {
  return view.rows.some((row) => row.status === "regenerating");
}

/**
 * Fold a settled snapshot into the view after an edit: clears dirty flags,
 * records which rows changed relative to the pre-edit outputs, and attaches
 * character diffs to exactly those rows.
 */
export function settleAfterEdit(
  view: SessionView,
  preEditOutputs: string[],
  settled: Snapshot,
): SessionView {
  const next = applySnapshot({ ...view, rows: view.rows.map((r) => ({ ...r, dirty: false })) }, settled);
  const after = next.rows.map((row) => row.output);
  const changed = changedRows(preEditOutputs, after);
  const changedSet = new Set(changed);
  const rows = next.rows.map((row) =>
    changedSet.has(row.index)
      ? { ...row, diff: charDiff(preEditOutputs[row.index] ?? "", row.output) }
      : { ...row, diff: undefined },
  );
  return { ...next, rows, changed };
}
