/** Character-level diff for highlighting how an edit propagated.
 *
 * Post-edits in German are often sub-word (inflection endings), so the
 * highlight granularity is characters, computed over an LCS table. Sentence
 * strings are short; the quadratic table is fine.
 */

export type SegmentKind = "same" | "ins" | "del";

export interface DiffSegment {
  kind: SegmentKind;
  text: string;
}

export function charDiff(before: string, after: string): DiffSegment[] {
  const n = before.length;
  const m = after.length;
  // lcs[i][j] = LCS length of before[i:] and after[j:]
  const lcs: Int32Array[] = Array.from({ length: n + 1 }, () => new Int32Array(m + 1));
  for (let i = n - 1; i >= 0; i--) {
    for (let j = m - 1; j >= 0; j--) {
      lcs[i][j] =
        before[i] === after[j]
          ? lcs[i + 1][j + 1] + 1
          : Math.max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  const segments: DiffSegment[] = [];
  const push = (kind: SegmentKind, text: string) => {
    if (text.length === 0) return;
    const last = segments[segments.length - 1];
    if (last && last.kind === kind) {
      last.text += text;
    } else {
      segments.push({ kind, text });
    }
  };
  let i = 0;
  let j = 0;
  while (i < n && j < m) {
    if (before[i] === after[j]) {
      push("same", before[i]);
      i++;
      j++;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      push("del", before[i]);
      i++;
    } else {
      push("ins", after[j]);
      j++;
    }
  }
  push("del", before.slice(i));
  push("ins", after.slice(j));
  return segments;
}

/** Indices whose text differs between two aligned output lists. */
export function changedRows(before: string[], after: string[]): number[] {
  const changed: number[] = [];
  const len = Math.max(before.length, after.length);
  for (let k = 0; k < len; k++) {
    if (before[k] !== after[k]) {
      changed.push(k);
    }
  }
  return changed;
}
