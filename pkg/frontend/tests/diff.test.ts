import { describe, expect, it } from "vitest";
import { changedRows, charDiff, type DiffSegment } from "../src/diff.js";

function rebuild(segments: DiffSegment[], side: "before" | "after"): string {
  const keep = side === "before" ? ["same", "del"] : ["same", "ins"];
  return segments
    .filter((s) => keep.includes(s.kind))
    .map((s) => s.text)
    .join("");
}

describe("charDiff", () => {
  it("equal strings yield one same segment", () => {
    expect(charDiff("Hallo Welt", "Hallo Welt")).toEqual([{ kind: "same", text: "Hallo Welt" }]);
  });

  it("pure insertion", () => {
    const segments = charDiff("Haus", "Hauses");
    expect(segments).toEqual([
      { kind: "same", text: "Haus" },
      { kind: "ins", text: "es" },
    ]);
  });

  it("pure deletion", () => {
    const segments = charDiff("laufen", "laufe");
    expect(rebuild(segments, "before")).toBe("laufen");
    expect(rebuild(segments, "after")).toBe("laufe");
    expect(segments.some((s) => s.kind === "del")).toBe(true);
  });

  it("substitution keeps the common suffix intact", () => {
    const segments = charDiff("Sie schläft .", "Er schläft .");
    expect(rebuild(segments, "before")).toBe("Sie schläft .");
    expect(rebuild(segments, "after")).toBe("Er schläft .");
    const same = segments.filter((s) => s.kind === "same").map((s) => s.text).join("");
    expect(same).toContain(" schläft .");
  });

  it("reconstructs both sides for arbitrary pairs", () => {
    const cases: Array<[string, string]> = [
      ["", ""],
      ["", "abc"],
      ["abc", ""],
      ["kitten", "sitting"],
      ["Die Katze schläft", "Die Katzen schlafen tief"],
    ];
    for (const [before, after] of cases) {
      const segments = charDiff(before, after);
      expect(rebuild(segments, "before")).toBe(before);
      expect(rebuild(segments, "after")).toBe(after);
    }
  });

  it("merges adjacent segments of the same kind", () => {
    for (const segments of [charDiff("aaaa", "bbbb"), charDiff("xy", "yx")]) {
      for (let i = 1; i < segments.length; i++) {
        expect(segments[i].kind).not.toBe(segments[i - 1].kind);
      }
    }
  });
});

describe("changedRows", () => {
  it("empty when identical", () => {
    expect(changedRows(["a", "b"], ["a", "b"])).toEqual([]);
  });

  it("reports exactly the differing indices", () => {
    expect(changedRows(["a", "b", "c"], ["a", "B", "c"])).toEqual([1]);
    expect(changedRows(["a", "b", "c"], ["A", "b", "C"])).toEqual([0, 2]);
  });

  it("length differences count as changes", () => {
    expect(changedRows(["a"], ["a", "b"])).toEqual([1]);
  });
});
