// Session store. Server responses are the only authoritative state; the
// store layers unsaved edits on top and reconciles from the server after
// every mutation. Reloading the page (a fresh store) must reproduce the
// saved state exactly.

import { ReviewApi } from "./api";
import { hitCut, hitOccurrence } from "./overlay";
import type { Corrections, Inventory, LineDetail, LineSummary, RebuildResult } from "./types";

export type CutToggle =
  | { kind: "forced"; col: number; added: boolean }
  | { kind: "forbidden"; leftIndex: number; added: boolean }
  | null;

function cloneCorrections(c: Corrections): Corrections {
  return {
    forced_cuts: [...c.forced_cuts],
    forbidden_cuts: [...c.forbidden_cuts],
    box_overrides: c.box_overrides.map(([i, b]) => [i, [...b] as Corrections["box_overrides"][0][1]]),
  };
}

function sameCorrections(a: Corrections, b: Corrections): boolean {
  return JSON.stringify(normalizeCorrections(a)) === JSON.stringify(normalizeCorrections(b));
}

export function normalizeCorrections(c: Corrections): Corrections {
  return {
    forced_cuts: [...c.forced_cuts].sort((x, y) => x - y),
    forbidden_cuts: [...c.forbidden_cuts].sort((x, y) => x - y),
    box_overrides: [...c.box_overrides].sort((x, y) => x[0] - y[0]),
  };
}

/** The on-disk corrections file for a line; every UI edit is expressible
 * in this schema, so the UI can be bypassed by hand-editing the file. */
export function correctionsFile(lineId: string, c: Corrections): object {
  const n = normalizeCorrections(c);
  return {
    line_id: lineId,
    forced_cuts: n.forced_cuts,
    forbidden_cuts: n.forbidden_cuts.map((leftIndex) => ({ left_index: leftIndex })),
    box_overrides: n.box_overrides.map(([index, box]) => ({ index, box })),
  };
}

export class SessionStore {
  lines: LineSummary[] = [];
  inventory: Inventory | null = null;
  current: LineDetail | null = null;
  working: Corrections | null = null;
  selectedClasses: number[] = [];
  lastError: string | null = null;

  constructor(private api: ReviewApi) {}

  async load(): Promise<void> {
    this.lines = await this.api.lines();
    this.inventory = await this.api.inventory();
  }

  async openLine(lineId: string): Promise<LineDetail> {
    this.current = await this.api.line(lineId);
    this.working = cloneCorrections(this.current.corrections);
    return this.current;
  }

  get dirty(): boolean {
    if (!this.current || !this.working) return false;
    return !sameCorrections(this.working, this.current.corrections);
  }

  /** Toggle a cut under a clicked column: inside a glyph box it is a
   * forced cut, over a gap between glyphs it is a forbidden cut. */
  toggleCutAt(col: number): CutToggle {
    if (!this.current || !this.working) return null;
    const forced = this.working.forced_cuts;
    const at = forced.indexOf(col);
    if (at >= 0) {
      forced.splice(at, 1);
      return { kind: "forced", col, added: false };
    }
    if (hitOccurrence(this.current.occurrences, col)) {
      forced.push(col);
      return { kind: "forced", col, added: true };
    }
    const gap = hitCut(this.current.cuts, this.current.occurrences, col);
    if (gap) {
      const idx = this.working.forbidden_cuts.indexOf(gap.leftIndex);
      if (idx >= 0) {
        this.working.forbidden_cuts.splice(idx, 1);
        return { kind: "forbidden", leftIndex: gap.leftIndex, added: false };
      }
      this.working.forbidden_cuts.push(gap.leftIndex);
      return { kind: "forbidden", leftIndex: gap.leftIndex, added: true };
    }
    return null;
  }

  /** Persist the working corrections, then reconcile from server truth. */
  async saveCorrections(): Promise<number> {
    if (!this.current || !this.working) throw new Error("no line open");
    const ack = await this.api.submitCorrections(this.current.line_id, normalizeCorrections(this.working));
    await this.openLine(this.current.line_id);
    this.lines = await this.api.lines();
    this.inventory = await this.api.inventory();
    return ack.occurrence_count;
  }

  toggleClassSelection(classId: number): void {
    const at = this.selectedClasses.indexOf(classId);
    if (at >= 0) this.selectedClasses.splice(at, 1);
    else this.selectedClasses = [...this.selectedClasses.slice(-1), classId];
  }

  async mergeSelected(): Promise<number> {
    if (this.selectedClasses.length !== 2) throw new Error("select exactly two classes to merge");
    const ack = await this.api.mergeClasses([...this.selectedClasses].sort((a, b) => a - b));
    this.selectedClasses = [];
    await this.refreshAfterClassChange();
    return ack.class_count;
  }

  async mirrorSelected(value = true): Promise<void> {
    if (this.selectedClasses.length !== 2) throw new Error("select exactly two classes to pair");
    const [a, b] = this.selectedClasses;
    await this.api.mirrorClasses(a, b, value);
    this.selectedClasses = [];
    await this.refreshAfterClassChange();
  }

  async rebuild(): Promise<RebuildResult> {
    const result = await this.api.rebuild();
    await this.load();
    if (this.current) await this.openLine(this.current.line_id);
    return result;
  }

  private async refreshAfterClassChange(): Promise<void> {
    this.inventory = await this.api.inventory();
    if (this.current) await this.openLine(this.current.line_id);
  }
}

// --- placeholder previews ----------------------------------------------------

/** Per-line token-class sequences reconstructed from inventory member refs. */
export function lineTokenIds(inv: Inventory): Map<string, number[]> {
  const out = new Map<string, number[]>();
  for (const cls of inv.classes) {
    for (const [lineId, index] of cls.member_refs) {
      if (!out.has(lineId)) out.set(lineId, []);
      const seq = out.get(lineId)!;
      while (seq.length <= index) seq.push(-1);
      seq[index] = cls.class_id;
    }
  }
  return new Map([...out.entries()].sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0)));
}

export function placeholderText(ids: number[]): string {
  return ids.map((i) => `<token_${i}>`).join(" ");
}

/** Renumbering the service applies after class actions: classes ordered by
 * the corpus position of their earliest member. */
export function renumberedAfterMerge(inv: Inventory, a: number, b: number): Map<string, number[]> {
  const linePos = new Map<string, number>();
  [...new Set(inv.classes.flatMap((c) => c.member_refs.map(([lid]) => lid)))]
    .sort()
    .forEach((lid, i) => linePos.set(lid, i));
  const pos = ([lid, idx]: [string, number]) => linePos.get(lid)! * 1_000_000 + idx;

  const groups: [string, number][][] = [];
  let mergedGroup: [string, number][] = [];
  for (const cls of inv.classes) {
    if (cls.class_id === a || cls.class_id === b) mergedGroup = mergedGroup.concat(cls.member_refs);
    else groups.push([...cls.member_refs]);
  }
  groups.push(mergedGroup);
  groups.sort((g1, g2) => Math.min(...g1.map(pos)) - Math.min(...g2.map(pos)));

  const out = new Map<string, number[]>();
  groups.forEach((refs, newId) => {
    for (const [lineId, index] of refs) {
      if (!out.has(lineId)) out.set(lineId, []);
      const seq = out.get(lineId)!;
      while (seq.length <= index) seq.push(-1);
      seq[index] = newId;
    }
  });
  return new Map([...out.entries()].sort(([x], [y]) => (x < y ? -1 : x > y ? 1 : 0)));
}

export interface MergeDiff {
  line_id: string;
  before: string;
  after: string;
}

/** Placeholder-text diff a merge would cause, shown before confirming. */
export function mergePreview(inv: Inventory, a: number, b: number): MergeDiff[] {
  const before = lineTokenIds(inv);
  const after = renumberedAfterMerge(inv, a, b);
  const diffs: MergeDiff[] = [];
  for (const [lineId, ids] of before.entries()) {
    const b1 = placeholderText(ids);
    const a1 = placeholderText(after.get(lineId) ?? []);
    if (b1 !== a1) diffs.push({ line_id: lineId, before: b1, after: a1 });
  }
  return diffs;
}
