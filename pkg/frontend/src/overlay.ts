// Pure geometry for pixel-aligned overlays. Zoom is integer-only, so a
// raster pixel always maps to an exact zoom x zoom screen square and box
// edges land on whole screen pixels at every zoom level.

import type { Box, Cut, Occurrence, RleGrid } from "./types";

export function clampZoom(zoom: number): number {
  return Math.max(1, Math.min(8, Math.round(zoom)));
}

export function scaleBox(box: Box, zoom: number): Box {
  return [box[0] * zoom, box[1] * zoom, box[2] * zoom, box[3] * zoom];
}

export function cutRect(cut: Cut, height: number, zoom: number): Box {
  return [cut.start_col * zoom, 0, cut.end_col * zoom, height * zoom];
}

export function columnAt(canvasX: number, zoom: number): number {
  return Math.floor(canvasX / zoom);
}

/** Occurrence a forced cut at `col` would split (needs interior columns on
 * both sides). */
export function hitOccurrence(occurrences: Occurrence[], col: number): Occurrence | null {
  for (const occ of occurrences) {
    if (occ.box[0] < col && col < occ.box[2]) return occ;
  }
  return null;
}

/** Cut interval under `col` that separates two occurrences; returns the
 * left occurrence index for a forbidden-cut toggle. */
export function hitCut(cuts: Cut[], occurrences: Occurrence[], col: number): { leftIndex: number } | null {
  const cut = cuts.find((c) => c.start_col <= col && col < c.end_col);
  if (!cut) return null;
  let left: Occurrence | null = null;
  for (const occ of occurrences) {
    if (occ.box[2] <= cut.start_col && (left === null || occ.box[0] > left.box[0])) left = occ;
  }
  const right = occurrences.find((occ) => occ.box[0] >= cut.end_col);
  if (left === null || right === undefined) return null;
  return { leftIndex: left.index };
}

export function decodeRle(rle: RleGrid): boolean[][] {
  const flat: boolean[] = [];
  let value = rle.first !== 0;
  for (const run of rle.runs) {
    for (let i = 0; i < run; i++) flat.push(value);
    value = !value;
  }
  if (flat.length !== rle.side * rle.side) {
    throw new Error(`rle covers ${flat.length} cells, expected ${rle.side * rle.side}`);
  }
  const rows: boolean[][] = [];
  for (let y = 0; y < rle.side; y++) {
    rows.push(flat.slice(y * rle.side, (y + 1) * rle.side));
  }
  return rows;
}

/** RGBA pixels for an exemplar thumbnail (ink black, background white). */
export function gridToRgba(grid: boolean[][]): Uint8ClampedArray<ArrayBuffer> {
  const side = grid.length;
  const out = new Uint8ClampedArray(new ArrayBuffer(side * side * 4));
  for (let y = 0; y < side; y++) {
    for (let x = 0; x < side; x++) {
      const v = grid[y][x] ? 0 : 255;
      const o = (y * side + x) * 4;
      out[o] = out[o + 1] = out[o + 2] = v;
      out[o + 3] = 255;
    }
  }
  return out;
}
