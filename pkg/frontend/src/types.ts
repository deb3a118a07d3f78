// API payload shapes; these mirror the review service's response models.

export type Box = [number, number, number, number]; // x0, y0, x1, y1 (exclusive)

export interface LineSummary {
  line_id: string;
  width: number;
  height: number;
  occurrence_count: number;
  cut_count: number;
  raster_sha256: string;
  has_corrections: boolean;
}

export interface Cut {
  start_col: number;
  end_col: number;
  kind: "plain_gap" | "bridged_gap";
}

export interface Occurrence {
  index: number;
  box: Box;
  class_id: number | null;
}

export interface Corrections {
  forced_cuts: number[];
  forbidden_cuts: number[];
  box_overrides: [number, Box][];
}

export interface LineDetail {
  line_id: string;
  width: number;
  height: number;
  image_png_base64: string;
  cuts: Cut[];
  occurrences: Occurrence[];
  corrections: Corrections;
}

export interface RleGrid {
  side: number;
  first: number;
  runs: number[];
}

export interface TokenClass {
  class_id: number;
  placeholder: string;
  exemplar_side: number;
  exemplar_rle: RleGrid;
  member_refs: [string, number][];
  mirror_of: number | null;
}

export interface Inventory {
  classes: TokenClass[];
  class_count: number;
  mirror_suggestions: [number, number][] | null;
}

export interface CorrectionsAck {
  line_id: string;
  occurrence_count: number;
}

export interface ActionAck {
  class_count: number;
}

export interface LineCountChange {
  line_id: string;
  old_count: number;
  new_count: number;
}

export interface RebuildResult {
  lines: LineCountChange[];
  class_count: number;
}
