"""Glyph segmentation over a binarized line.

Two adjacent glyphs become separate tokens when an ink-free vertical
corridor of at least `min_gap_width` columns separates them. With the
bridge exception enabled, the corridor only has to be ink-free inside the
core band (rows between `band_top_frac` and `band_bottom_frac`), so
horizontal extensions hugging the top or bottom edge do not fuse glyphs.

Cut intervals are maximal core-free column runs. An interval with no ink
anywhere is a plain_gap; one crossed by top/bottom extension ink is a
bridged_gap. Leading and trailing margins always count as cut intervals:
`min_gap_width` exists to keep hairline gaps from splitting a glyph, and
a margin splits nothing.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .ioutil import atomic_write_text
from .raster import BinaryRaster, column_profile

PLAIN_GAP = "plain_gap"
BRIDGED_GAP = "bridged_gap"


@dataclass(frozen=True)
class SegmentationParams:
    min_gap_width: int = 2
    band_top_frac: float = 0.15
    band_bottom_frac: float = 0.85
    bridge_exception_enabled: bool = True
    min_glyph_width: int = 2

    def __post_init__(self):
        if self.min_gap_width < 1:
            raise ValidationError("bad-params", "min_gap_width must be >= 1")
        if self.min_glyph_width < 1:
            raise ValidationError("bad-params", "min_glyph_width must be >= 1")
        if not (0.0 <= self.band_top_frac < self.band_bottom_frac <= 1.0):
            raise ValidationError("bad-params", "need 0 <= band_top_frac < band_bottom_frac <= 1")

    def to_dict(self) -> dict:
        return {
            "min_gap_width": self.min_gap_width,
            "band_top_frac": self.band_top_frac,
            "band_bottom_frac": self.band_bottom_frac,
            "bridge_exception_enabled": self.bridge_exception_enabled,
            "min_glyph_width": self.min_glyph_width,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentationParams":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass(frozen=True)
class CutInterval:
    start_col: int  # inclusive
    end_col: int  # exclusive
    kind: str  # PLAIN_GAP or BRIDGED_GAP

    def __post_init__(self):
        if self.start_col >= self.end_col:
            raise ValidationError("bad-cut", "cut interval must be non-empty")
        if self.kind not in (PLAIN_GAP, BRIDGED_GAP):
            raise ValidationError("bad-cut", f"unknown cut kind {self.kind!r}")

    @property
    def width(self) -> int:
        return self.end_col - self.start_col


@dataclass(frozen=True)
class GlyphOccurrence:
    """One segmented glyph in reading order (left to right)."""

    index_in_line: int
    box: tuple[int, int, int, int]  # x0, y0, x1, y1 inclusive-exclusive
    raster: BinaryRaster  # crop of the line raster at `box`


@dataclass
class CorrectionSet:
    """Human adjudication of one line's segmentation.

    Applied as: forced cuts first (ascending column), then forbidden cuts
    (indices refer to the sequence after forced cuts, applied from the
    right), then box overrides (indices refer to the merged sequence).
    """

    line_id: str
    forced_cuts: list[int] = field(default_factory=list)
    forbidden_cuts: list[int] = field(default_factory=list)  # left occurrence index
    box_overrides: list[tuple[int, tuple[int, int, int, int]]] = field(default_factory=list)
    raster_sha256: str | None = None

    def is_empty(self) -> bool:
        return not (self.forced_cuts or self.forbidden_cuts or self.box_overrides)

    def to_dict(self) -> dict:
        d = {
            "line_id": self.line_id,
            "forced_cuts": list(self.forced_cuts),
            "forbidden_cuts": [{"left_index": i} for i in self.forbidden_cuts],
            "box_overrides": [{"index": i, "box": list(b)} for i, b in self.box_overrides],
        }
        if self.raster_sha256 is not None:
            d["raster_sha256"] = self.raster_sha256
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CorrectionSet":
        return cls(
            line_id=d["line_id"],
            forced_cuts=[int(c) for c in d.get("forced_cuts", [])],
            forbidden_cuts=[int(e["left_index"]) for e in d.get("forbidden_cuts", [])],
            box_overrides=[(int(e["index"]), tuple(int(v) for v in e["box"])) for e in d.get("box_overrides", [])],
            raster_sha256=d.get("raster_sha256"),
        )

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "CorrectionSet":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def find_cut_intervals(r: BinaryRaster, p: SegmentationParams) -> list[CutInterval]:
    """Maximal cut runs, disjoint and sorted, margins included."""
    col_any = column_profile(r, 0.0, 1.0).counts > 0
    if p.bridge_exception_enabled:
        core = column_profile(r, p.band_top_frac, p.band_bottom_frac)
        col_free = core.counts == 0
    else:
        col_free = ~col_any

    cuts: list[CutInterval] = []
    w = r.width
    x = 0
    while x < w:
        if not col_free[x]:
            x += 1
            continue
        start = x
        while x < w and col_free[x]:
            x += 1
        is_margin = start == 0 or x == w
        if is_margin or (x - start) >= p.min_gap_width:
            kind = BRIDGED_GAP if col_any[start:x].any() else PLAIN_GAP
            cuts.append(CutInterval(start, x, kind))
    return cuts


def _glyph_spans(width: int, cuts: list[CutInterval], min_glyph_width: int) -> tuple[list[tuple[int, int]], list[CutInterval]]:
    """Spans between cuts, with sub-minimum spans merged left (first span merges right)."""
    spans: list[tuple[int, int]] = []
    pos = 0
    for c in cuts:
        if c.start_col > pos:
            spans.append((pos, c.start_col))
        pos = c.end_col
    if pos < width:
        spans.append((pos, width))

    changed = True
    while changed and len(spans) > 1:
        changed = False
        for i, (s, e) in enumerate(spans):
            if e - s >= min_glyph_width:
                continue
            if i > 0:
                spans[i - 1] = (spans[i - 1][0], e)
            else:
                spans[i + 1] = (s, spans[i + 1][1])
            del spans[i]
            changed = True
            break

    covered = {(s, e) for s, e in spans}
    kept = [c for c in cuts if not any(s < c.start_col and c.end_col <= e for s, e in covered)]
    return spans, kept


def segment_spans(r: BinaryRaster, p: SegmentationParams) -> tuple[list[tuple[int, int]], list[CutInterval]]:
    """Post-merge glyph spans plus the surviving cut intervals (they tile [0, width))."""
    cuts = find_cut_intervals(r, p)
    return _glyph_spans(r.width, cuts, p.min_glyph_width)


def segment_line(r: BinaryRaster, p: SegmentationParams) -> list[GlyphOccurrence]:
    """Segment a line into ordered glyph occurrences with tight boxes.

    Extension ink inside a bridged gap attaches to the nearer adjacent
    span (ties go left) so every ink pixel is owned by exactly one glyph
    and rectangular crops are lossless.
    """
    spans, cuts = segment_spans(r, p)
    if not spans:
        return []

    # owner[col] = span index owning that column's ink
    owner = np.full(r.width, -1, dtype=np.int64)
    for si, (s, e) in enumerate(spans):
        owner[s:e] = si
    for c in cuts:
        left = _span_left_of(spans, c.start_col)
        right = _span_right_of(spans, c.end_col)
        if left is None and right is None:
            continue
        if left is None:
            owner[c.start_col : c.end_col] = right
        elif right is None:
            owner[c.start_col : c.end_col] = left
        else:
            # columns up to the midpoint (ties left) go to the left span
            mid = (c.start_col + c.end_col - 1) // 2
            owner[c.start_col : mid + 1] = left
            owner[mid + 1 : c.end_col] = right

    occs: list[GlyphOccurrence] = []
    index = 0
    for si in range(len(spans)):
        cols = np.flatnonzero(owner == si)
        sub = r.ink[:, cols[0] : cols[-1] + 1]
        ink_cols = np.flatnonzero(sub.any(axis=0))
        if ink_cols.size == 0:
            continue
        x0 = int(cols[0] + ink_cols[0])
        x1 = int(cols[0] + ink_cols[-1] + 1)
        ink_rows = np.flatnonzero(r.ink[:, x0:x1].any(axis=1))
        y0, y1 = int(ink_rows[0]), int(ink_rows[-1] + 1)
        occs.append(_make_occurrence(r, index, (x0, y0, x1, y1)))
        index += 1
    return occs


def _span_left_of(spans: list[tuple[int, int]], col: int) -> int | None:
    best = None
    for i, (s, e) in enumerate(spans):
        if e <= col:
            best = i
    return best


def _span_right_of(spans: list[tuple[int, int]], col: int) -> int | None:
    for i, (s, e) in enumerate(spans):
        if s >= col:
            return i
    return None


def _make_occurrence(r: BinaryRaster, index: int, box: tuple[int, int, int, int]) -> GlyphOccurrence:
    x0, y0, x1, y1 = box
    crop = BinaryRaster.from_array(r.ink[y0:y1, x0:x1])
    return GlyphOccurrence(index_in_line=index, box=box, raster=crop)


def _tight_box(r: BinaryRaster, x_lo: int, x_hi: int) -> tuple[int, int, int, int] | None:
    sub = r.ink[:, x_lo:x_hi]
    cols = np.flatnonzero(sub.any(axis=0))
    if cols.size == 0:
        return None
    x0 = int(x_lo + cols[0])
    x1 = int(x_lo + cols[-1] + 1)
    rows = np.flatnonzero(r.ink[:, x0:x1].any(axis=1))
    return (x0, int(rows[0]), x1, int(rows[-1] + 1))


def apply_corrections(occs: list[GlyphOccurrence], r: BinaryRaster, c: CorrectionSet) -> list[GlyphOccurrence]:
    """Replay a CorrectionSet onto segmenter output; ordinals are re-derived."""
    boxes = [o.box for o in occs]

    for col in sorted(c.forced_cuts):
        hit = None
        for i, (x0, y0, x1, y1) in enumerate(boxes):
            if x0 < col < x1:
                hit = i
                break
        if hit is None:
            raise ValidationError("correction-out-of-range", f"no occurrence spans a cut at column {col}")
        x0, y0, x1, y1 = boxes[hit]
        left = _tight_box(r, x0, col)
        right = _tight_box(r, col, x1)
        if left is None or right is None:
            raise ValidationError("correction-produces-empty-glyph", f"cut at column {col} leaves an inkless side")
        boxes[hit : hit + 1] = [left, right]

    boxes.sort(key=lambda b: b[0])
    for left_index in sorted(c.forbidden_cuts, reverse=True):
        if not 0 <= left_index < len(boxes) - 1:
            raise ValidationError("correction-out-of-range", f"forbidden cut left_index {left_index} out of range")
        a, b = boxes[left_index], boxes[left_index + 1]
        boxes[left_index : left_index + 2] = [
            (min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3]))
        ]

    for index, box in c.box_overrides:
        if not 0 <= index < len(boxes):
            raise ValidationError("correction-out-of-range", f"box override index {index} out of range")
        x0, y0, x1, y1 = box
        if not (0 <= x0 < x1 <= r.width and 0 <= y0 < y1 <= r.height):
            raise ValidationError("correction-out-of-range", f"box override {box} exceeds the raster")
        if not r.ink[y0:y1, x0:x1].any():
            raise ValidationError("correction-produces-empty-glyph", f"box override {box} contains no ink")
        boxes[index] = (x0, y0, x1, y1)

    boxes.sort(key=lambda b: b[0])
    return [_make_occurrence(r, i, box) for i, box in enumerate(boxes)]
