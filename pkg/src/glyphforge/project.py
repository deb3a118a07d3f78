"""Project directory layout and the replayable build pipeline.

A project is a directory:

    images/        one PNG per line of script
    segments/      per-line segmentation output (boxes + cuts + params)
    corrections/   per-line CorrectionSets, class_actions.json, edit logs
    inventory.json token classes
    puzzles/       PuzzleDocument JSON files (+ .encoded.json after builds)
    templates/     prompt templates
    runs/          bundles, records, reports

The project plus its corrections fully determine the rebuilt dataset:
`apply_review` re-runs segmentation from the stored parameters, replays
corrections (gated by raster content hashes), re-clusters, replays class
actions, and re-encodes placeholder text. All writes are atomic.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from . import dataset
from .ioutil import atomic_write_bytes, atomic_write_json, atomic_write_text
from .classifier import (
    ClassAction,
    ClassifierParams,
    NormalizedGlyph,
    Ref,
    TokenClass,
    apply_class_actions,
    cluster_tokens,
    inventory_to_dict,
    load_inventory,
    normalize_glyph,
)
from .errors import ValidationError
from .raster import BinaryRaster, GrayRaster, binarize, invert, load_line_image
from .segmenter import CorrectionSet, CutInterval, GlyphOccurrence, SegmentationParams, apply_corrections, find_cut_intervals, segment_line

SUBDIRS = ("images", "segments", "corrections", "puzzles", "templates", "runs")


@dataclass(frozen=True)
class ProjectLayout:
    root: Path

    @property
    def images(self) -> Path:
        return self.root / "images"

    @property
    def segments(self) -> Path:
        return self.root / "segments"

    @property
    def corrections(self) -> Path:
        return self.root / "corrections"

    @property
    def inventory(self) -> Path:
        return self.root / "inventory.json"

    @property
    def puzzles(self) -> Path:
        return self.root / "puzzles"

    @property
    def templates(self) -> Path:
        return self.root / "templates"

    @property
    def runs(self) -> Path:
        return self.root / "runs"

    def ensure(self) -> "ProjectLayout":
        for name in SUBDIRS:
            (self.root / name).mkdir(parents=True, exist_ok=True)
        return self

    def class_actions_path(self) -> Path:
        return self.corrections / "class_actions.json"

    def correction_path(self, line_id: str) -> Path:
        return self.corrections / f"{line_id}.json"

    def edit_log_path(self, line_id: str) -> Path:
        return self.corrections / f"{line_id}.log.jsonl"

    def line_ids(self) -> list[str]:
        if not self.images.is_dir():
            return []
        return sorted(p.stem for p in self.images.glob("*.png"))


def project(root: str | Path) -> ProjectLayout:
    return ProjectLayout(root=Path(root))


# --- per-line segmentation artifacts ------------------------------------------


@dataclass
class LineRecord:
    line_id: str
    image: str  # file name under images/
    raster_sha256: str
    params: SegmentationParams
    binarize_method: str | int
    inverted: bool
    cuts: list[CutInterval]
    occurrences: list[GlyphOccurrence]
    raster: BinaryRaster

    def to_dict(self) -> dict:
        return {
            "line_id": self.line_id,
            "image": self.image,
            "raster_sha256": self.raster_sha256,
            "params": self.params.to_dict(),
            "binarize": self.binarize_method,
            "invert": self.inverted,
            "cuts": [{"start_col": c.start_col, "end_col": c.end_col, "kind": c.kind} for c in self.cuts],
            "occurrences": [{"index": o.index_in_line, "box": list(o.box)} for o in self.occurrences],
        }


def image_sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def binarize_line(img: GrayRaster, method: str | int, inverted: bool) -> BinaryRaster:
    return binarize(invert(img) if inverted else img, method)


def segment_image(
    layout: ProjectLayout,
    image_path: Path,
    params: SegmentationParams,
    binarize_method: str | int = "otsu",
    inverted: bool = False,
    corrections: CorrectionSet | None = None,
) -> LineRecord:
    """Segment one line image, replaying corrections when given."""
    line_id = image_path.stem
    sha = image_sha256(image_path)
    raster = binarize_line(load_line_image(image_path), binarize_method, inverted)
    cuts = find_cut_intervals(raster, params)
    occs = segment_line(raster, params)
    if corrections is not None and not corrections.is_empty():
        if corrections.raster_sha256 is not None and corrections.raster_sha256 != sha:
            raise ValidationError(
                "stale-corrections",
                f"corrections for {line_id} were recorded against a different raster",
            )
        occs = apply_corrections(occs, raster, corrections)
    return LineRecord(
        line_id=line_id,
        image=image_path.name,
        raster_sha256=sha,
        params=params,
        binarize_method=binarize_method,
        inverted=inverted,
        cuts=cuts,
        occurrences=occs,
        raster=raster,
    )


def write_segment_record(layout: ProjectLayout, rec: LineRecord) -> Path:
    out = layout.segments / f"{rec.line_id}.json"
    atomic_write_json(out, rec.to_dict())
    return out


def load_segment_record(layout: ProjectLayout, line_id: str) -> LineRecord:
    path = layout.segments / f"{line_id}.json"
    if not path.is_file():
        raise ValidationError(
            "missing-segments", f"no segmentation for line {line_id!r}; run `glyphforge segment` first"
        )
    d = json.loads(path.read_text(encoding="utf-8"))
    params = SegmentationParams.from_dict(d["params"])
    image_path = layout.images / d["image"]
    if not image_path.is_file():
        raise ValidationError("missing-image", f"line image {image_path} is gone")
    raster = binarize_line(load_line_image(image_path), d["binarize"], d["invert"])
    occs = []
    for e in d["occurrences"]:
        x0, y0, x1, y1 = e["box"]
        crop = BinaryRaster.from_array(raster.ink[y0:y1, x0:x1])
        occs.append(GlyphOccurrence(index_in_line=int(e["index"]), box=(x0, y0, x1, y1), raster=crop))
    cuts = [CutInterval(int(c["start_col"]), int(c["end_col"]), c["kind"]) for c in d["cuts"]]
    return LineRecord(
        line_id=line_id,
        image=d["image"],
        raster_sha256=d["raster_sha256"],
        params=params,
        binarize_method=d["binarize"],
        inverted=bool(d["invert"]),
        cuts=cuts,
        occurrences=occs,
        raster=raster,
    )


def load_corrections(layout: ProjectLayout, line_id: str) -> CorrectionSet | None:
    path = layout.correction_path(line_id)
    if not path.is_file():
        return None
    return CorrectionSet.load(path)


def load_class_actions(layout: ProjectLayout) -> list[ClassAction]:
    path = layout.class_actions_path()
    if not path.is_file():
        return []
    doc = json.loads(path.read_text(encoding="utf-8"))
    return [ClassAction.from_dict(e) for e in doc.get("actions", [])]


def save_class_actions(layout: ProjectLayout, actions: list[ClassAction]) -> None:
    atomic_write_json(layout.class_actions_path(), {"actions": [a.to_dict() for a in actions]})


def append_edit_log(layout: ProjectLayout, line_id: str, entry: dict) -> None:
    path = layout.edit_log_path(line_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry, ensure_ascii=False, sort_keys=True) + "\n")


# --- corpus + rebuild -----------------------------------------------------------


@dataclass
class BuildState:
    lines: dict[str, LineRecord]
    classes: list[TokenClass]
    assignment: dict[Ref, int]
    grids: dict[Ref, NormalizedGlyph]
    corpus_order: list[Ref]
    classifier_params: ClassifierParams


def corpus_from_lines(lines: dict[str, LineRecord]) -> list[tuple[str, GlyphOccurrence]]:
    corpus = []
    for line_id in sorted(lines):
        for occ in lines[line_id].occurrences:
            corpus.append((line_id, occ))
    return corpus


def rebuild_state(
    layout: ProjectLayout,
    classifier_params: ClassifierParams,
    segmentation_override: dict[str, SegmentationParams] | None = None,
) -> BuildState:
    """Replay the whole pipeline from images + stored params + corrections."""
    line_ids = layout.line_ids()
    if not line_ids:
        raise ValidationError("missing-images", "project has no line images under images/")
    lines: dict[str, LineRecord] = {}
    for line_id in line_ids:
        stored = load_segment_record(layout, line_id)
        params = (segmentation_override or {}).get(line_id, stored.params)
        lines[line_id] = segment_image(
            layout,
            layout.images / stored.image,
            params,
            stored.binarize_method,
            stored.inverted,
            corrections=load_corrections(layout, line_id),
        )
    corpus = corpus_from_lines(lines)
    if not corpus:
        raise ValidationError("empty-corpus", "no glyph occurrences were found in any line")
    classes, assignment = cluster_tokens(corpus, classifier_params)
    grids = {(lid, occ.index_in_line): normalize_glyph(occ, classifier_params.normalize_side) for lid, occ in corpus}
    corpus_order = [(lid, occ.index_in_line) for lid, occ in corpus]
    actions = load_class_actions(layout)
    if actions:
        classes, assignment = apply_class_actions(classes, assignment, actions, grids, corpus_order)
    return BuildState(
        lines=lines,
        classes=classes,
        assignment=assignment,
        grids=grids,
        corpus_order=corpus_order,
        classifier_params=classifier_params,
    )


@dataclass
class RebuildResult:
    line_counts: list[tuple[str, int, int]]  # line_id, old occurrence count, new count
    class_count: int


def apply_review(layout: ProjectLayout) -> tuple[BuildState, RebuildResult]:
    """Replay saved corrections and class actions, persist the artifacts,
    and re-encode placeholder text for every puzzle."""
    old_counts: dict[str, int] = {}
    for line_id in layout.line_ids():
        try:
            old_counts[line_id] = len(load_segment_record(layout, line_id).occurrences)
        except ValidationError:
            old_counts[line_id] = 0

    params = ClassifierParams()
    if layout.inventory.is_file():
        _, _, params = load_inventory(layout.inventory)
    state = rebuild_state(layout, params)

    for rec in state.lines.values():
        write_segment_record(layout, rec)
    atomic_write_json(layout.inventory, inventory_to_dict(state.classes, state.classifier_params))

    if layout.puzzles.is_dir():
        for puzzle_path in sorted(layout.puzzles.glob("*.json")):
            if puzzle_path.name.endswith(".encoded.json"):
                continue
            doc = dataset.PuzzleDocument.load(puzzle_path)
            encoded = dataset.encode_placeholders(doc, state.assignment)
            atomic_write_json(
                layout.puzzles / f"{puzzle_path.stem}.encoded.json",
                {"puzzle_id": doc.puzzle_id, "lines": {lid: text for lid, text in encoded}},
            )

    counts = [(lid, old_counts.get(lid, 0), len(rec.occurrences)) for lid, rec in sorted(state.lines.items())]
    return state, RebuildResult(line_counts=counts, class_count=len(state.classes))
