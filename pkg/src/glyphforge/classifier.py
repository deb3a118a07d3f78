"""Clustering of glyph occurrences into token classes.

Classes are found by greedy leader clustering in corpus order: an
occurrence joins the first class whose exemplar it matches at or above
the similarity threshold, otherwise it founds a new class. Numbering
therefore follows first appearance, which is what the `<token_i>`
placeholders encode. Mirror detection is off by default; mirrored glyphs
stay distinct tokens unless a reviewer merges them.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .ioutil import atomic_write_text
from .raster import BinaryRaster
from .segmenter import GlyphOccurrence

Ref = tuple[str, int]  # (line_id, index_in_line)


@dataclass(frozen=True)
class NormalizedGlyph:
    side: int
    grid: np.ndarray  # (side, side) bool

    def __post_init__(self):
        if self.grid.shape != (self.side, self.side):
            raise ValidationError("bad-grid", "grid must be side x side")
        self.grid.setflags(write=False)


@dataclass
class TokenClass:
    class_id: int
    exemplar: NormalizedGlyph
    member_refs: list[Ref] = field(default_factory=list)
    mirror_of: int | None = None

    @property
    def placeholder(self) -> str:
        return f"<token_{self.class_id}>"


@dataclass(frozen=True)
class ClassifierParams:
    similarity_threshold: float = 0.90
    normalize_side: int = 32
    mirror_detection_enabled: bool = False

    def __post_init__(self):
        if not 0.0 < self.similarity_threshold <= 1.0:
            raise ValidationError("bad-params", "similarity_threshold must be in (0, 1]")
        if self.normalize_side < 1:
            raise ValidationError("bad-params", "normalize_side must be >= 1")

    def to_dict(self) -> dict:
        return {
            "similarity_threshold": self.similarity_threshold,
            "normalize_side": self.normalize_side,
            "mirror_detection_enabled": self.mirror_detection_enabled,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClassifierParams":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def normalize_glyph(occ: GlyphOccurrence, side: int = 32) -> NormalizedGlyph:
    """Nearest-neighbor scale of the crop, aspect preserved, centered.

    The larger crop dimension maps to exactly `side`. A non-empty source
    always yields at least one true cell: if sparse ink falls between all
    sample points, the cell over the first ink pixel is set.
    """
    crop = occ.raster.ink
    h, w = crop.shape
    if not crop.any():
        raise ValidationError("empty-glyph", "cannot normalize a glyph with no ink")
    m = max(w, h)
    sw = max(1, round(w * side / m))
    sh = max(1, round(h * side / m))
    ys = np.minimum(h - 1, (2 * np.arange(sh) + 1) * h // (2 * sh))
    xs = np.minimum(w - 1, (2 * np.arange(sw) + 1) * w // (2 * sw))
    scaled = crop[np.ix_(ys, xs)]
    grid = np.zeros((side, side), dtype=bool)
    oy, ox = (side - sh) // 2, (side - sw) // 2
    grid[oy : oy + sh, ox : ox + sw] = scaled
    if not grid.any():
        iy, ix = np.argwhere(crop)[0]
        grid[oy + min(sh - 1, int(iy) * sh // h), ox + min(sw - 1, int(ix) * sw // w)] = True
    return NormalizedGlyph(side=side, grid=grid)


def glyph_similarity(a: NormalizedGlyph, b: NormalizedGlyph) -> float:
    """Normalized Hamming agreement: matching cells / total cells."""
    if a.side != b.side:
        raise ValidationError("side-mismatch", "glyphs must share the normalization side")
    return float(np.mean(a.grid == b.grid))


def hflip(g: NormalizedGlyph) -> NormalizedGlyph:
    return NormalizedGlyph(side=g.side, grid=np.fliplr(g.grid).copy())


def cluster_tokens(
    occs: Sequence[tuple[str, GlyphOccurrence]], p: ClassifierParams
) -> tuple[list[TokenClass], dict[Ref, int]]:
    """Greedy leader clustering in corpus order.

    Returns the classes (ids in founding order) and the full assignment
    map ref -> class_id. The loop is order-dependent by design; do not
    parallelize it.
    """
    if not occs:
        raise ValidationError("empty-corpus", "cannot cluster an empty corpus")
    classes: list[TokenClass] = []
    assignment: dict[Ref, int] = {}
    for line_id, occ in occs:
        ref = (line_id, occ.index_in_line)
        g = normalize_glyph(occ, p.normalize_side)
        for tc in classes:
            if glyph_similarity(g, tc.exemplar) >= p.similarity_threshold:
                tc.member_refs.append(ref)
                assignment[ref] = tc.class_id
                break
        else:
            tc = TokenClass(class_id=len(classes), exemplar=g, member_refs=[ref])
            classes.append(tc)
            assignment[ref] = tc.class_id
    return classes, assignment


def detect_mirror_pairs(classes: list[TokenClass], p: ClassifierParams) -> list[tuple[int, int]]:
    """Report class pairs whose exemplars match under horizontal flip.

    Self-symmetric classes are excluded. Returns every qualifying pair
    (a, b) with a < b; mirror_of is populated greedily so it stays an
    involution with no fixed points even if a class matches several flips.
    """
    if not p.mirror_detection_enabled:
        raise ValidationError("mirror-detection-disabled", "enable mirror_detection_enabled first")
    tau = p.similarity_threshold
    flipped = {c.class_id: hflip(c.exemplar) for c in classes}
    self_sym = {c.class_id for c in classes if glyph_similarity(c.exemplar, flipped[c.class_id]) >= tau}
    by_id = {c.class_id: c for c in classes}
    ids = sorted(by_id)
    pairs: list[tuple[int, int]] = []
    for i, a in enumerate(ids):
        if a in self_sym:
            continue
        for b in ids[i + 1 :]:
            if b in self_sym:
                continue
            if glyph_similarity(by_id[a].exemplar, flipped[b]) >= tau:
                pairs.append((a, b))
    paired: set[int] = set()
    for a, b in pairs:
        if a in paired or b in paired:
            continue
        by_id[a].mirror_of = b
        by_id[b].mirror_of = a
        paired.update((a, b))
    return pairs


# --- review actions -------------------------------------------------------

MERGE = "merge"
SPLIT = "split"
MIRROR = "mirror"


@dataclass(frozen=True)
class ClassAction:
    """A reviewer decision about token identity, stored as member refs so
    it replays across re-clusterings."""

    op: str  # MERGE, SPLIT or MIRROR
    refs: tuple[Ref, ...]
    value: bool = True  # MIRROR only: False clears the pairing

    def to_dict(self) -> dict:
        d = {"op": self.op, "refs": [list(r) for r in self.refs]}
        if self.op == MIRROR:
            d["value"] = self.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ClassAction":
        return cls(
            op=d["op"],
            refs=tuple((str(r[0]), int(r[1])) for r in d["refs"]),
            value=bool(d.get("value", True)),
        )


def apply_class_actions(
    classes: list[TokenClass],
    assignment: dict[Ref, int],
    actions: Iterable[ClassAction],
    grids: dict[Ref, NormalizedGlyph],
    corpus_order: Sequence[Ref],
) -> tuple[list[TokenClass], dict[Ref, int]]:
    """Replay merge/split/mirror actions and renumber canonically.

    After all actions, classes are renumbered 0..k-1 by the corpus
    position of their earliest member, and each exemplar is that earliest
    member's grid. Plain clustering output is a fixed point of this
    renumbering.
    """
    pos = {ref: i for i, ref in enumerate(corpus_order)}
    groups: dict[int, set[Ref]] = {c.class_id: set(c.member_refs) for c in classes}
    mirrors: list[tuple[Ref, Ref, bool]] = []

    def group_of(ref: Ref) -> int:
        for gid, members in groups.items():
            if ref in members:
                return gid
        raise ValidationError("unknown-ref", f"no class contains occurrence {ref}")

    next_gid = max(groups, default=-1) + 1
    for action in actions:
        for ref in action.refs:
            if ref not in pos:
                raise ValidationError("unknown-ref", f"occurrence {ref} is not in the corpus")
        if action.op == MERGE:
            if len(action.refs) < 2:
                raise ValidationError("bad-action", "merge needs at least two refs")
            target = group_of(action.refs[0])
            for ref in action.refs[1:]:
                src = group_of(ref)
                if src != target:
                    groups[target] |= groups.pop(src)
        elif action.op == SPLIT:
            if not action.refs:
                raise ValidationError("bad-action", "split needs at least one ref")
            src = group_of(action.refs[0])
            moved = set(action.refs)
            if not moved <= groups[src]:
                raise ValidationError("bad-action", "split refs must share one class")
            if moved == groups[src]:
                raise ValidationError("bad-action", "split must leave the source class non-empty")
            groups[src] -= moved
            groups[next_gid] = moved
            next_gid += 1
        elif action.op == MIRROR:
            if len(action.refs) != 2:
                raise ValidationError("bad-action", "mirror needs exactly two refs")
            mirrors.append((action.refs[0], action.refs[1], action.value))
        else:
            raise ValidationError("bad-action", f"unknown class action {action.op!r}")

    ordered = sorted(groups.values(), key=lambda members: min(pos[r] for r in members))
    new_classes: list[TokenClass] = []
    new_assignment: dict[Ref, int] = {}
    for cid, members in enumerate(ordered):
        refs = sorted(members, key=lambda r: pos[r])
        new_classes.append(TokenClass(class_id=cid, exemplar=grids[refs[0]], member_refs=refs))
        for r in refs:
            new_assignment[r] = cid
    for ref_a, ref_b, value in mirrors:
        a, b = new_assignment[ref_a], new_assignment[ref_b]
        if a == b:
            raise ValidationError("bad-action", "cannot mirror-pair a class with itself")
        if value:
            new_classes[a].mirror_of = b
            new_classes[b].mirror_of = a
        else:
            if new_classes[a].mirror_of == b:
                new_classes[a].mirror_of = None
            if new_classes[b].mirror_of == a:
                new_classes[b].mirror_of = None
    return new_classes, new_assignment


# --- inventory file -------------------------------------------------------


def grid_to_rle(g: NormalizedGlyph) -> dict:
    flat = g.grid.ravel()
    runs: list[int] = []
    first = int(flat[0])
    current = flat[0]
    count = 0
    for v in flat:
        if v == current:
            count += 1
        else:
            runs.append(count)
            current = v
            count = 1
    runs.append(count)
    return {"side": g.side, "first": first, "runs": runs}


def rle_to_grid(d: dict) -> NormalizedGlyph:
    side = int(d["side"])
    flat = np.empty(side * side, dtype=bool)
    value = bool(d["first"])
    pos = 0
    for run in d["runs"]:
        flat[pos : pos + run] = value
        pos += run
        value = not value
    if pos != side * side:
        raise ValidationError("bad-rle", "run lengths do not cover the grid")
    return NormalizedGlyph(side=side, grid=flat.reshape(side, side))


def inventory_to_dict(classes: list[TokenClass], params: ClassifierParams) -> dict:
    return {
        "version": 1,
        "params": params.to_dict(),
        "classes": [
            {
                "class_id": c.class_id,
                "exemplar": grid_to_rle(c.exemplar),
                "member_refs": [list(r) for r in c.member_refs],
                "mirror_of": c.mirror_of,
            }
            for c in classes
        ],
    }


def inventory_from_dict(d: dict) -> tuple[list[TokenClass], dict[Ref, int], ClassifierParams]:
    params = ClassifierParams.from_dict(d.get("params", {}))
    classes = [
        TokenClass(
            class_id=int(e["class_id"]),
            exemplar=rle_to_grid(e["exemplar"]),
            member_refs=[(str(r[0]), int(r[1])) for r in e["member_refs"]],
            mirror_of=e.get("mirror_of"),
        )
        for e in d["classes"]
    ]
    assignment = {ref: c.class_id for c in classes for ref in c.member_refs}
    return classes, assignment, params


def save_inventory(path: str | Path, classes: list[TokenClass], params: ClassifierParams) -> None:
    atomic_write_text(path, json.dumps(inventory_to_dict(classes, params), indent=2) + "\n")


def load_inventory(path: str | Path) -> tuple[list[TokenClass], dict[Ref, int], ClassifierParams]:
    return inventory_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
