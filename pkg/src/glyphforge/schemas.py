"""Pydantic request/response models for the review service."""
from __future__ import annotations

from pydantic import BaseModel, Field


class LineSummary(BaseModel):
    line_id: str
    width: int
    height: int
    occurrence_count: int
    cut_count: int
    raster_sha256: str
    has_corrections: bool


class CutOut(BaseModel):
    start_col: int
    end_col: int
    kind: str


class OccurrenceOut(BaseModel):
    index: int
    box: tuple[int, int, int, int]
    class_id: int | None = None


class CorrectionsOut(BaseModel):
    forced_cuts: list[int] = Field(default_factory=list)
    forbidden_cuts: list[int] = Field(default_factory=list)
    box_overrides: list[tuple[int, tuple[int, int, int, int]]] = Field(default_factory=list)


class LineDetail(BaseModel):
    line_id: str
    width: int
    height: int
    image_png_base64: str
    cuts: list[CutOut]
    occurrences: list[OccurrenceOut]
    corrections: CorrectionsOut


class CorrectionsIn(BaseModel):
    line_id: str
    forced_cuts: list[int] = Field(default_factory=list)
    forbidden_cuts: list[int] = Field(default_factory=list)
    box_overrides: list[tuple[int, tuple[int, int, int, int]]] = Field(default_factory=list)


class CorrectionsAck(BaseModel):
    line_id: str
    occurrence_count: int


class ClassOut(BaseModel):
    class_id: int
    placeholder: str
    exemplar_side: int
    exemplar_rle: dict
    member_refs: list[tuple[str, int]]
    mirror_of: int | None = None


class InventoryOut(BaseModel):
    classes: list[ClassOut]
    class_count: int
    mirror_suggestions: list[tuple[int, int]] | None = None


class MergeIn(BaseModel):
    class_ids: list[int] = Field(min_length=2)


class SplitIn(BaseModel):
    class_id: int
    member_refs: list[tuple[str, int]] = Field(min_length=1)


class MirrorIn(BaseModel):
    class_a: int
    class_b: int
    value: bool = True


class ActionAck(BaseModel):
    class_count: int


class LineCountChange(BaseModel):
    line_id: str
    old_count: int
    new_count: int


class RebuildOut(BaseModel):
    lines: list[LineCountChange]
    class_count: int
