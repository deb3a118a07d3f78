"""Token-sheet rendering: every class exemplar with its placeholder label.

Output is bitwise deterministic for fixed inventory + layout, because
glyphs scale by an integer factor and labels come from the embedded
bitmap font.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import bitmapfont
from .classifier import TokenClass
from .errors import ValidationError


@dataclass(frozen=True)
class SheetLayout:
    columns: int = 8
    cell_px: int = 64  # square glyph cell
    label_px: int = 12  # label strip height under each cell

    def __post_init__(self):
        if self.columns < 1:
            raise ValidationError("bad-layout", "columns must be >= 1")


def sheet_grid_shape(n_classes: int, layout: SheetLayout) -> tuple[int, int]:
    """(columns, rows) of the sheet cell grid."""
    cols = min(layout.columns, n_classes)
    rows = -(-n_classes // layout.columns)
    return layout.columns, rows if n_classes else 0


def render_token_sheet(classes: list[TokenClass], layout: SheetLayout = SheetLayout()) -> Image.Image:
    """Grid of exemplars in class_id order, labels drawn beneath each."""
    if not classes:
        raise ValidationError("empty-inventory", "cannot render a sheet for an empty inventory")
    if layout.label_px < bitmapfont.CHAR_H:
        raise ValidationError("layout-too-small", f"label_px must be >= {bitmapfont.CHAR_H}")
    for c in classes:
        if layout.cell_px < c.exemplar.side:
            raise ValidationError(
                "layout-too-small", f"cell_px {layout.cell_px} cannot fit a side-{c.exemplar.side} glyph"
            )
        if bitmapfont.text_width(c.placeholder) > layout.cell_px:
            raise ValidationError(
                "layout-too-small", f"cell_px {layout.cell_px} cannot fit the label {c.placeholder!r}"
            )

    n = len(classes)
    cols = layout.columns
    rows = -(-n // cols)
    cell_h = layout.cell_px + layout.label_px
    canvas = np.full((rows * cell_h, cols * layout.cell_px), 255, dtype=np.uint8)

    for c in sorted(classes, key=lambda c: c.class_id):
        row, col = divmod(c.class_id, cols)
        cx = col * layout.cell_px
        cy = row * cell_h
        side = c.exemplar.side
        f = layout.cell_px // side
        glyph = np.kron(c.exemplar.grid, np.ones((f, f), dtype=bool))
        gy = cy + (layout.cell_px - side * f) // 2
        gx = cx + (layout.cell_px - side * f) // 2
        region = canvas[gy : gy + side * f, gx : gx + side * f]
        region[glyph] = 0

        label = bitmapfont.render_text(c.placeholder)
        ly = cy + layout.cell_px + (layout.label_px - bitmapfont.CHAR_H) // 2
        lx = cx + (layout.cell_px - label.shape[1]) // 2
        strip = canvas[ly : ly + label.shape[0], lx : lx + label.shape[1]]
        strip[label] = 0

    return Image.fromarray(canvas, mode="L")


def render_token_sheet_png(classes: list[TokenClass], layout: SheetLayout = SheetLayout()) -> bytes:
    buf = io.BytesIO()
    render_token_sheet(classes, layout).save(buf, format="PNG")
    return buf.getvalue()
