import numpy as np
import pytest
from PIL import Image

from glyphforge.raster import BinaryRaster
from glyphforge.segmenter import GlyphOccurrence


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_pattern(rng, size=12):
    """Random glyph pattern with every column inked and tight edges."""
    g = rng.random((size, size)) < 0.5
    g[size // 2, :] = True
    g[0, size // 2] = True
    g[-1, size // 2] = True
    return g


def write_line_png(path, patterns, height=32, gap=4, margin=3, y0=8):
    """Compose patterns left-to-right on a white line and save as PNG.

    Returns the ground-truth boxes in placement order.
    """
    size = patterns[0].shape[1]
    width = margin * 2 + len(patterns) * size + (len(patterns) - 1) * gap
    canvas = np.full((height, width), 255, dtype=np.uint8)
    boxes = []
    x = margin
    for g in patterns:
        h, w = g.shape
        canvas[y0 : y0 + h, x : x + w][g] = 0
        boxes.append((x, y0, x + w, y0 + h))
        x += w + gap
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(canvas, mode="L").save(path)
    return boxes


def make_occurrence(grid: np.ndarray, index: int = 0, x0: int = 0, y0: int = 0) -> GlyphOccurrence:
    """Wrap a boolean grid as a standalone occurrence crop."""
    grid = np.asarray(grid, dtype=bool)
    h, w = grid.shape
    return GlyphOccurrence(
        index_in_line=index,
        box=(x0, y0, x0 + w, y0 + h),
        raster=BinaryRaster.from_array(grid),
    )


def line_with_blocks(width: int, height: int, blocks: list[tuple[int, int, int, int]]) -> BinaryRaster:
    """Blank line with solid ink rectangles (x0, y0, x1, y1)."""
    ink = np.zeros((height, width), dtype=bool)
    for x0, y0, x1, y1 in blocks:
        ink[y0:y1, x0:x1] = True
    return BinaryRaster.from_array(ink)
