import io

import numpy as np
import pytest
from PIL import Image

from glyphforge.classifier import ClassifierParams, cluster_tokens
from glyphforge.errors import ValidationError
from glyphforge.sheet import SheetLayout, render_token_sheet, render_token_sheet_png

from conftest import make_occurrence


def classes_from_grids(grids):
    corpus = [("l0", make_occurrence(g, index=i)) for i, g in enumerate(grids)]
    classes, _ = cluster_tokens(corpus, ClassifierParams(similarity_threshold=1.0, normalize_side=len(grids[0])))
    return classes


def test_one_class_glyph_region_rebinarizes_to_exemplar(rng):
    g = rng.random((8, 8)) < 0.5
    g[0, 0] = True
    classes = classes_from_grids([g])
    layout = SheetLayout(columns=1, cell_px=64, label_px=12)
    img = np.asarray(render_token_sheet(classes, layout))
    factor = 64 // 8
    region = img[:64, :64] < 128  # re-binarize
    blocks = region.reshape(8, factor, 8, factor).swapaxes(1, 2).reshape(8, 8, -1)
    assert (blocks.all(axis=2) == classes[0].exemplar.grid).all()
    assert (~blocks.any(axis=2) == ~classes[0].exemplar.grid).all()


def test_grid_dimensions_arithmetic(rng):
    for k in (1, 3, 4, 5, 9):
        grids = [rng.random((8, 8)) < 0.5 for _ in range(k)]
        for g in grids:
            g[0, 0] = True
        classes = classes_from_grids(grids)
        layout = SheetLayout(columns=4, cell_px=64, label_px=12)
        img = render_token_sheet(classes, layout)
        rows = -(-k // 4)
        assert img.size == (4 * 64, rows * (64 + 12))


def test_byte_identical_renders(rng):
    grids = [rng.random((8, 8)) < 0.5 for _ in range(5)]
    for g in grids:
        g[0, 0] = True
    classes = classes_from_grids(grids)
    a = render_token_sheet_png(classes)
    b = render_token_sheet_png(classes)
    assert a == b
    assert a.startswith(b"\x89PNG")


def test_labels_are_drawn(rng):
    # the label strip under each cell must contain ink
    g = np.ones((8, 8), dtype=bool)
    classes = classes_from_grids([g])
    layout = SheetLayout(columns=1, cell_px=64, label_px=12)
    img = np.asarray(render_token_sheet(classes, layout))
    assert (img[64:, :] < 128).any()


def test_layout_too_small_errors(rng):
    g = np.ones((8, 8), dtype=bool)
    classes = classes_from_grids([g])
    with pytest.raises(ValidationError):
        render_token_sheet(classes, SheetLayout(columns=1, cell_px=4, label_px=12))
    with pytest.raises(ValidationError):
        render_token_sheet(classes, SheetLayout(columns=1, cell_px=64, label_px=3))
    with pytest.raises(ValidationError):
        # "<token_0>" is 9 chars of 6px = 53px wide > 32
        render_token_sheet(classes, SheetLayout(columns=1, cell_px=32, label_px=12))


def test_empty_inventory_rejected():
    with pytest.raises(ValidationError):
        render_token_sheet([])


def test_png_is_loadable(rng):
    g = np.ones((8, 8), dtype=bool)
    classes = classes_from_grids([g])
    data = render_token_sheet_png(classes, SheetLayout(columns=1, cell_px=64, label_px=12))
    img = Image.open(io.BytesIO(data))
    assert img.mode == "L"
