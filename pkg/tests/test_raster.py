import logging

import numpy as np
import pytest
from PIL import Image

from glyphforge.errors import ValidationError
from glyphforge.raster import (
    BinaryRaster,
    GrayRaster,
    binarize,
    column_profile,
    invert,
    load_line_image,
    otsu_threshold,
    render_binary,
    to_png_bytes,
)


def save_png(tmp_path, arr, mode, name="img.png"):
    path = tmp_path / name
    Image.fromarray(arr, mode=mode).save(path)
    return path


# --- independent oracles ---


def luminance_oracle(r, g, b, a=None):
    """Scalar per-pixel recomputation of the load conversion."""
    if a is not None:
        alpha = a / 255.0
        r = r * alpha + 255.0 * (1.0 - alpha)
        g = g * alpha + 255.0 * (1.0 - alpha)
        b = b * alpha + 255.0 * (1.0 - alpha)
    return int(np.rint(0.299 * r + 0.587 * g + 0.114 * b))


def otsu_oracle(pixels):
    """Exhaustive scan over all 256 candidate thresholds."""
    pixels = [int(p) for p in pixels]
    best_t, best_var = None, -1.0
    for t in range(256):
        lo = [p for p in pixels if p < t]
        hi = [p for p in pixels if p >= t]
        if not lo or not hi:
            continue
        mu0 = sum(lo) / len(lo)
        mu1 = sum(hi) / len(hi)
        var = len(lo) * len(hi) * (mu0 - mu1) ** 2
        if var > best_var:
            best_var, best_t = var, t
    return best_t


# --- load_line_image ---


def test_load_single_white_pixel(tmp_path):
    path = save_png(tmp_path, np.full((1, 1), 255, dtype=np.uint8), "L")
    img = load_line_image(path)
    assert (img.width, img.height) == (1, 1)
    assert img.pixels.tolist() == [[255]]


def test_load_gray_direct_readout(tmp_path):
    path = save_png(tmp_path, np.array([[0, 255]], dtype=np.uint8), "L")
    img = load_line_image(path)
    assert (img.width, img.height) == (2, 1)
    assert img.pixels.tolist() == [[0, 255]]


def test_load_rgb_matches_scalar_luminance_oracle(tmp_path, rng):
    arr = rng.integers(0, 256, size=(11, 17, 3), dtype=np.uint8)
    img = load_line_image(save_png(tmp_path, arr, "RGB"))
    for y in range(11):
        for x in range(17):
            r, g, b = (int(v) for v in arr[y, x])
            assert img.pixels[y, x] == luminance_oracle(r, g, b)


def test_load_rgba_composites_over_white(tmp_path, rng):
    arr = rng.integers(0, 256, size=(6, 9, 4), dtype=np.uint8)
    img = load_line_image(save_png(tmp_path, arr, "RGBA"))
    for y in range(6):
        for x in range(9):
            r, g, b, a = (int(v) for v in arr[y, x])
            assert img.pixels[y, x] == luminance_oracle(r, g, b, a)


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_line_image(tmp_path / "nope.png")


def test_load_unsupported_mode(tmp_path):
    path = save_png(tmp_path, np.zeros((2, 2), dtype=np.uint8), "P")
    with pytest.raises(ValidationError) as exc:
        load_line_image(path)
    assert exc.value.reason == "unsupported-format"


def test_load_non_image(tmp_path):
    path = tmp_path / "junk.png"
    path.write_bytes(b"this is not a png")
    with pytest.raises(ValidationError) as exc:
        load_line_image(path)
    assert exc.value.reason == "unsupported-format"


# --- binarize ---


def test_binarize_all_background_fixed():
    img = GrayRaster.from_array(np.full((3, 4), 255, dtype=np.uint8))
    assert not binarize(img, 128).ink.any()


def test_binarize_bimodal_otsu():
    arr = np.array([[0, 255, 0], [255, 255, 0]], dtype=np.uint8)
    out = binarize(GrayRaster.from_array(arr), "otsu")
    assert out.ink.tolist() == (arr == 0).tolist()


def test_otsu_matches_exhaustive_oracle(rng):
    for _ in range(25):
        arr = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        img = GrayRaster.from_array(arr)
        assert otsu_threshold(img) == otsu_oracle(arr.ravel())


def test_otsu_uniform_falls_back_to_128(caplog):
    img = GrayRaster.from_array(np.full((4, 4), 7, dtype=np.uint8))
    with caplog.at_level(logging.WARNING):
        out = binarize(img, "otsu")
    assert out.ink.all()  # 7 < 128
    assert any("degenerate" in m for m in caplog.messages)


def test_binarize_bad_method():
    img = GrayRaster.from_array(np.zeros((1, 1), dtype=np.uint8))
    with pytest.raises(ValidationError):
        binarize(img, 256)
    with pytest.raises(ValidationError):
        binarize(img, "sauvola")


def test_binarize_idempotent_on_rendered_binary(rng):
    for method in ("otsu", 128):
        for _ in range(10):
            ink = rng.random((9, 13)) < 0.4
            b = BinaryRaster.from_array(ink)
            again = binarize(render_binary(b), method)
            assert (again.ink == b.ink).all()


def test_invert_flips_polarity():
    img = GrayRaster.from_array(np.array([[0, 200]], dtype=np.uint8))
    assert invert(img).pixels.tolist() == [[255, 55]]


# --- column_profile ---


def test_profile_all_background():
    r = BinaryRaster.from_array(np.zeros((5, 7), dtype=bool))
    prof = column_profile(r, 0.0, 1.0)
    assert prof.counts.tolist() == [0] * 7
    assert (prof.band_top_row, prof.band_bottom_row) == (0, 4)


def test_profile_single_full_column():
    ink = np.zeros((8, 8), dtype=bool)
    ink[:, 3] = True
    prof = column_profile(BinaryRaster.from_array(ink), 0.0, 1.0)
    expected = [0] * 8
    expected[3] = 8
    assert prof.counts.tolist() == expected


def test_profile_matches_double_loop_oracle(rng):
    ink = rng.random((32, 32)) < 0.3
    r = BinaryRaster.from_array(ink)
    prof = column_profile(r, 0.15, 0.85)
    top, bottom = prof.band_top_row, prof.band_bottom_row
    for x in range(32):
        count = 0
        for y in range(32):
            if top <= y <= bottom and ink[y, x]:
                count += 1
        assert prof.counts[x] == count


def test_profile_full_band_sums_to_ink_count(rng):
    for _ in range(10):
        ink = rng.random((10, 20)) < 0.5
        r = BinaryRaster.from_array(ink)
        prof = column_profile(r, 0.0, 1.0)
        assert int(prof.counts.sum()) == r.ink_count()


def test_profile_invalid_band():
    r = BinaryRaster.from_array(np.zeros((4, 4), dtype=bool))
    with pytest.raises(ValidationError):
        column_profile(r, 0.9, 0.1)


def test_png_round_trip_is_pure(tmp_path, rng):
    arr = rng.integers(0, 256, size=(8, 8), dtype=np.uint8)
    img = GrayRaster.from_array(arr)
    assert to_png_bytes(img) == to_png_bytes(GrayRaster.from_array(arr.copy()))
    path = tmp_path / "round.png"
    path.write_bytes(to_png_bytes(img))
    assert (load_line_image(path).pixels == arr).all()
