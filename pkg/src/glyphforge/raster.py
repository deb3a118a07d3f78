"""Line-image loading, binarization, and per-column ink profiles.

Inputs are single pre-cropped lines of script, dark ink on a light
background, stored as 8-bit gray / RGB / RGBA PNGs. Everything here is a
pure function over immutable values; callers may parallelize across
images freely.
"""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ValidationError

log = logging.getLogger(__name__)

# ITU-R 601 luminance weights, applied in this order on float64.
LUMA_R, LUMA_G, LUMA_B = 0.299, 0.587, 0.114


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GrayRaster:
    """Row-major 8-bit luminance image."""

    width: int
    height: int
    pixels: np.ndarray  # shape (height, width), uint8

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError("zero-dimension-image", "raster dimensions must be >= 1")
        if self.pixels.shape != (self.height, self.width):
            raise ValidationError("bad-pixel-buffer", "pixel count must equal width x height")
        _frozen(self.pixels)

    @classmethod
    def from_array(cls, a: np.ndarray) -> "GrayRaster":
        a = np.ascontiguousarray(a, dtype=np.uint8)
        return cls(width=a.shape[1], height=a.shape[0], pixels=a)


@dataclass(frozen=True)
class BinaryRaster:
    """Binarized line image; True cells are ink/foreground."""

    width: int
    height: int
    ink: np.ndarray  # shape (height, width), bool

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValidationError("zero-dimension-image", "raster dimensions must be >= 1")
        if self.ink.shape != (self.height, self.width):
            raise ValidationError("bad-pixel-buffer", "ink count must equal width x height")
        _frozen(self.ink)

    @classmethod
    def from_array(cls, a: np.ndarray) -> "BinaryRaster":
        a = np.ascontiguousarray(a, dtype=bool)
        return cls(width=a.shape[1], height=a.shape[0], ink=a)

    def ink_count(self) -> int:
        return int(self.ink.sum())


@dataclass(frozen=True)
class ColumnProfile:
    """Per-column ink counts restricted to a vertical band of rows."""

    counts: np.ndarray  # shape (width,), int
    band_top_row: int  # inclusive
    band_bottom_row: int  # inclusive

    def __post_init__(self):
        _frozen(self.counts)


def load_line_image(path: str | Path) -> GrayRaster:
    """Load a PNG as a GrayRaster.

    Color images are reduced by round(0.299R + 0.587G + 0.114B); alpha is
    composited over white first. Only 8-bit gray (L), RGB, and RGBA PNGs
    are accepted.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if im.width < 1 or im.height < 1:
                raise ValidationError("zero-dimension-image", f"{path}: empty image")
            if mode == "L":
                return GrayRaster.from_array(np.asarray(im, dtype=np.uint8))
            if mode in ("RGB", "RGBA"):
                arr = np.asarray(im, dtype=np.float64)
                if mode == "RGBA":
                    alpha = arr[:, :, 3] / 255.0
                    rgb = arr[:, :, :3] * alpha[:, :, None] + 255.0 * (1.0 - alpha[:, :, None])
                else:
                    rgb = arr
                lum = LUMA_R * rgb[:, :, 0] + LUMA_G * rgb[:, :, 1] + LUMA_B * rgb[:, :, 2]
                return GrayRaster.from_array(np.rint(lum).astype(np.uint8))
            raise ValidationError("unsupported-format", f"{path}: unsupported image mode {mode!r}")
    except UnidentifiedImageError as exc:
        raise ValidationError("unsupported-format", f"{path}: not a readable image") from exc


def invert(img: GrayRaster) -> GrayRaster:
    """Flip polarity for light-on-dark sources."""
    return GrayRaster.from_array(255 - img.pixels)


def otsu_threshold(img: GrayRaster) -> int | None:
    """Threshold T maximizing between-class variance of {lum < T} vs {lum >= T}.

    Scans all 256 candidates; ties resolve to the smallest T. Returns None
    when every split is degenerate (uniform image).
    """
    hist = np.bincount(img.pixels.ravel(), minlength=256).astype(np.int64)
    total = int(hist.sum())
    best_t = None
    best_var = -1.0
    n0 = 0
    s0 = 0
    s_all = int(np.dot(hist, np.arange(256, dtype=np.int64)))
    for t in range(256):
        # classes for candidate t: {lum < t} and {lum >= t}
        if t > 0:
            n0 += int(hist[t - 1])
            s0 += (t - 1) * int(hist[t - 1])
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        mu0 = s0 / n0
        mu1 = (s_all - s0) / n1
        var = n0 * n1 * (mu0 - mu1) ** 2
        if var > best_var:
            best_var = var
            best_t = t
    return best_t


def binarize(img: GrayRaster, method: str | int = "otsu") -> BinaryRaster:
    """Binarize with ink = (luminance < threshold).

    `method` is "otsu" or a fixed threshold in 0..255. Otsu on a uniform
    image is degenerate and falls back to fixed 128 with a warning.
    """
    if method == "otsu":
        t = otsu_threshold(img)
        if t is None:
            log.warning("otsu is degenerate on a uniform image; falling back to fixed threshold 128")
            t = 128
    elif isinstance(method, int) and not isinstance(method, bool):
        if not 0 <= method <= 255:
            raise ValidationError("bad-threshold", "fixed threshold must be in 0..255")
        t = method
    else:
        raise ValidationError("bad-threshold", f"unknown binarize method {method!r}")
    return BinaryRaster.from_array(img.pixels < t)


def column_profile(r: BinaryRaster, band_top_frac: float, band_bottom_frac: float) -> ColumnProfile:
    """Count ink pixels per column within rows [floor(top*H), ceil(bottom*H) - 1]."""
    if not (0.0 <= band_top_frac < band_bottom_frac <= 1.0):
        raise ValidationError("bad-band", "need 0 <= band_top_frac < band_bottom_frac <= 1")
    top, bottom = band_rows(r.height, band_top_frac, band_bottom_frac)
    counts = r.ink[top : bottom + 1].sum(axis=0).astype(np.int64)
    return ColumnProfile(counts=counts, band_top_row=top, band_bottom_row=bottom)


def band_rows(height: int, band_top_frac: float, band_bottom_frac: float) -> tuple[int, int]:
    """Inclusive (top_row, bottom_row) of the core band for a raster height."""
    top = math.floor(band_top_frac * height)
    bottom = math.ceil(band_bottom_frac * height) - 1
    return top, bottom


def render_binary(r: BinaryRaster) -> GrayRaster:
    """0/255 rendering of a BinaryRaster (ink black on white)."""
    return GrayRaster.from_array(np.where(r.ink, 0, 255).astype(np.uint8))


def to_png_bytes(img: GrayRaster) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(img.pixels, mode="L").save(buf, format="PNG")
    return buf.getvalue()
