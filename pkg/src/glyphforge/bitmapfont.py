"""Embedded 5x7 bitmap font for token-sheet labels.

Rendering from these fixed patterns (instead of a system font) keeps
sheet PNGs bitwise stable across platforms. Unknown characters render as
a filled box.
"""
from __future__ import annotations

import numpy as np

CHAR_W = 5
CHAR_H = 7
SPACING = 1  # blank columns between characters

_RAW = {
    "0": (".XXX.", "X...X", "X..XX", "X.X.X", "XX..X", "X...X", ".XXX."),
    "1": ("..X..", ".XX..", "..X..", "..X..", "..X..", "..X..", ".XXX."),
    "2": (".XXX.", "X...X", "....X", "...X.", "..X..", ".X...", "XXXXX"),
    "3": ("XXXXX", "...X.", "..X..", "...X.", "....X", "X...X", ".XXX."),
    "4": ("...X.", "..XX.", ".X.X.", "X..X.", "XXXXX", "...X.", "...X."),
    "5": ("XXXXX", "X....", "XXXX.", "....X", "....X", "X...X", ".XXX."),
    "6": ("..XX.", ".X...", "X....", "XXXX.", "X...X", "X...X", ".XXX."),
    "7": ("XXXXX", "....X", "...X.", "..X..", ".X...", ".X...", ".X..."),
    "8": (".XXX.", "X...X", "X...X", ".XXX.", "X...X", "X...X", ".XXX."),
    "9": (".XXX.", "X...X", "X...X", ".XXXX", "....X", "...X.", ".XX.."),
    "a": (".....", ".....", ".XXX.", "....X", ".XXXX", "X...X", ".XXXX"),
    "b": ("X....", "X....", "X.XX.", "XX..X", "X...X", "X...X", "XXXX."),
    "c": (".....", ".....", ".XXX.", "X....", "X....", "X...X", ".XXX."),
    "d": ("....X", "....X", ".XX.X", "X..XX", "X...X", "X...X", ".XXXX"),
    "e": (".....", ".....", ".XXX.", "X...X", "XXXXX", "X....", ".XXX."),
    "f": ("..XX.", ".X..X", ".X...", "XXX..", ".X...", ".X...", ".X..."),
    "g": (".....", ".XXXX", "X...X", "X...X", ".XXXX", "....X", ".XXX."),
    "h": ("X....", "X....", "X.XX.", "XX..X", "X...X", "X...X", "X...X"),
    "i": ("..X..", ".....", ".XX..", "..X..", "..X..", "..X..", ".XXX."),
    "j": ("...X.", ".....", "..XX.", "...X.", "...X.", "X..X.", ".XX.."),
    "k": ("X....", "X....", "X..X.", "X.X..", "XX...", "X.X..", "X..X."),
    "l": (".XX..", "..X..", "..X..", "..X..", "..X..", "..X..", ".XXX."),
    "m": (".....", ".....", "XX.X.", "X.X.X", "X.X.X", "X.X.X", "X.X.X"),
    "n": (".....", ".....", "X.XX.", "XX..X", "X...X", "X...X", "X...X"),
    "o": (".....", ".....", ".XXX.", "X...X", "X...X", "X...X", ".XXX."),
    "p": (".....", ".....", "XXXX.", "X...X", "XXXX.", "X....", "X...."),
    "q": (".....", ".....", ".XXXX", "X...X", ".XXXX", "....X", "....X"),
    "r": (".....", ".....", "X.XX.", "XX..X", "X....", "X....", "X...."),
    "s": (".....", ".....", ".XXXX", "X....", ".XXX.", "....X", "XXXX."),
    "t": (".X...", ".X...", "XXX..", ".X...", ".X...", ".X..X", "..XX."),
    "u": (".....", ".....", "X...X", "X...X", "X...X", "X..XX", ".XX.X"),
    "v": (".....", ".....", "X...X", "X...X", "X...X", ".X.X.", "..X.."),
    "w": (".....", ".....", "X...X", "X...X", "X.X.X", "X.X.X", ".X.X."),
    "x": (".....", ".....", "X...X", ".X.X.", "..X..", ".X.X.", "X...X"),
    "y": (".....", ".....", "X...X", "X...X", ".XXXX", "....X", ".XXX."),
    "z": (".....", ".....", "XXXXX", "...X.", "..X..", ".X...", "XXXXX"),
    "<": ("...X.", "..X..", ".X...", "X....", ".X...", "..X..", "...X."),
    ">": (".X...", "..X..", "...X.", "....X", "...X.", "..X..", ".X..."),
    "_": (".....", ".....", ".....", ".....", ".....", ".....", "XXXXX"),
    ":": (".....", "..X..", "..X..", ".....", "..X..", "..X..", "....."),
    "-": (".....", ".....", ".....", "XXXXX", ".....", ".....", "....."),
    ".": (".....", ".....", ".....", ".....", ".....", "..XX.", "..XX."),
    "/": ("....X", "...X.", "...X.", "..X..", ".X...", ".X...", "X...."),
    "%": ("XX..X", "XX.X.", "..X..", "..X..", "..X..", ".X.XX", "X..XX"),
    " ": (".....", ".....", ".....", ".....", ".....", ".....", "....."),
}

_FALLBACK = np.ones((CHAR_H, CHAR_W), dtype=bool)

GLYPHS: dict[str, np.ndarray] = {
    ch: np.array([[c == "X" for c in row] for row in rows], dtype=bool) for ch, rows in _RAW.items()
}


def text_width(text: str) -> int:
    if not text:
        return 0
    return len(text) * (CHAR_W + SPACING) - SPACING


def render_text(text: str) -> np.ndarray:
    """Render text to a (CHAR_H, text_width) boolean bitmap, True = ink."""
    out = np.zeros((CHAR_H, max(1, text_width(text))), dtype=bool)
    x = 0
    for ch in text:
        out[:, x : x + CHAR_W] = GLYPHS.get(ch, _FALLBACK)
        x += CHAR_W + SPACING
    return out
