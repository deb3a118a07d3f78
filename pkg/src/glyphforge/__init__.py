"""glyphforge: visual glyph tokenization, puzzle datasets, and model evaluation."""

__version__ = "0.1.0"

from .errors import BackendError, GlyphforgeError, ValidationError

__all__ = ["BackendError", "GlyphforgeError", "ValidationError", "__version__"]
