"""Reversible data hiding in baseline grayscale JPEG files, split across
the quantized DCT coefficients and the Huffman code assignment."""

__version__ = "0.1.0"

from .errors import MdrdhError  # noqa: E402
from .pipeline import MODES, embed, embed_report, extract  # noqa: E402

__all__ = ["MODES", "MdrdhError", "embed", "embed_report", "extract", "__version__"]
