"""Publication-style figures from laboratory CSV/JSON artifacts.

Rendering never mutates inputs and is byte-stable for a fixed style
seed; the package consumes only the documented artifact formats.
"""

from acplots.render import FIGURE_KINDS, FigureSpec, ParseError, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "ParseError", "render"]

__version__ = "0.1.0"
