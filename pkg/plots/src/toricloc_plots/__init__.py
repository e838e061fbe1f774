"""Rendering for toricloc simulation outputs."""

__version__ = "0.1.0"

from .recipes import KINDS, PlotRecipe, SchemaMismatchError, render

__all__ = ["KINDS", "PlotRecipe", "SchemaMismatchError", "render", "__version__"]
