"""Figures from slowfast experiment artifacts (CSV + summary.json)."""

from .render import KINDS, FigureJob, RenderResult, SchemaError, read_table, render

__version__ = "0.1.0"
