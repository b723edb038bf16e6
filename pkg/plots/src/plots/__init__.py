"""Figure rendering for experiment metrics CSVs.

Reads the seven-column metrics schema produced by the experiment
pipeline and renders a grid of panels: one row per metric, one column
per family, one line per objective with |D| on a log-scaled x axis.
"""

from .render import COLUMNS, FigureSpec, SchemaError, UsageError, build_figure, render

__all__ = ["COLUMNS", "FigureSpec", "SchemaError", "UsageError",
           "build_figure", "render"]
