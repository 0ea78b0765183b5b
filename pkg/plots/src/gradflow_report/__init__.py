"""Headless figure generation from gradflow trace CSVs and GFZF1 snapshots."""

__version__ = "0.1.0"

from .figures import FIGURE_KINDS, FigureJob, render_report
from .formats import SchemaError, read_convergence, read_snapshot, read_trace

__all__ = [
    "__version__",
    "FIGURE_KINDS",
    "FigureJob",
    "render_report",
    "SchemaError",
    "read_convergence",
    "read_snapshot",
    "read_trace",
]
