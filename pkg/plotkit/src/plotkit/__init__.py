"""Render asgdlab experiment CSVs into figures."""

from .csvdata import CsvFormatError, ResultTable, read_table
from .render import FigureSpec, load_spec, render

__version__ = "0.1.0"
