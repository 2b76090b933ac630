"""Figure rendering for walker trace CSVs."""

from .render import MissingColumnError, ds_intervals, load_trace, render
from .spec import FIGURE_KINDS, FigureSpec, SpecError, load_spec, parse_spec_text

__version__ = "0.1.0"
