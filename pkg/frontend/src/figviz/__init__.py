"""Figure rendering for exported cdf-grid and feasibility-grid CSVs."""

from .render import RenderError, load_curve, load_table, render, render_spec_file
from .specs import standard_specs

__version__ = "0.1.0"
