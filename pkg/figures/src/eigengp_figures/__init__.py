"""Plots and tables built from eigengp CSV outputs.

This package reads only the documented CSV schemas (grid-mode
replicates.csv and results.csv); it has no in-process dependency on the
library that produced them.
"""

__version__ = "0.1.0"


class SchemaError(ValueError):
    """The input CSV does not match the expected schema."""


from .ribbons import GridSpec, RibbonSeries, band_area, load_grid_csv, plot_ribbons
from .tables import LAYOUTS, load_results_csv, render_table
