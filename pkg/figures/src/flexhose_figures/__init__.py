"""Offline figure scripts for flexhose CSV outputs.

The plotters live in their own modules and are meant to be invoked as
scripts (python -m flexhose_figures.plot_errors ...); only the CSV access
helpers are re-exported here.
"""

__version__ = "0.1.0"

from .csvdata import FigureInputError, chain_nodes, read_manifest, read_table
