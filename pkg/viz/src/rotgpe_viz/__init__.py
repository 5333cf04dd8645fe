from rotgpe_viz.formats import (ConvergenceTable, Series, Snapshot,
                                read_convergence, read_series, read_snapshot,
                                write_snapshot)
from rotgpe_viz.slopes import fit_slope, pair_rates

__version__ = "0.1.0"

__all__ = [
    "ConvergenceTable", "Series", "Snapshot",
    "read_convergence", "read_series", "read_snapshot", "write_snapshot",
    "fit_slope", "pair_rates",
]
