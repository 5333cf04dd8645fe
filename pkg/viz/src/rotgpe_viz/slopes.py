"""Convergence-rate extraction from (h, error) samples."""

import numpy as np


def fit_slope(h, err):
    """Least-squares slope of log(err) against log(h).

    This is the single number quoted per error column in convergence plots;
    exact power-law data err = C h^p returns p to roundoff.
    """
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.shape != err.shape or h.ndim != 1 or len(h) < 2:
        raise ValueError("need two or more (h, err) samples")
    if np.any(h <= 0) or np.any(err <= 0):
        raise ValueError("h and err must be positive for a log-log fit")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def pair_rates(h, err):
    """Rates between consecutive rows: log(e_i/e_{i+1}) / log(h_i/h_{i+1}).

    Matches the solver's CSV rate columns (log2 ratios for exact halvings);
    the first entry is nan since the first row has no predecessor.
    """
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    if h.shape != err.shape or h.ndim != 1 or len(h) < 2:
        raise ValueError("need two or more (h, err) samples")
    out = np.full(len(h), np.nan)
    out[1:] = np.log(err[:-1] / err[1:]) / np.log(h[:-1] / h[1:])
    return out
