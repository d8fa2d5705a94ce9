"""Figure scripts for the qmartin CSV outputs.

Two standalone entry points render the reference panels: convergence of
the stopping-time estimator toward 1, and infima CDFs against the
exponential bound.  Figures are pure functions of the CSV content (no
timestamps or random ids embedded), so regenerating from the same data
yields byte-identical files.
"""

__version__ = "0.1.0"
