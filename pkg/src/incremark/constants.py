"""Numeric tolerances shared across the package.

All comparisons against these are absolute. They are pinned here so every
module agrees on what counts as zero.
"""

# Witness validation: a counterexample must violate the property with at most
# this much slack when forward-evaluated, and sit inside the input box up to
# the same slack.
EPS_SAT = 1e-6

# Pivot elements smaller than this are treated as zero (singular).
EPS_PIVOT = 1e-8

# Row residual tolerance: |alpha(basic) - row(alpha)| must stay below this.
EPS_ROW = 1e-7

# Bound comparisons: violation and UNSAT-row margins.
EPS_BOUND = 1e-7

# Coefficients below this are dropped from tableau rows to keep them sparse.
COEF_EPS = 1e-12

# ReLU pair check: |alpha(post) - max(0, alpha(pre))| above this counts as a
# violation. Kept far below EPS_SAT so satisfied states survive the exact
# forward re-evaluation of their witness.
EPS_RELU = 1e-9

# LP iteration cap factor: cap = LP_ITER_FACTOR * (rows + cols).
LP_ITER_FACTOR = 50

# Outward padding applied to LP optima used as bounds, so simplex rounding
# error can never make a tightened bound exclude a feasible point.
EPS_LP = 1e-9
