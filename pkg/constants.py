"""
Library-wide constants.

This module defines the numerical tolerances, defaults and exit codes used
throughout dissipath to avoid magic numbers in the numerical modules.
"""

from typing import Sequence

# Symmetry and factorization checks
SYMMETRY_RTOL = 1e-12  # Relative asymmetry allowed in a Hessian or metric matrix
FACTOR_RTOL = 1e-10  # Relative error allowed when a factor is multiplied out

# Critical points and transversality
GRAD_TOL_SCALE = 1e-10  # tol_grad = GRAD_TOL_SCALE * (1 + |x - x_eq|)
TRANSVERSAL_TOL_SCALE = 1e-8  # tol_transversal = scale * (1 + |grad|)
RANK_RTOL = 1e-8  # smallest / largest singular value below this is rank deficient

# Finite differences
FD_STEP_SCALE = 1e-6  # h = FD_STEP_SCALE * (1 + |p_j|)

# Gram-Schmidt residual under which a tangent vector is dropped from W0
GRAM_SCHMIDT_DROP = 1e-10

# Sign tests for dissipation
SIGN_TOL = 1e-12

# f-divergences
F_DIVERGENCE_UPPER_FACTOR = 1e3  # domain is 0 < x_i <= factor * x_eq_i
CONVEXITY_GRID_POINTS = 121
RATE_MATRIX_TOL = 1e-12

# Monotone trees
MONOTONE_FLOOR = 1e-6  # delta_mono
DEFAULT_TREE_GRID = 101
NODE_MATCH_TOL = 1e-9

# Reduced dynamics
RESIDUAL_RTOL = 1e-9
RK4_MONOTONE_FACTOR = 10.0  # allowance = factor * dt**5 per step

# Counterexample harness
DEFAULT_SEED = 0
DEFAULT_TRIALS = 10_000
DEFAULT_TILTS: Sequence[float] = (0.2, 0.1, 0.05, 0.025)
DEFAULT_RANK_ONE_A = 2.0

# Output
CSV_SIGNIFICANT_DIGITS = 17
SEPARATOR_WIDTH = 80  # Width of separator lines in console output

# CLI exit codes
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_VALIDATION = 2
EXIT_PARSE = 3
EXIT_IO = 4
