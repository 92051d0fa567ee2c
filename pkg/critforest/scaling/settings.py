import logging
import os
from pathlib import Path

LOG_LEVEL = logging.INFO

# Stable density quadrature. The hot value is used wherever g feeds Monte Carlo loops.
G_ABS_TOL = 1e-10
G_HOT_ABS_TOL = 1e-8
G_TRUNCATION_TAIL = 1e-14
G_MAX_SUBDIVISIONS = 4000

# Spline of log g used by the drift hot path
G_GRID_RANGE = (-40.0, 40.0)
G_GRID_STEP = 0.01

# Drift integrals J_k are trapezoid sums in log variables, halved until stable
DRIFT_LOG_STEP = 1 / 16
DRIFT_MAX_HALVINGS = 5
DRIFT_U_MAX = 40.0

ALPHA_TABLE_B_MAX = 8.0
ALPHA_TABLE_B_STEP = 0.02
ALPHA_TABLE_LAMBDA = (-12.0, 6.0)
ALPHA_TABLE_LAMBDA_STEP = 0.05
ALPHA_TABLE_TOLERANCE = 1e-5

# Exact dynamic-programming table is quadratic in memory and cubic in build time
TABLE_CAPACITY = 5000

REJECTION_BUDGET = 10000

# Log-mass below the running total at which truncated sums stop (e^-40 ~ 4e-18)
LOG_SUM_CUTOFF = 40.0
KERNEL_TRUNCATION = 1e-16

# G(N,p) switches from per-slot coin flips to binomial count + uniform subset above this many slots
SLOT_LIMIT = 5_000_000

MONOTONE_WINDOW_EXPONENT = 3 / 5

DEFAULT_DT = 1e-3

THREADS = int(os.environ.get('CRITFOREST_THREADS', '1'))
CACHE_DIR = Path(os.environ.get('CRITFOREST_CACHE_DIR', Path.home() / '.cache' / 'critforest'))

SCHEMA_VERSION = 1

# Settings that can be changed at run time with `--set NAME=VALUE`
RUNTIME_WHITELIST = [
    'LOG_LEVEL',
    'G_ABS_TOL',
    'G_HOT_ABS_TOL',
    'G_TRUNCATION_TAIL',
    'G_MAX_SUBDIVISIONS',
    'DRIFT_LOG_STEP',
    'TABLE_CAPACITY',
    'REJECTION_BUDGET',
    'KERNEL_TRUNCATION',
    'MONOTONE_WINDOW_EXPONENT',
    'DEFAULT_DT',
    'THREADS',
    'ALPHA_TABLE_LAMBDA',
]

# Check every sampled forest with union-find before returning it (switched on by the test suite)
VALIDATE_SAMPLES = False
