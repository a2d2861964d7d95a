"""Shared configuration for the weak-measurement simulator.

Keep global numeric settings here so every module imports the same
tolerances and defaults instead of hardcoding them in several files.
"""

# Noiseless algebra at dimension <= 2^13
ALGEBRA_TOL = 1e-12

# Compiled optics accumulate ~20 element products per module
OPTICS_TOL = 1e-10

# Post-selection weight below which pointer statistics are undefined
ZERO_POSTSELECTION = 1e-15

# |<psi_f|psi_i>| at or below which the weak value is not defined
ORTHOGONAL_OVERLAP = 1e-12

# Sweep rows closer than this to orthogonal post-selection are flagged
SWEEP_DIVERGENCE_OVERLAP = 1e-6

# Joint dimension 2^(N+1) <= 8192
MAX_MODULES = 12

# Fit of the joint expectation in gamma
FIT_RESIDUAL_TOL = 1e-9
FIT_GRID = (0.005, 0.05)

# Sweep defaults (degrees)
THETA_START_DEG = 0.0
THETA_STOP_DEG = 180.0
THETA_STEP_DEG = 5.0

# Sampled-mode defaults
DEFAULT_SHOTS = 200_000
DEFAULT_SEED = 0
DEFAULT_RESAMPLES = 200
MIN_SHOTS = 10_000
MIN_RESAMPLES = 100

# Environment variables
WORKERS_ENV = 'SWM_WORKERS'
DEVICE_ENV = 'SWM_DEVICE'
