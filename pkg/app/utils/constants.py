"""
Application-wide constants for the Coloring Dynamics Lab.

Defines the enumerations, numeric thresholds and report vocabularies used
across services, the CLI and the HTTP routers.  Tunable defaults live in
``app.config.Settings``; the values here are fixed by the algorithms.
"""

from typing import Final

# ---------------------------------------------------------------------------
# Experiment commands (CLI subcommands and API endpoints)
# ---------------------------------------------------------------------------

COMMANDS: Final[tuple[str, ...]] = (
    "gen",
    "levels",
    "sample",
    "couple",
    "oracle",
    "uniformity",
    "path",
    "struct",
)

# ---------------------------------------------------------------------------
# Generator families
# ---------------------------------------------------------------------------

GENERATORS: Final[tuple[str, ...]] = (
    "grid",
    "tree",
    "tri",
    "path",
    "cycle",
    "star",
    "complete",
    "bipartite",
)

# ---------------------------------------------------------------------------
# Chain types and set-dynamics modes
# ---------------------------------------------------------------------------

CHAIN_GLAUBER: Final[str] = "glauber"
CHAIN_SET_DYNAMICS: Final[str] = "set-dynamics"
CHAIN_TYPES: Final[tuple[str, ...]] = (CHAIN_GLAUBER, CHAIN_SET_DYNAMICS)

MODE_RANDOM: Final[str] = "random"
MODE_SWEEP: Final[str] = "sweep-if-independent"
ROUND_MODES: Final[tuple[str, ...]] = (MODE_RANDOM, MODE_SWEEP)

# ---------------------------------------------------------------------------
# Report formats
# ---------------------------------------------------------------------------

FORMATS: Final[tuple[str, ...]] = ("csv", "json", "xlsx")

# ---------------------------------------------------------------------------
# Numerical slack
# ---------------------------------------------------------------------------

ROW_SUM_SLACK: Final[float] = 1e-12      # transition-matrix rows
WEIGHT_SUM_SLACK: Final[float] = 1e-12   # incremental vs full-scan w(D)
DISTRIBUTION_SLACK: Final[float] = 1e-9  # exact_tv normalisation check
SPECTRAL_SANDWICH_SLACK: Final[float] = 1e-6
EPSILON_HALVINGS: Final[int] = 12        # fit_levels retries before giving up

# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------

DISCONNECTED: Final[str] = "disconnected"
DEFAULT_MIXING_THRESHOLD: Final[float] = 0.25

# ---------------------------------------------------------------------------
# Uniformity thresholds: multiples of k·exp(-Δ/k)
# ---------------------------------------------------------------------------

UNIFORMITY_FACTORS: Final[dict[str, float]] = {
    "half": 0.5,
    "nine_tenths": 0.9,
    "eight_tenths": 0.8,
}

MIN_CONTRACTION_SAMPLES: Final[int] = 10

# ---------------------------------------------------------------------------
# Path experiments
# ---------------------------------------------------------------------------

PATH_EXHAUSTIVE_LIMIT: Final[int] = 10_000  # |Ω| up to which every colouring is walked
PATH_ALL_PAIRS_LIMIT: Final[int] = 200      # |Ω| up to which every pair is composed

# ---------------------------------------------------------------------------
# Report status labels (run registry)
# ---------------------------------------------------------------------------

STATUS_PASSED: Final[str] = "PASSED"
STATUS_FAILED: Final[str] = "FAILED"
STATUS_ERROR: Final[str] = "ERROR"

EXIT_OK: Final[int] = 0
EXIT_VERIFICATION_FAILED: Final[int] = 1
EXIT_ERROR: Final[int] = 2
