"""Exception hierarchy for the gridbench toolkit.

Every error raised on purpose by this package derives from GridBenchError so
callers can catch one base class at the CLI boundary.
"""


class GridBenchError(Exception):
    """Base class for all gridbench errors."""


# --- series / ingestion ---

class GapDetected(GridBenchError):
    """An hour is missing from a series that must be strictly hourly."""


class NonMonotonic(GridBenchError):
    """Timestamps decrease somewhere in the input."""


class BadValue(GridBenchError):
    """A value failed to parse or is non-finite."""


class GapTooLong(GridBenchError):
    """A missing-hour run exceeds the interpolation cap."""


class TooShort(GridBenchError):
    """Series is too short for the requested operation."""


class DegenerateSeries(GridBenchError):
    """Series has (near-)zero variance; normalization is undefined."""


# --- autodiff / models ---

class ShapeMismatch(GridBenchError):
    """Operand shapes do not agree."""


class IndexOutOfRange(GridBenchError):
    """An embedding index falls outside the table."""


class BadKernel(GridBenchError):
    """Moving-average kernel must be odd and >= 1."""


class NonFinite(GridBenchError):
    """A NaN or Inf appeared where finite values are required."""


class BadConfig(GridBenchError):
    """Model or run configuration violates an invariant."""


class BadDim(GridBenchError):
    """A dimension constraint (divisibility, positivity) is violated."""


# --- fusion ---

class StrategyMismatch(GridBenchError):
    """Fusion strategy does not match the model architecture or config."""


class CovariateMismatch(GridBenchError):
    """Provided weather block disagrees with the fusion spec."""


# --- training ---

class EmptySplit(GridBenchError):
    """A train or validation split contains no samples."""


class BadStep(GridBenchError):
    """Scheduler step index outside [0, total_steps)."""


# --- evaluation ---

class DegenerateActuals(GridBenchError):
    """Actuals have non-positive mean; percentage metrics undefined."""


class NearZeroActual(GridBenchError):
    """An actual value is (near) zero; MAPE unstable, use nMAE."""


class MissingCell(GridBenchError):
    """A (grid, W, model) cell required for aggregation is absent."""


class KeyMismatch(GridBenchError):
    """Base and augmented tables do not share the same keys."""


class NoFolds(GridBenchError):
    """Backtest window admits no complete fold."""


# --- synth ---

class ConfigInvariantViolated(GridBenchError):
    """Generated series violates a stated signal-range invariant."""
