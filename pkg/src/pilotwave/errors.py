"""Exception types shared across the package."""


class PilotwaveError(Exception):
    """Base class for all package errors."""


class ConfigError(PilotwaveError, ValueError):
    """Invalid configuration: bad grid parameters, time steps, unknown keys."""


class UsageError(PilotwaveError, ValueError):
    """Operation called with incompatible arguments (mismatched grids, times, masses)."""


class InputError(PilotwaveError, ValueError):
    """Input data violates a precondition (NaN fields, non-finite values)."""


class ResolutionError(ConfigError):
    """Requested state cannot be represented on the grid (too few points per feature)."""


class PlacementError(ConfigError):
    """Initial state carries non-negligible mass near the box boundary."""


class InconsistencyError(PilotwaveError, RuntimeError):
    """Numerical result disagrees with a supplied analytic value beyond tolerance."""


class SamplingError(PilotwaveError, RuntimeError):
    """Density cannot be sampled (all mass below the support floor)."""


class MonitorAbort(PilotwaveError, RuntimeError):
    """A run-time validity monitor tripped; the run result is not trustworthy."""


class BoundaryMassExceeded(MonitorAbort):
    """Mass outside the inner half-box exceeded the tolerance budget."""


class WaveBlowUp(MonitorAbort):
    """H1 norm grew past the blow-up threshold; the run horizon exceeded validity."""


class TrajectoryEscape(MonitorAbort):
    """More than the allowed fraction of trajectory samples left the box."""
