"""Strang-split spectral propagation for the oscillating and averaged systems.

Units: hbar = m = 1, Hamiltonian -0.5*Laplacian + V.  One Strang step is
half kinetic / full potential phase / half kinetic; the potential phase for
the fast-oscillating system uses the exact time integral of the temporal
factor over the step, so the oscillation is never aliased regardless of dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import (
    BoundaryMassExceeded,
    ConfigError,
    PlacementError,
    ResolutionError,
    UsageError,
    WaveBlowUp,
)
from .grid import ComplexField, Grid, boundary_mass_fraction, norms, spectral_laplacian
from .potential import StaticPotential, TimePeriodicPotential, evaluate

__all__ = [
    "WaveFunction",
    "SolverConfig",
    "OscillatingSystem",
    "EffectiveSystem",
    "initialize",
    "gaussian_packet",
    "wkb_state",
    "step_oscillating",
    "step_effective",
    "propagate",
    "h1_distance",
    "gronwall_integrand",
]

BOUNDARY_MASS_TOL = 1e-8
MIN_POINTS_PER_WIDTH = 8


@dataclass(frozen=True)
class WaveFunction:
    """Complex field snapshot with its time stamp."""

    field: ComplexField
    time: float

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values


@dataclass(frozen=True)
class SolverConfig:
    """Time step and fast-scale resolution rule.

    For the oscillating system the step must satisfy
    |dt| <= eps / steps_per_fast_period so the unit-period oscillation is
    sampled at least that many times per fast period.  A negative dt steps
    backwards in time (used by reversibility checks); propagation over a
    horizon requires dt > 0.
    """

    dt: float
    steps_per_fast_period: int = 32

    def __post_init__(self) -> None:
        if self.dt == 0 or not np.isfinite(self.dt):
            raise ConfigError(f"dt must be a nonzero finite step, got {self.dt}")
        if self.steps_per_fast_period < 32:
            raise ConfigError(
                f"steps_per_fast_period must be >= 32, got {self.steps_per_fast_period}"
            )

    def check_fast_period(self, eps: float) -> None:
        limit = eps / self.steps_per_fast_period
        if abs(self.dt) > limit * (1.0 + 1e-12):
            raise ConfigError(
                f"dt={self.dt} violates the fast-period rule: need "
                f"|dt| <= eps/steps_per_fast_period = {limit}"
            )


@dataclass(frozen=True)
class OscillatingSystem:
    potential: TimePeriodicPotential
    eps: float

    def __post_init__(self) -> None:
        if not (self.eps > 0):
            raise ConfigError(f"eps must be positive, got {self.eps}")


@dataclass(frozen=True)
class EffectiveSystem:
    potential: StaticPotential


# ---------------------------------------------------------------------------
# initial states


def gaussian_packet(
    grid: Grid,
    center: Sequence[float] | float = 0.0,
    width: float = 1.0,
    momentum: Sequence[float] | float = 0.0,
) -> WaveFunction:
    """Normalized Gaussian (2 pi w^2)^(-N/4) exp(-|x-c|^2/4w^2) exp(i k.x)."""
    c = _as_vector(grid, center, "center")
    k0 = _as_vector(grid, momentum, "momentum")
    if not (width > 0):
        raise ConfigError(f"width must be positive, got {width}")
    if width < MIN_POINTS_PER_WIDTH * grid.dx:
        raise ResolutionError(
            f"packet width {width} spans fewer than {MIN_POINTS_PER_WIDTH} grid "
            f"points (dx={grid.dx}); refine the grid"
        )
    mesh = grid.meshgrid()
    r2 = sum((m - ci) ** 2 for m, ci in zip(mesh, c))
    phase = sum(ki * m for m, ki in zip(mesh, k0))
    amp = (2.0 * np.pi * width**2) ** (-grid.dim / 4.0)
    values = amp * np.exp(-r2 / (4.0 * width**2)) * np.exp(1j * phase)
    return _finalize_initial(grid, values)


def wkb_state(
    grid: Grid,
    sqrt_density: Callable[[list[np.ndarray]], np.ndarray],
    phase: Callable[[list[np.ndarray]], np.ndarray] | None = None,
) -> WaveFunction:
    """WKB state sqrt(rho0)(x) * exp(i S0(x)) from amplitude/phase callables."""
    mesh = grid.meshgrid()
    amp = np.asarray(sqrt_density(mesh), dtype=np.float64)
    if (amp < 0).any():
        raise ConfigError("sqrt_density must be nonnegative")
    s0 = np.zeros(grid.shape) if phase is None else np.asarray(phase(mesh), dtype=np.float64)
    return _finalize_initial(grid, amp * np.exp(1j * s0))


def initialize(kind: str, params: dict, grid: Grid) -> WaveFunction:
    """Dispatch on state kind; see gaussian_packet and wkb_state."""
    if kind in ("gaussian", "gaussian_packet"):
        return gaussian_packet(grid, **params)
    if kind == "wkb":
        return wkb_state(grid, **params)
    raise ConfigError(f"unknown initial state kind '{kind}'")


def _finalize_initial(grid: Grid, values: np.ndarray) -> WaveFunction:
    mass = float(np.sum(np.abs(values) ** 2) * grid.cell_volume)
    if mass <= 0 or not np.isfinite(mass):
        raise ConfigError("initial state has no usable mass")
    field = ComplexField(grid, values / math.sqrt(mass))
    bmass = boundary_mass_fraction(field)
    if bmass > BOUNDARY_MASS_TOL:
        raise PlacementError(
            f"initial state keeps {bmass:.3e} of its mass outside |x| <= L/2 "
            f"(budget {BOUNDARY_MASS_TOL}); enlarge the box or recentre"
        )
    return WaveFunction(field=field, time=0.0)


def _as_vector(grid: Grid, value, name: str) -> np.ndarray:
    v = np.atleast_1d(np.asarray(value, dtype=np.float64))
    if v.size == 1 and grid.dim > 1:
        v = np.full(grid.dim, float(v[0]))
    if v.shape != (grid.dim,):
        raise ConfigError(f"{name} must have {grid.dim} components, got shape {v.shape}")
    return v


# ---------------------------------------------------------------------------
# stepping


def step_oscillating(
    psi: WaveFunction,
    V: TimePeriodicPotential,
    eps: float,
    cfg: SolverConfig,
    *,
    enforce_resolution: bool = True,
) -> WaveFunction:
    """One Strang step of i dpsi/dt = -0.5 Lap psi + a(t/eps) W(x) psi.

    The potential phase uses the exact integral of a(s/eps) over the step.
    ``enforce_resolution=False`` lifts the fast-period rule for diagnostic
    single steps (e.g. stepping across exactly one fast period).
    """
    if enforce_resolution:
        cfg.check_fast_period(eps)
    w = V.spatial_values(psi.grid)
    scalar = V.temporal_integral(psi.time, psi.time + cfg.dt, eps)
    return _strang_step(psi, w * scalar, cfg.dt)


def step_effective(psi: WaveFunction, Vstar: StaticPotential, cfg: SolverConfig) -> WaveFunction:
    """One Strang step with the static potential phase V*(x) * dt."""
    if Vstar.grid != psi.grid:
        raise UsageError("potential grid does not match wave function grid")
    return _strang_step(psi, Vstar.values * cfg.dt, cfg.dt)


def _strang_step(psi: WaveFunction, potential_phase: np.ndarray, dt: float) -> WaveFunction:
    kin = np.exp(-1j * psi.grid.k_squared() * dt / 4.0)
    v = np.fft.ifftn(kin * np.fft.fftn(psi.values))
    v = np.exp(-1j * potential_phase) * v
    v = np.fft.ifftn(kin * np.fft.fftn(v))
    return WaveFunction(field=ComplexField(psi.grid, v), time=psi.time + dt)


class StrangStepper:
    """Caches grid-dependent factors for repeated stepping at fixed dt."""

    def __init__(self, system: OscillatingSystem | EffectiveSystem, grid: Grid, dt: float):
        self.dt = dt
        self.kin = np.exp(-1j * grid.k_squared() * dt / 4.0)
        if isinstance(system, OscillatingSystem):
            self.w = system.potential.spatial_values(grid)
            self.V = system.potential
            self.eps = system.eps
            self.static_phase = None
        else:
            if system.potential.grid != grid:
                raise UsageError("potential grid does not match wave function grid")
            self.static_phase = np.exp(-1j * system.potential.values * dt)

    def advance(self, values: np.ndarray, t: float) -> np.ndarray:
        if self.static_phase is None:
            scalar = self.V.temporal_integral(t, t + self.dt, self.eps)
            phase = np.exp(-1j * self.w * scalar)
        else:
            phase = self.static_phase
        v = np.fft.ifftn(self.kin * np.fft.fftn(values))
        v = phase * v
        return np.fft.ifftn(self.kin * np.fft.fftn(v))


def propagate(
    psi0: WaveFunction,
    system: OscillatingSystem | EffectiveSystem,
    T: float,
    cfg: SolverConfig,
    snapshot_times: Iterable[float],
    *,
    blow_up_factor: float = 10.0,
    boundary_tol: float = BOUNDARY_MASS_TOL,
) -> list[WaveFunction]:
    """March to time T, returning snapshots at the requested times.

    Snapshot times are rounded to the nearest step.  At every snapshot the
    boundary-mass and H1 monitors run: mass outside the inner half-box above
    ``boundary_tol`` aborts with BoundaryMassExceeded, H1 growth beyond
    ``blow_up_factor`` times the initial H1 norm aborts with WaveBlowUp.
    """
    if T < 0:
        raise ConfigError(f"horizon T must be nonnegative, got {T}")
    if cfg.dt < 0:
        raise ConfigError("propagation over a horizon needs dt > 0")
    if isinstance(system, OscillatingSystem):
        cfg.check_fast_period(system.eps)
    if T == 0:
        return [psi0]

    n_steps = int(round(T / cfg.dt))
    if n_steps < 1 or abs(n_steps * cfg.dt - T) > 1e-9 * max(1.0, T):
        raise ConfigError(f"dt={cfg.dt} does not divide the horizon T={T}")

    wanted = sorted({_snap_index(t, cfg.dt, n_steps, T) for t in snapshot_times})
    stepper = StrangStepper(system, psi0.grid, cfg.dt)
    h1_limit = blow_up_factor * norms(psi0.field).h1

    out: list[WaveFunction] = []
    values = psi0.values
    t0 = psi0.time
    if wanted and wanted[0] == 0:
        _check_monitors(psi0, h1_limit, boundary_tol)
        out.append(psi0)
        wanted = wanted[1:]
    for step in range(n_steps):
        values = stepper.advance(values, t0 + step * cfg.dt)
        idx = step + 1
        if wanted and wanted[0] == idx:
            wf = WaveFunction(ComplexField(psi0.grid, values), t0 + idx * cfg.dt)
            _check_monitors(wf, h1_limit, boundary_tol)
            out.append(wf)
            wanted = wanted[1:]
    return out


def _snap_index(t: float, dt: float, n_steps: int, T: float) -> int:
    if t < -1e-12 or t > T * (1.0 + 1e-12):
        raise ConfigError(f"snapshot time {t} outside [0, {T}]")
    idx = int(round(t / dt))
    return min(max(idx, 0), n_steps)


def _check_monitors(wf: WaveFunction, h1_limit: float, boundary_tol: float = BOUNDARY_MASS_TOL) -> None:
    bmass = boundary_mass_fraction(wf.field)
    if bmass > boundary_tol:
        raise BoundaryMassExceeded(
            f"boundary mass {bmass:.3e} exceeds {boundary_tol} at t={wf.time}"
        )
    h1 = norms(wf.field).h1
    if h1 > h1_limit:
        raise WaveBlowUp(f"H1 norm {h1:.3e} exceeds blow-up threshold {h1_limit:.3e} at t={wf.time}")


# ---------------------------------------------------------------------------
# diagnostics


def h1_distance(psi_a: WaveFunction, psi_b: WaveFunction) -> float:
    """H1 norm of the difference; requires matching grid and time stamp."""
    if psi_a.grid != psi_b.grid:
        raise UsageError("wave functions live on different grids")
    if abs(psi_a.time - psi_b.time) > 1e-9 * max(1.0, abs(psi_a.time)):
        raise UsageError(
            f"wave functions are stamped at different times: {psi_a.time} vs {psi_b.time}"
        )
    diff = ComplexField(psi_a.grid, psi_a.values - psi_b.values)
    return norms(diff).h1


def gronwall_integrand(
    psi_eps: WaveFunction,
    psi_eff: WaveFunction,
    V: TimePeriodicPotential,
    Vstar: StaticPotential,
    eps: float,
    t: float,
) -> float:
    """|<(V(t/eps,.) - V*) psi_eps, Lap(psi_eps - psi_eff)>| on the grid.

    This is the forcing term whose vanishing drives the averaged system's
    H1 error estimate to zero.
    """
    if psi_eps.grid != psi_eff.grid:
        raise UsageError("wave functions live on different grids")
    dV = evaluate(V, t / eps, psi_eps.grid).values - Vstar.values
    diff = ComplexField(psi_eps.grid, psi_eps.values - psi_eff.values)
    lap = spectral_laplacian(diff).values
    inner = np.sum(dV * psi_eps.values * np.conj(lap)) * psi_eps.grid.cell_volume
    return float(abs(inner))
