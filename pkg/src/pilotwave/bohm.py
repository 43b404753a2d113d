"""Bohmian hydrodynamics: densities, velocity, quantum potential,
ensemble sampling, trajectory integration and residual checks.

Velocity fields are u = J / rho with a relative density floor active only
near nodes; trajectory samples are drawn from rho0, which keeps them away
from nodes almost surely.  Trajectories are integrated with classical RK4
on top of cubic (Catmull-Rom) interpolation in both space and time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, SamplingError, TrajectoryEscape, UsageError
from .grid import Grid, gradient_values, laplacian_values
from .potential import StaticPotential, TimePeriodicPotential
from .solver import WaveFunction

__all__ = [
    "DensityFields",
    "TrajectoryEnsemble",
    "FieldHistory",
    "VelocityField",
    "QuantumPotential",
    "HydroResidual",
    "densities",
    "velocity",
    "quantum_potential",
    "sample_initial_positions",
    "integrate_trajectories",
    "hydrodynamic_residual",
    "newton_residual",
]

DEFAULT_REG_SCALE = 1e-12
ESCAPE_FRACTION_CAP = 0.05


class VelocityField(NamedTuple):
    values: np.ndarray  # (dim, *shape)
    regularized_fraction: float


class QuantumPotential(NamedTuple):
    values: np.ndarray  # (*shape,)
    regularized_fraction: float


@dataclass(frozen=True)
class DensityFields:
    """Position density, current density and velocity at one instant."""

    grid: Grid
    time: float
    rho: np.ndarray  # (*shape,) nonnegative
    current: np.ndarray  # (dim, *shape)
    velocity: np.ndarray  # (dim, *shape)
    regularized_fraction: float = 0.0


@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Sampled Bohmian paths X(t, x0) and momenta P(t, x0) = u(t, X).

    ``valid`` marks samples that stayed inside the box for the whole run;
    escaped samples keep their last position frozen and are excluded from
    all statistics.
    """

    grid: Grid
    initial_points: np.ndarray  # (M, dim)
    times: np.ndarray  # (K,)
    positions: np.ndarray  # (K, M, dim)
    momenta: np.ndarray  # (K, M, dim)
    weights: np.ndarray  # (M,)
    valid: np.ndarray  # (M,) bool

    @property
    def escaped_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.valid)


@dataclass(frozen=True)
class FieldHistory:
    """Time-indexed fields on a uniform mesh, e.g. velocity snapshots.

    ``values`` has shape (n_times, n_components, *grid.shape); scalar
    histories use a single component.
    """

    grid: Grid
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=np.float64)
        if t.ndim != 1 or t.size < 2:
            raise ConfigError("history needs at least two time points")
        dt = np.diff(t)
        if not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12):
            raise ConfigError("history times must be uniformly spaced")
        v = np.asarray(self.values)
        if v.shape[0] != t.size or v.shape[2:] != self.grid.shape:
            raise ConfigError(
                f"history values shape {v.shape} inconsistent with "
                f"{t.size} times and grid shape {self.grid.shape}"
            )
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def field_at(self, t: float) -> np.ndarray:
        """Catmull-Rom blend of the stored fields at time t (clamped ends)."""
        g = (t - self.times[0]) / self.dt
        j = int(np.floor(g))
        j = min(max(j, 0), len(self.times) - 2)
        f = g - j
        w = _catmull_weights(np.asarray(f))
        jm = max(j - 1, 0)
        jp = min(j + 2, len(self.times) - 1)
        return (
            w[0] * self.values[jm]
            + w[1] * self.values[j]
            + w[2] * self.values[j + 1]
            + w[3] * self.values[jp]
        )


class HydroResidual(NamedTuple):
    continuity: float
    momentum: float


# ---------------------------------------------------------------------------
# densities and derived fields


def densities(psi: WaveFunction, reg_floor: float | None = None) -> DensityFields:
    """rho = |psi|^2, J = Im(conj(psi) grad psi), u = J/rho (floored)."""
    rho = np.abs(psi.values) ** 2
    grad = gradient_values(psi.grid, psi.values)
    current = np.imag(np.conj(psi.values) * grad)
    u, frac = velocity(rho, current, reg_floor)
    return DensityFields(
        grid=psi.grid,
        time=psi.time,
        rho=rho,
        current=current,
        velocity=u,
        regularized_fraction=frac,
    )


def velocity(
    rho: np.ndarray, current: np.ndarray, reg_floor: float | None = None
) -> VelocityField:
    """u = J / max(rho, floor); the floor defaults to 1e-12 * max(rho).

    The floor only acts near density nodes; the returned fraction counts
    the floored grid points.
    """
    if reg_floor is None:
        reg_floor = DEFAULT_REG_SCALE * float(rho.max())
    if not (reg_floor > 0):
        raise ConfigError(f"reg_floor must be positive, got {reg_floor}")
    floored = rho < reg_floor
    u = current / np.maximum(rho, reg_floor)
    return VelocityField(values=u, regularized_fraction=float(floored.mean()))


def quantum_potential(
    rho: np.ndarray, grid: Grid, reg_floor: float | None = None
) -> QuantumPotential:
    """Q = 0.5 * Lap(sqrt(max(rho, floor))) / sqrt(max(rho, floor)).

    Q depends on the shape of rho only (invariant under rho -> c*rho,
    because the floor is relative to max(rho)).
    """
    if reg_floor is None:
        reg_floor = DEFAULT_REG_SCALE * float(rho.max())
    if not (reg_floor > 0):
        raise ConfigError(f"reg_floor must be positive, got {reg_floor}")
    floored = rho < reg_floor
    s = np.sqrt(np.maximum(rho, reg_floor))
    q = 0.5 * laplacian_values(grid, s) / s
    return QuantumPotential(values=q, regularized_fraction=float(floored.mean()))


# ---------------------------------------------------------------------------
# sampling

SUPPORT_FLOOR_SCALE = 1e-12


def sample_initial_positions(
    rho0: np.ndarray, grid: Grid, M: int, seed
) -> np.ndarray:
    """Draw M i.i.d. positions from the normalized grid density.

    Uses per-axis conditional inverse-CDF sampling over grid cells with a
    uniform jitter inside each cell.  Cells below 1e-12 * max(rho0) carry no
    mass, so every sample lands inside the support.  Deterministic for a
    fixed seed.
    """
    if M < 1:
        raise ConfigError(f"M must be >= 1, got {M}")
    p = np.asarray(rho0, dtype=np.float64).copy()
    if p.shape != grid.shape:
        raise UsageError("density shape does not match grid")
    p[p < SUPPORT_FLOOR_SCALE * p.max()] = 0.0
    total = p.sum()
    if not (total > 0) or not np.isfinite(total):
        raise SamplingError("density has no mass above the support floor")

    rng = np.random.default_rng(seed)
    n = grid.n_per_axis
    cells = np.zeros((M, grid.dim), dtype=np.int64)

    # axis 0 marginal is shared by all samples; later axes condition on the
    # cells already chosen.  Draws are taken from (0, 1] so a sample can
    # never land in a zero-mass cell, keeping every point inside supp rho0.
    trailing = grid.size // n
    marg = p.reshape(n, trailing).sum(axis=1)
    cdf = np.cumsum(marg)
    u = (1.0 - rng.random(M)) * cdf[-1]
    cells[:, 0] = np.searchsorted(cdf, u, side="left")
    cond = p.reshape(n, trailing)[cells[:, 0]]  # (M, trailing)

    for axis in range(1, grid.dim):
        trailing //= n
        marg = cond.reshape(M, n, trailing).sum(axis=2)  # (M, n)
        cdf = np.cumsum(marg, axis=1)
        u = (1.0 - rng.random(M)) * cdf[:, -1]
        idx = (cdf < u[:, None]).sum(axis=1)
        cells[:, axis] = idx
        cond = cond.reshape(M, n, trailing)[np.arange(M), idx, :]

    jitter = rng.random((M, grid.dim)) - 0.5
    coords = np.empty((M, grid.dim))
    for axis in range(grid.dim):
        coords[:, axis] = grid.axes[axis][cells[:, axis]] + grid.dx * jitter[:, axis]
    return coords


# ---------------------------------------------------------------------------
# trajectory integration


def integrate_trajectories(
    history: FieldHistory,
    initial_points: np.ndarray,
    times: np.ndarray,
) -> TrajectoryEnsemble:
    """RK4 integration of dX/dt = u(t, X) along the stored velocity fields.

    ``times`` is the (uniform) output mesh; integration takes one RK4 step
    per output interval, so the velocity history must be at least four
    times finer than that step.  Momenta are recorded as P(t) = u(t, X(t)).
    Samples leaving the box are frozen, marked invalid, and the run fails
    if more than 5% escape.
    """
    x0 = np.atleast_2d(np.asarray(initial_points, dtype=np.float64))
    if x0.shape[1] != history.grid.dim:
        raise UsageError(f"initial points must have {history.grid.dim} columns")
    t_out = np.asarray(times, dtype=np.float64)
    if t_out.ndim != 1 or t_out.size < 2:
        raise UsageError("need at least two output times")
    h = float(t_out[1] - t_out[0])
    if not np.allclose(np.diff(t_out), h, rtol=1e-9, atol=1e-12):
        raise UsageError("output times must be uniformly spaced")
    if history.dt > h / 4.0 * (1.0 + 1e-9):
        raise ConfigError(
            f"velocity history (dt={history.dt}) must be at least 4x finer "
            f"than the trajectory step (h={h})"
        )
    if t_out[0] < history.times[0] - 1e-12 or t_out[-1] > history.times[-1] + 1e-12:
        raise UsageError("output times extend beyond the stored velocity history")

    M = x0.shape[0]
    K = t_out.size
    grid = history.grid
    L = grid.half_width

    positions = np.empty((K, M, grid.dim))
    momenta = np.empty((K, M, grid.dim))
    alive = np.ones(M, dtype=bool)

    def u_at(t: float, X: np.ndarray) -> np.ndarray:
        return _interp_space(grid, history.field_at(t), X)

    X = x0.copy()
    positions[0] = X
    momenta[0] = u_at(t_out[0], X)
    for k in range(K - 1):
        t = t_out[k]
        k1 = u_at(t, X)
        k2 = u_at(t + 0.5 * h, X + 0.5 * h * k1)
        k3 = u_at(t + 0.5 * h, X + 0.5 * h * k2)
        k4 = u_at(t + h, X + h * k3)
        X_new = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        escaped = np.abs(X_new).max(axis=1) > L
        if escaped.any():
            X_new[escaped] = X[escaped]  # freeze at last in-box position
            alive &= ~escaped
        X = np.where(alive[:, None], X_new, X)
        positions[k + 1] = X
        momenta[k + 1] = u_at(t + h, X)

    escaped_frac = 1.0 - alive.mean()
    if escaped_frac > ESCAPE_FRACTION_CAP:
        raise TrajectoryEscape(
            f"{escaped_frac:.1%} of trajectory samples left the box "
            f"(cap {ESCAPE_FRACTION_CAP:.0%})"
        )
    return TrajectoryEnsemble(
        grid=grid,
        initial_points=x0,
        times=t_out,
        positions=positions,
        momenta=momenta,
        weights=np.full(M, 1.0 / M),
        valid=alive,
    )


def _catmull_weights(f: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    f2 = f * f
    f3 = f2 * f
    return (
        0.5 * (-f3 + 2.0 * f2 - f),
        0.5 * (3.0 * f3 - 5.0 * f2 + 2.0),
        0.5 * (-3.0 * f3 + 4.0 * f2 + f),
        0.5 * (f3 - f2),
    )


def _interp_space(grid: Grid, field: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Periodic tensor-product Catmull-Rom interpolation of field components.

    ``field`` has shape (n_components, *grid.shape); ``X`` is (M, dim).
    Returns (M, n_components).
    """
    n = grid.n_per_axis
    M = X.shape[0]
    ncomp = field.shape[0]
    g = (X + grid.half_width) / grid.dx  # fractional grid coordinates
    base = np.floor(g).astype(np.int64)
    frac = g - base

    axis_weights = []  # per axis: (4, M)
    axis_indices = []  # per axis: (4, M)
    for axis in range(grid.dim):
        w = _catmull_weights(frac[:, axis])
        axis_weights.append(np.stack(w))
        idx = np.stack([np.mod(base[:, axis] + o, n) for o in (-1, 0, 1, 2)])
        axis_indices.append(idx)

    flat = field.reshape(ncomp, -1)
    strides = [n ** (grid.dim - 1 - a) for a in range(grid.dim)]
    out = np.zeros((M, ncomp))
    for combo in np.ndindex(*(4,) * grid.dim):
        w = axis_weights[0][combo[0]]
        flat_idx = axis_indices[0][combo[0]] * strides[0]
        for axis in range(1, grid.dim):
            w = w * axis_weights[axis][combo[axis]]
            flat_idx = flat_idx + axis_indices[axis][combo[axis]] * strides[axis]
        out += w[:, None] * flat[:, flat_idx].T
    return out


# ---------------------------------------------------------------------------
# residual diagnostics


def hydrodynamic_residual(
    snapshots: list[DensityFields],
    potential: StaticPotential | tuple[TimePeriodicPotential, float],
    region_floor_scale: float = 1e-6,
) -> HydroResidual:
    """L1 residuals of the quantum hydrodynamic system.

    continuity: ||d rho/dt + div J||_L1 with centred time differencing and
    spectral divergence, averaged over interior snapshots.
    momentum: L1 norm of d J/dt + div(J (x) J / rho) + rho grad V
    - rho grad Q, restricted to the region rho > region_floor_scale * max(rho).
    """
    if len(snapshots) < 3:
        raise UsageError("need at least 3 consecutive snapshots for centred differencing")
    grid = snapshots[0].grid
    dts = np.diff([s.time for s in snapshots])
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=1e-12):
        raise UsageError("snapshots must be uniformly spaced in time")
    dt = float(dts[0])
    dv = grid.cell_volume

    cont_vals = []
    mom_vals = []
    for k in range(1, len(snapshots) - 1):
        prev, cur, nxt = snapshots[k - 1], snapshots[k], snapshots[k + 1]
        drho_dt = (nxt.rho - prev.rho) / (2.0 * dt)
        div_j = _divergence(grid, cur.current)
        cont_vals.append(float(np.sum(np.abs(drho_dt + div_j)) * dv))

        dj_dt = (nxt.current - prev.current) / (2.0 * dt)
        floor = DEFAULT_REG_SCALE * float(cur.rho.max())
        rho_safe = np.maximum(cur.rho, floor)
        stress_div = np.empty_like(cur.current)
        for i in range(grid.dim):
            flux = cur.current[i] * cur.current / rho_safe  # (dim, *shape)
            stress_div[i] = _divergence(grid, flux)
        grad_v = _potential_gradient(potential, cur.time, grid)
        resid = dj_dt + stress_div + cur.rho * grad_v - _quantum_force_density(grid, cur.rho)
        region = cur.rho > region_floor_scale * cur.rho.max()
        mom_vals.append(float(np.sum(np.abs(resid[:, region])) * dv))

    return HydroResidual(
        continuity=float(np.mean(cont_vals)), momentum=float(np.mean(mom_vals))
    )


def newton_residual(
    ensemble: TrajectoryEnsemble,
    potential: StaticPotential | tuple[TimePeriodicPotential, float],
    q_history: FieldHistory,
) -> float:
    """Ensemble-mean L1-in-time residual of dP/dt = -grad V + grad Q along paths.

    dP/dt uses centred differencing of the recorded momenta; the forces are
    interpolated at the recorded positions (grad Q spectrally from the Q
    snapshots).
    """
    t = ensemble.times
    if t.size < 3:
        raise UsageError("need at least 3 output times for centred differencing")
    h = float(t[1] - t[0])
    grid = ensemble.grid
    if q_history.values.shape[1] != 1:
        raise UsageError("q_history must carry a single scalar component")

    # local (finite-difference) gradient: the floored Q field is only
    # trustworthy where the density is, and a global spectral derivative
    # would smear its far-tail artifacts over the whole box
    grad_q_series = np.empty((q_history.times.size, grid.dim) + grid.shape)
    for j in range(q_history.times.size):
        grad_q_series[j] = _fd_gradient(grid, q_history.values[j, 0])
    grad_q_hist = FieldHistory(grid, q_history.times, grad_q_series)

    valid = ensemble.valid
    P = ensemble.momenta[:, valid, :]
    X = ensemble.positions[:, valid, :]
    resid_sum = np.zeros(valid.sum())
    for k in range(1, t.size - 1):
        dP_dt = (P[k + 1] - P[k - 1]) / (2.0 * h)
        grad_v = _potential_gradient_at(potential, t[k], grid, X[k])
        grad_q = _interp_space(grid, grad_q_hist.field_at(t[k]), X[k])
        resid_sum += np.linalg.norm(dP_dt + grad_v - grad_q, axis=1)
    return float(np.mean(resid_sum / (t.size - 2)))


def _divergence(grid: Grid, vec: np.ndarray) -> np.ndarray:
    """Spectral divergence of a (dim, *shape) vector field."""
    out = np.zeros(grid.shape)
    for axis in range(grid.dim):
        out += gradient_values(grid, vec[axis])[axis]
    return out


def _quantum_force_density(grid: Grid, rho: np.ndarray) -> np.ndarray:
    """rho * grad Q via the division-free identity 0.5*(s grad(Lap s) - Lap s grad s)
    with s = sqrt(rho); avoids differentiating across regularization floors."""
    s = np.sqrt(np.maximum(rho, 0.0))
    lap_s = laplacian_values(grid, s)
    grad_s = gradient_values(grid, s)
    grad_lap_s = gradient_values(grid, lap_s)
    return 0.5 * (s * grad_lap_s - lap_s * grad_s)


def _fd_gradient(grid: Grid, values: np.ndarray) -> np.ndarray:
    """4th-order centred finite-difference gradient with periodic wrap."""
    inv = 1.0 / (12.0 * grid.dx)
    out = np.empty((grid.dim,) + grid.shape)
    for axis in range(grid.dim):
        out[axis] = (
            np.roll(values, 2, axis=axis)
            - 8.0 * np.roll(values, 1, axis=axis)
            + 8.0 * np.roll(values, -1, axis=axis)
            - np.roll(values, -2, axis=axis)
        ) * inv
    return out


def _potential_gradient(
    potential: StaticPotential | tuple[TimePeriodicPotential, float], t: float, grid: Grid
) -> np.ndarray:
    """grad V on the grid at time t; oscillating potentials pass (V, eps)."""
    if isinstance(potential, StaticPotential):
        return potential.gradient()
    V, eps = potential
    a = float(V.temporal(np.asarray(t / eps)))
    if V.spatial.gradient is not None:
        return a * np.stack(V.spatial.gradient(grid.meshgrid()))
    return a * gradient_values(grid, V.spatial_values(grid))


def _potential_gradient_at(
    potential: StaticPotential | tuple[TimePeriodicPotential, float],
    t: float,
    grid: Grid,
    X: np.ndarray,
) -> np.ndarray:
    grad = _potential_gradient(potential, t, grid)
    return _interp_space(grid, grad, X)
