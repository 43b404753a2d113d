"""Phase-space measures from Bohmian data and convergence-in-measure statistics.

The weak-* topology on measures has no canonical computable metric, so the
bounded-Lipschitz (flat) distance is estimated from below by a fixed,
seeded dictionary of random-feature cosine test functions with Lipschitz
constant <= 1.  The same (size, seed) pair reproduces the same dictionary,
which makes sweep statistics comparable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .bohm import DensityFields, TrajectoryEnsemble
from .errors import UsageError

__all__ = [
    "PhaseSpaceMeasure",
    "FeatureDictionary",
    "InjectivityReport",
    "bohmian_measure",
    "pair_with_test_function",
    "flat_distance",
    "monokinetic_deviation",
    "trajectory_deviation_measure",
    "flow_injectivity_monitor",
]

DROP_FLOOR_SCALE = 1e-14
MASS_MATCH_TOL = 1e-8


@dataclass(frozen=True)
class PhaseSpaceMeasure:
    """Weighted point cloud on (x, p) phase space."""

    points_x: np.ndarray  # (M, dim)
    points_p: np.ndarray  # (M, dim)
    weights: np.ndarray  # (M,) nonnegative
    total_mass: float

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if (w < 0).any():
            raise UsageError("measure weights must be nonnegative")
        if abs(w.sum() - self.total_mass) > 1e-10 * max(1.0, self.total_mass):
            raise UsageError(
                f"weights sum {w.sum()!r} does not match total mass {self.total_mass!r}"
            )

    @property
    def dim(self) -> int:
        return self.points_x.shape[1]


def bohmian_measure(d: DensityFields) -> PhaseSpaceMeasure:
    """Point cloud (x_i, u(x_i)) with weights rho(x_i) dx^N.

    Cells with rho below 1e-14 * max(rho) are dropped (at most ~1e-9 total
    mass at desk scale) and their mass is restored proportionally so the
    total is preserved exactly.
    """
    grid = d.grid
    rho = d.rho.ravel()
    total = float(rho.sum() * grid.cell_volume)
    keep = rho >= DROP_FLOOR_SCALE * rho.max()
    x = grid.points()[keep]
    p = d.velocity.reshape(grid.dim, -1).T[keep]
    w = rho[keep] * grid.cell_volume
    w = w * (total / w.sum())
    return PhaseSpaceMeasure(points_x=x, points_p=p, weights=w, total_mass=total)


def pair_with_test_function(
    beta: PhaseSpaceMeasure, phi: Callable[[np.ndarray, np.ndarray], np.ndarray]
) -> float:
    """Duality pairing sum_i w_i * phi(x_i, p_i) for vectorized phi."""
    return float(np.sum(beta.weights * np.asarray(phi(beta.points_x, beta.points_p))))


@dataclass(frozen=True)
class FeatureDictionary:
    """Seeded random-feature cosines phi(z) = cos(omega.z + b) / max(1, |omega|).

    Frequencies have log-uniform magnitude in [0.25, 8] with isotropic random
    directions over (x, p) space; the normalization caps every feature's
    Lipschitz constant at 1 (and |phi| <= 1), so the dictionary supremum is a
    lower bound for the bounded-Lipschitz distance.
    """

    omega: np.ndarray  # (size, 2*dim)
    offset: np.ndarray  # (size,)
    norm: np.ndarray  # (size,)

    @classmethod
    def make(cls, dim: int, size: int, seed) -> "FeatureDictionary":
        rng = np.random.default_rng(seed)
        d = 2 * dim
        direction = rng.normal(size=(size, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        scale = np.exp(rng.uniform(np.log(0.25), np.log(8.0), size=size))
        omega = direction * scale[:, None]
        offset = rng.uniform(0.0, 2.0 * np.pi, size=size)
        norm = np.maximum(1.0, np.linalg.norm(omega, axis=1))
        return cls(omega=omega, offset=offset, norm=norm)

    def integrate(self, beta: PhaseSpaceMeasure) -> np.ndarray:
        """<beta, phi_j> for every feature; returns (size,)."""
        z = np.concatenate([beta.points_x, beta.points_p], axis=1)
        feats = np.cos(z @ self.omega.T + self.offset) / self.norm
        return beta.weights @ feats


def flat_distance(
    a: PhaseSpaceMeasure,
    b: PhaseSpaceMeasure,
    dictionary_size: int = 256,
    seed=0,
) -> float:
    """Lower-bound estimate of the flat (bounded-Lipschitz) distance.

    Supremum of |<a, phi> - <b, phi>| over the seeded feature dictionary.
    By construction this is symmetric and satisfies the triangle inequality
    (it is the seminorm induced by the fixed dictionary).
    """
    if a.dim != b.dim:
        raise UsageError("measures live on phase spaces of different dimension")
    if abs(a.total_mass - b.total_mass) > MASS_MATCH_TOL * max(1.0, a.total_mass):
        raise UsageError(
            f"total masses differ: {a.total_mass!r} vs {b.total_mass!r}"
        )
    dictionary = FeatureDictionary.make(a.dim, dictionary_size, seed)
    return float(np.max(np.abs(dictionary.integrate(a) - dictionary.integrate(b))))


def monokinetic_deviation(
    beta: PhaseSpaceMeasure,
    d_eff: DensityFields,
    dictionary_size: int = 256,
    seed=0,
) -> float:
    """Flat distance between beta and the mono-kinetic measure of d_eff.

    The comparison measure concentrates all momentum at the effective
    velocity field: rho_eff(x) delta(p - u_eff(x)).
    """
    reference = bohmian_measure(d_eff)
    return flat_distance(beta, reference, dictionary_size=dictionary_size, seed=seed)


def trajectory_deviation_measure(
    ens_eps: TrajectoryEnsemble, ens_eff: TrajectoryEnsemble, delta: float
) -> float:
    """Fraction of (time, sample) pairs with |(X_eps,P_eps)-(X,P)| >= delta.

    Monte-Carlo estimate of the normalized product measure of the deviation
    set over [0,T] x supp(rho0); requires paired ensembles (same initial
    points and times).  At delta = 0 only strictly positive deviations
    count, so identical ensembles give 0.
    """
    if delta < 0:
        raise UsageError(f"delta must be nonnegative, got {delta}")
    if ens_eps.times.shape != ens_eff.times.shape or not np.array_equal(
        ens_eps.times, ens_eff.times
    ):
        raise UsageError("ensembles are not paired: snapshot times differ")
    if not np.array_equal(ens_eps.initial_points, ens_eff.initial_points):
        raise UsageError("ensembles are not paired: initial points differ")
    both = ens_eps.valid & ens_eff.valid
    if not both.any():
        raise UsageError("no valid samples shared by the two ensembles")
    dx = ens_eps.positions[:, both, :] - ens_eff.positions[:, both, :]
    dp = ens_eps.momenta[:, both, :] - ens_eff.momenta[:, both, :]
    dev = np.sqrt(np.sum(dx * dx, axis=2) + np.sum(dp * dp, axis=2))
    exceed = dev >= delta if delta > 0 else dev > 0.0
    return float(exceed.mean())


class InjectivityReport(NamedTuple):
    min_pair_separation_ratio: float
    first_violation_time: float | None


def flow_injectivity_monitor(
    ens: TrajectoryEnsemble,
    n_neighbors: int = 64,
    violation_ratio: float = 1e-3,
) -> InjectivityReport:
    """Track pairwise stretching ratios |X(t,xi)-X(t,xj)| / |xi-xj|.

    Pairs are restricted to each sample's nearest initial neighbors, so the
    cost stays O(M * n_neighbors).  A ratio below ``violation_ratio`` is the
    proxy for trajectory crossing; the first time it happens is reported.
    """
    valid = np.flatnonzero(ens.valid)
    if valid.size < 2:
        raise UsageError("need at least 2 valid samples to monitor injectivity")
    x0 = ens.initial_points[valid]
    k = min(n_neighbors + 1, valid.size)
    _, nbr = cKDTree(x0).query(x0, k=k)
    nbr = np.atleast_2d(nbr)[:, 1:]  # drop self-match

    rows = np.repeat(np.arange(valid.size), nbr.shape[1])
    cols = nbr.ravel()
    base = np.linalg.norm(x0[rows] - x0[cols], axis=1)
    keep = base > 0  # coincident initial samples carry no ratio information
    rows, cols, base = rows[keep], cols[keep], base[keep]
    if rows.size == 0:
        raise UsageError("all neighbor pairs coincide at t=0")

    min_ratio = np.inf
    first_violation = None
    for k_t, t in enumerate(ens.times):
        pos = ens.positions[k_t][valid]
        sep = np.linalg.norm(pos[rows] - pos[cols], axis=1)
        ratio = float(np.min(sep / base))
        if ratio < min_ratio:
            min_ratio = ratio
        if first_violation is None and ratio < violation_ratio:
            first_violation = float(t)
    return InjectivityReport(
        min_pair_separation_ratio=min_ratio, first_violation_time=first_violation
    )
