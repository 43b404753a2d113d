"""Periodic spatial grids with FFT-based spectral differentiation and norms.

Transform convention (fixed package-wide): forward transform is numpy's
unnormalized FFT, the inverse carries the 1/n factor.  Per-axis wavenumbers
are k = pi*m/half_width for integer m in [-n/2, n/2), stored in numpy's
standard FFT ordering (0, 1, ..., n/2-1, -n/2, ..., -1 scaled).  All
integrals are plain dx^N Riemann sums, which on a periodic grid coincide
with the trapezoidal rule and are spectrally accurate for smooth fields.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, InputError, UsageError

__all__ = [
    "Grid",
    "ComplexField",
    "Norms",
    "make_grid",
    "spectral_gradient",
    "spectral_laplacian",
    "norms",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic tensor grid on the box [-L, L)^dim.

    ``n_per_axis`` must be a power of two so that ``dx = 2L/n`` is exact in
    binary floating point (``dx * n == 2L`` bit-for-bit).
    """

    dim: int
    n_per_axis: int
    half_width: float
    dx: float = field(init=False)
    axes: tuple[np.ndarray, ...] = field(init=False, repr=False)
    wavenumbers: tuple[np.ndarray, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = self.n_per_axis
        if n < 16 or (n & (n - 1)) != 0:
            raise ConfigError(f"n_per_axis must be a power of two >= 16, got {n}")
        if not (self.half_width > 0):
            raise ConfigError(f"half_width must be positive, got {self.half_width}")
        dx = 2.0 * self.half_width / n
        x = -self.half_width + dx * np.arange(n)
        k = 2.0 * np.pi * np.fft.fftfreq(n, d=dx)
        x.setflags(write=False)
        k.setflags(write=False)
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "axes", (x,) * self.dim)
        object.__setattr__(self, "wavenumbers", (k,) * self.dim)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n_per_axis,) * self.dim

    @property
    def size(self) -> int:
        return self.n_per_axis**self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    def meshgrid(self) -> list[np.ndarray]:
        """Coordinate arrays of shape ``self.shape``, one per axis."""
        return list(np.meshgrid(*self.axes, indexing="ij"))

    def points(self) -> np.ndarray:
        """All grid points as an (size, dim) array in C order."""
        mesh = self.meshgrid()
        return np.stack([m.ravel() for m in mesh], axis=1)

    def wavenumber_mesh(self) -> list[np.ndarray]:
        return list(np.meshgrid(*self.wavenumbers, indexing="ij"))

    def k_squared(self) -> np.ndarray:
        """|k|^2 on the full transform grid."""
        ks = self.wavenumber_mesh()
        return sum(k * k for k in ks)

    def integrate(self, values: np.ndarray) -> complex | float:
        """dx^N Riemann sum over the box."""
        return values.sum() * self.cell_volume

    def inner_box_mask(self) -> np.ndarray:
        """Boolean mask of points with max-norm |x| <= half_width/2."""
        mesh = self.meshgrid()
        inner = np.ones(self.shape, dtype=bool)
        for m in mesh:
            inner &= np.abs(m) <= 0.5 * self.half_width
        return inner

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.n_per_axis == other.n_per_axis
            and self.half_width == other.half_width
        )

    def __hash__(self) -> int:
        return hash((self.dim, self.n_per_axis, self.half_width))


@dataclass(frozen=True)
class ComplexField:
    """Immutable complex amplitude field on a Grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.shape:
            raise InputError(
                f"field shape {v.shape} does not match grid shape {self.grid.shape}"
            )
        if not np.isfinite(v.real).all() or not np.isfinite(v.imag).all():
            raise InputError("field contains non-finite values")
        v = v.copy() if v is self.values else v
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


class Norms(NamedTuple):
    l2: float
    h1: float
    h1_semi: float


def make_grid(dim: int, n_per_axis: int, half_width: float) -> Grid:
    """Build a periodic grid on [-half_width, half_width)^dim."""
    return Grid(dim=dim, n_per_axis=int(n_per_axis), half_width=float(half_width))


def boundary_mass_fraction(f: ComplexField) -> float:
    """Fraction of |f|^2 mass outside the inner half-box |x|_inf <= L/2."""
    rho = np.abs(f.values) ** 2
    total = rho.sum()
    if total == 0.0:
        return 0.0
    inner = f.grid.inner_box_mask()
    return float(rho[~inner].sum() / total)


def spectral_gradient(f: ComplexField) -> list[ComplexField]:
    """Per-axis derivative via the transform multiplier i*k_j.

    Exact for band-limited fields; returns one field per axis.
    """
    fhat = np.fft.fftn(f.values)
    out = []
    for axis in range(f.grid.dim):
        k = _axis_multiplier(f.grid, axis)
        out.append(ComplexField(f.grid, np.fft.ifftn(1j * k * fhat)))
    return out


def spectral_laplacian(f: ComplexField) -> ComplexField:
    """Laplacian via the transform multiplier -|k|^2."""
    fhat = np.fft.fftn(f.values)
    return ComplexField(f.grid, np.fft.ifftn(-f.grid.k_squared() * fhat))


def gradient_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Spectral gradient of a raw array; returns shape (dim, *grid.shape).

    Real input yields real output (imaginary roundoff is discarded).
    """
    vhat = np.fft.fftn(values)
    out = np.empty((grid.dim,) + grid.shape, dtype=np.complex128)
    for axis in range(grid.dim):
        out[axis] = np.fft.ifftn(1j * _axis_multiplier(grid, axis) * vhat)
    if np.isrealobj(values):
        return out.real
    return out


def laplacian_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Spectral Laplacian of a raw array, preserving realness of the input."""
    res = np.fft.ifftn(-grid.k_squared() * np.fft.fftn(values))
    return res.real if np.isrealobj(values) else res


def norms(f: ComplexField) -> Norms:
    """L2 norm, H1 seminorm (via spectral_gradient) and full H1 norm."""
    dv = f.grid.cell_volume
    l2_sq = float(np.sum(np.abs(f.values) ** 2) * dv)
    semi_sq = 0.0
    for g in spectral_gradient(f):
        semi_sq += float(np.sum(np.abs(g.values) ** 2) * dv)
    return Norms(
        l2=np.sqrt(l2_sq),
        h1=np.sqrt(l2_sq + semi_sq),
        h1_semi=np.sqrt(semi_sq),
    )


def require_same_grid(a: ComplexField, b: ComplexField) -> None:
    if a.grid != b.grid:
        raise UsageError("fields live on different grids")


def _axis_multiplier(grid: Grid, axis: int) -> np.ndarray:
    """Wavenumber array broadcast along the given axis of the full grid."""
    k = grid.wavenumbers[axis]
    shape = [1] * grid.dim
    shape[axis] = grid.n_per_axis
    return k.reshape(shape)
