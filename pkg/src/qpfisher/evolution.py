"""Crank-Nicolson propagation in 1D and analytic time-dependent densities."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .core import (
    DensityField,
    Grid,
    GridError,
    PhysicalConstants,
    ScalarField,
    WaveFunction,
    density_from_wavefunction,
    normalize_density,
    warn_if_boundary_heavy,
)

__all__ = [
    "Potential",
    "Trajectory",
    "harmonic_potential",
    "free_potential",
    "gaussian_wavefunction",
    "crank_nicolson_step",
    "CrankNicolson",
    "evolve",
    "free_gaussian_width",
    "analytic_free_gaussian",
    "analytic_ho_density",
]


@dataclass(frozen=True, eq=False)
class Potential:
    values: ScalarField

    @property
    def grid(self) -> Grid:
        return self.values.grid


def free_potential(grid: Grid) -> Potential:
    return Potential(ScalarField(grid, np.zeros(grid.shape)))


def harmonic_potential(grid: Grid, consts: PhysicalConstants, center: float = 0.0) -> Potential:
    r2 = grid.radius_squared(center)
    return Potential(ScalarField(grid, 0.5 * consts.mass * consts.omega**2 * r2))


def gaussian_wavefunction(
    grid: Grid, sigma: float, x0=0.0, p0=0.0, consts: PhysicalConstants | None = None
) -> WaveFunction:
    """Gaussian amplitude whose density has standard deviation ``sigma``,
    carrying mean momentum ``p0`` along every axis."""
    consts = consts or PhysicalConstants()
    amp = np.exp(-grid.radius_squared(x0) / (4.0 * sigma**2))
    p = np.broadcast_to(np.asarray(p0, dtype=float), (grid.dim,))
    phase = sum(pk * X for pk, X in zip(p, grid.mesh())) / consts.hbar
    return WaveFunction.normalized(grid, amp * np.exp(1j * phase))


class CrankNicolson:
    """Reusable Crank-Nicolson propagator for a fixed grid, potential and dt.

    Homogeneous Dirichlet boundaries: the first and last grid values are
    pinned to zero and only interior values are updated.
    """

    def __init__(self, V: Potential, dt: float, consts: PhysicalConstants):
        grid = V.grid
        if grid.dim != 1:
            raise GridError("Crank-Nicolson propagation is implemented for 1D grids only")
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt!r}")
        self.grid, self.dt, self.consts = grid, dt, consts
        h = grid.spacing[0]
        kin = consts.hbar**2 / (2.0 * consts.mass * h**2)
        v = np.asarray(V.values.values)[1:-1]
        m = v.size
        # H = kin * (2 on diag, -1 off diag) + V on the interior points
        diag = 2.0 * kin + v
        off = -kin
        b = 1j * dt / (2.0 * consts.hbar)
        self._ab = np.zeros((3, m), dtype=complex)
        self._ab[0, 1:] = b * off
        self._ab[1, :] = 1.0 + b * diag
        self._ab[2, :-1] = b * off
        self._rdiag = 1.0 - b * diag
        self._roff = -b * off

    def step_values(self, psi: np.ndarray) -> np.ndarray:
        inner = psi[1:-1]
        rhs = self._rdiag * inner
        rhs[1:] += self._roff * inner[:-1]
        rhs[:-1] += self._roff * inner[1:]
        # psi[0], psi[-1] are zero under Dirichlet conditions
        out = np.zeros_like(psi)
        out[1:-1] = solve_banded((1, 1), self._ab, rhs, check_finite=False)
        return out

    def step(self, psi: WaveFunction) -> WaveFunction:
        if psi.grid != self.grid:
            raise GridError("wavefunction and potential live on different grids")
        return WaveFunction(self.grid, self.step_values(np.array(psi.values)))


def crank_nicolson_step(
    psi: WaveFunction, V: Potential, dt: float, consts: PhysicalConstants
) -> WaveFunction:
    return CrankNicolson(V, dt, consts).step(psi)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots at t0 + k * dt_snap, k = 0 .. len(frames) - 1."""

    grid: Grid
    t0: float
    dt_snap: float
    frames: tuple[WaveFunction, ...]

    def __post_init__(self):
        if len(self.frames) < 3:
            raise ValueError("a trajectory needs at least three frames")
        for f in self.frames:
            if f.grid != self.grid:
                raise GridError("trajectory frames live on different grids")
            if abs(f.norm() - 1.0) > 1e-8:
                raise ValueError("trajectory frame is not normalized")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt_snap * np.arange(len(self.frames))

    def __len__(self) -> int:
        return len(self.frames)

    def density(self, k: int, quadrature: str = "trapezoid") -> DensityField:
        return density_from_wavefunction(self.frames[k], quadrature)

    def densities(self, quadrature: str = "trapezoid") -> list[DensityField]:
        return [self.density(k, quadrature) for k in range(len(self.frames))]

    def triple(self, k: int, quadrature: str = "trapezoid") -> tuple[DensityField, ...]:
        """Densities at frames k - 1, k, k + 1 for central time differences."""
        if not 1 <= k <= len(self.frames) - 2:
            raise IndexError(f"frame {k} has no neighbours on both sides")
        return tuple(self.density(j, quadrature) for j in (k - 1, k, k + 1))

    def norms(self) -> np.ndarray:
        return np.array([f.norm() for f in self.frames])


def evolve(
    psi0: WaveFunction,
    V: Potential,
    dt: float,
    steps: int,
    snap_stride: int,
    consts: PhysicalConstants | None = None,
) -> Trajectory:
    """Propagate ``steps`` Crank-Nicolson steps, keeping every
    ``snap_stride``-th state (t = 0 included)."""
    consts = consts or PhysicalConstants()
    if snap_stride < 1 or steps < 2 * snap_stride:
        raise ValueError("need snap_stride >= 1 and steps >= 2 * snap_stride")
    prop = CrankNicolson(V, dt, consts)
    if psi0.grid != prop.grid:
        raise GridError("initial state and potential live on different grids")
    psi = np.array(psi0.values)
    psi[0] = psi[-1] = 0.0
    frames = [WaveFunction.normalized(prop.grid, psi)]
    psi = np.array(frames[0].values)
    for k in range(1, steps + 1):
        psi = prop.step_values(psi)
        if k % snap_stride == 0:
            frames.append(WaveFunction(prop.grid, psi))
    return Trajectory(prop.grid, 0.0, dt * snap_stride, tuple(frames))


def free_gaussian_width(sigma0: float, t: float, consts: PhysicalConstants) -> float:
    """sigma(t) of a free Gaussian packet: sigma0 sqrt(1 + (hbar t / 2 m sigma0^2)^2)."""
    tau = consts.hbar * t / (2.0 * consts.mass * sigma0**2)
    return sigma0 * math.sqrt(1.0 + tau**2)


def _gaussian_density(grid: Grid, sigma: float, center, quadrature: str) -> DensityField:
    raw = ScalarField(grid, np.exp(-grid.radius_squared(center) / (2.0 * sigma**2)))
    P = normalize_density(raw, quadrature)
    warn_if_boundary_heavy(P)
    return P


def analytic_free_gaussian(
    sigma0: float,
    x0,
    p0,
    t: float,
    consts: PhysicalConstants,
    grid: Grid,
    quadrature: str = "trapezoid",
) -> DensityField:
    """|psi|^2 of a freely spreading Gaussian packet at time t."""
    sigma = free_gaussian_width(sigma0, t, consts)
    center = np.asarray(x0, dtype=float) + np.asarray(p0, dtype=float) * t / consts.mass
    return _gaussian_density(grid, sigma, center, quadrature)


def analytic_ho_density(
    kind: str,
    t: float,
    consts: PhysicalConstants,
    grid: Grid,
    x0: float = 0.0,
    quadrature: str = "trapezoid",
) -> DensityField:
    """Harmonic-oscillator ground state or coherent state (released from rest
    at x0) at time t. Both have variance hbar / (2 m omega)."""
    sigma = math.sqrt(consts.hbar / (2.0 * consts.mass * consts.omega))
    if kind == "ground":
        center = 0.0
    elif kind == "coherent":
        center = x0 * math.cos(consts.omega * t)
    else:
        raise ValueError(f"kind must be 'ground' or 'coherent', got {kind!r}")
    return _gaussian_density(grid, sigma, center, quadrature)
