"""Physical constants, uniform grids, field containers and quadrature."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "QpFisherError",
    "GridError",
    "NumericalError",
    "BoundaryMassError",
    "BoundaryMassWarning",
    "PhysicalConstants",
    "Grid",
    "ScalarField",
    "VectorField",
    "DensityField",
    "WaveFunction",
    "make_grid",
    "integrate",
    "normalize_density",
    "density_from_wavefunction",
    "amplitude_from_density",
    "boundary_ratio",
    "warn_if_boundary_heavy",
    "same_grid",
]

MIN_POINTS = 8
NORM_TOL = 1e-9
CLAMP_REL = 1e-12
BOUNDARY_WARN_REL = 1e-10
QUADRATURES = ("trapezoid", "simpson")


class QpFisherError(Exception):
    """Base class for all library errors."""


class GridError(QpFisherError, ValueError):
    """Invalid grid, or fields living on different grids."""


class NumericalError(QpFisherError, ArithmeticError):
    """Overflow, invalid density or similar numerical breakdown."""


class BoundaryMassError(NumericalError):
    """A density is too large at the grid boundary for a flux-free identity."""


class BoundaryMassWarning(UserWarning):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PhysicalConstants:
    """Unit system: hbar, mass, omega and kT, plus derived D and alpha.

    ``kT`` defaults to ``hbar * omega`` so that ``1 / alpha == kT``.
    """

    hbar: float = 1.0
    mass: float = 1.0
    omega: float = 1.0
    kT: float | None = None

    def __post_init__(self):
        if self.kT is None:
            object.__setattr__(self, "kT", self.hbar * self.omega)
        for name in ("hbar", "mass", "omega", "kT"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")
            object.__setattr__(self, name, v)

    @property
    def D(self) -> float:
        """Diffusion coefficient hbar / 2m."""
        return self.hbar / (2.0 * self.mass)

    @property
    def alpha(self) -> float:
        """Inverse intrinsic energy 1 / (omega hbar)."""
        return 1.0 / (self.omega * self.hbar)

    def as_dict(self) -> dict:
        return {
            "hbar": self.hbar,
            "mass": self.mass,
            "omega": self.omega,
            "kT": self.kT,
            "D": self.D,
            "alpha": self.alpha,
        }


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid with endpoints included."""

    bounds: tuple[tuple[float, float], ...]
    n: tuple[int, ...]

    def __post_init__(self):
        if len(self.bounds) != len(self.n):
            raise GridError("bounds and n must have one entry per dimension")
        if self.dim not in (1, 2, 3):
            raise GridError(f"dim must be 1, 2 or 3, got {self.dim}")
        for (lo, hi), n in zip(self.bounds, self.n):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo >= hi:
                raise GridError(f"need finite lo < hi, got ({lo}, {hi})")
            if n < MIN_POINTS:
                raise GridError(f"need at least {MIN_POINTS} points per dimension, got {n}")

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.n)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.n))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    @property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(self.bounds, self.n))

    @property
    def x(self) -> np.ndarray:
        """Coordinates along the first axis."""
        return self.axes[0]

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.axes, indexing="ij"))

    def radius_squared(self, center: Sequence[float] | float = 0.0) -> np.ndarray:
        c = np.broadcast_to(np.asarray(center, dtype=float), (self.dim,))
        return sum((X - ci) ** 2 for X, ci in zip(self.mesh(), c))

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "bounds": [list(b) for b in self.bounds],
            "n": list(self.n),
            "spacing": list(self.spacing),
        }


def make_grid(dim: int, bounds, n) -> Grid:
    """Build a uniform grid.

    ``bounds`` is ``(lo, hi)`` or one such pair per dimension; ``n`` is an
    int or one int per dimension.
    """
    if dim not in (1, 2, 3):
        raise GridError(f"dim must be 1, 2 or 3, got {dim}")
    b = np.asarray(bounds, dtype=float)
    if b.shape == (2,):
        b = np.tile(b, (dim, 1))
    if b.shape != (dim, 2):
        raise GridError(f"bounds must be (lo, hi) or {dim} such pairs")
    if np.ndim(n) == 0:
        ns = (int(n),) * dim
    else:
        ns = tuple(int(k) for k in n)
    if len(ns) != dim:
        raise GridError(f"n must have {dim} entries")
    return Grid(tuple((float(lo), float(hi)) for lo, hi in b), ns)


def same_grid(*fields) -> Grid:
    g = fields[0].grid
    for f in fields[1:]:
        if f.grid != g:
            raise GridError("fields live on different grids")
    return g


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real values sampled on a grid, with an optional validity mask."""

    grid: Grid
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise GridError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise NumericalError("field contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != self.grid.shape:
                raise GridError("mask shape does not match grid")
            object.__setattr__(self, "mask", _frozen(m))

    @property
    def support(self) -> np.ndarray:
        return np.ones(self.grid.shape, bool) if self.mask is None else self.mask


@dataclass(frozen=True, eq=False)
class VectorField:
    """``dim`` real components per grid point; ``components[k]`` is axis k."""

    grid: Grid
    components: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        if c.shape != (self.grid.dim, *self.grid.shape):
            raise GridError(f"components shape {c.shape} does not match grid")
        if not np.all(np.isfinite(c)):
            raise NumericalError("field contains non-finite values")
        object.__setattr__(self, "components", _frozen(c))
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != self.grid.shape:
                raise GridError("mask shape does not match grid")
            object.__setattr__(self, "mask", _frozen(m))

    @property
    def support(self) -> np.ndarray:
        return np.ones(self.grid.shape, bool) if self.mask is None else self.mask

    def norm_squared(self) -> np.ndarray:
        return np.sum(self.components**2, axis=0)


@dataclass(frozen=True, eq=False)
class DensityField(ScalarField):
    """Nonnegative field integrating to one under ``quadrature``."""

    quadrature: str = "trapezoid"

    def __post_init__(self):
        super().__post_init__()
        if np.any(self.values < 0):
            raise NumericalError("density has negative values")
        total = integrate(self, self.quadrature)
        if abs(total - 1.0) > NORM_TOL:
            raise NumericalError(f"density integrates to {total!r}, not 1")


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise GridError("values shape does not match grid")
        if not np.all(np.isfinite(v)):
            raise NumericalError("wavefunction contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))
        norm = self.norm()
        if abs(norm - 1.0) > NORM_TOL:
            raise NumericalError(f"wavefunction norm is {norm!r}, not 1")

    @classmethod
    def normalized(cls, grid: Grid, values) -> "WaveFunction":
        v = np.asarray(values, dtype=complex)
        norm = _integrate_array(np.abs(v) ** 2, grid, "trapezoid")
        if not norm > 0:
            raise NumericalError("cannot normalize a zero wavefunction")
        return cls(grid, v / math.sqrt(norm))

    def norm(self) -> float:
        return _integrate_array(np.abs(self.values) ** 2, self.grid, "trapezoid")


def _weights(n: int, h: float, rule: str) -> np.ndarray:
    if rule == "trapezoid":
        w = np.full(n, h)
        w[0] = w[-1] = h / 2
    elif rule == "simpson":
        if n % 2 == 0:
            raise GridError("Simpson's rule needs an odd number of points per dimension")
        w = np.full(n, 2.0)
        w[1::2] = 4.0
        w[0] = w[-1] = 1.0
        w *= h / 3
    else:
        raise ValueError(f"unknown quadrature {rule!r}; choose from {QUADRATURES}")
    return w


def _integrate_array(values: np.ndarray, grid: Grid, rule: str) -> float:
    out = values
    for n, h in zip(grid.n, grid.spacing):
        # contracting axis 0 each time walks through the axes in order
        out = np.tensordot(_weights(n, h, rule), out, axes=([0], [0]))
    return float(out)


def integrate(field: ScalarField, rule: str = "trapezoid") -> float:
    """Tensor-product composite trapezoid or Simpson integral over the box."""
    return _integrate_array(field.values, field.grid, rule)


def normalize_density(raw: ScalarField, quadrature: str = "trapezoid") -> DensityField:
    """Scale a nonnegative field to unit mass.

    Negative round-off (magnitude at most 1e-12 of the maximum) is clamped
    to zero; anything more negative is rejected.
    """
    v = np.array(raw.values, dtype=float)
    vmax = v.max()
    if not vmax > 0:
        raise NumericalError("density is zero everywhere")
    if v.min() < -CLAMP_REL * vmax:
        raise NumericalError(f"density has substantially negative values (min {v.min()!r})")
    v[v < 0] = 0.0
    total = _integrate_array(v, raw.grid, quadrature)
    if not total > 0:
        raise NumericalError("density has zero integral")
    return DensityField(raw.grid, v / total, quadrature=quadrature)


def density_from_wavefunction(psi: WaveFunction, quadrature: str = "trapezoid") -> DensityField:
    p = psi.values.real**2 + psi.values.imag**2
    return normalize_density(ScalarField(psi.grid, p), quadrature)


def amplitude_from_density(P: DensityField) -> ScalarField:
    return ScalarField(P.grid, np.sqrt(P.values), P.mask)


def boundary_ratio(f: ScalarField) -> float:
    """Largest boundary value relative to the largest value overall."""
    v = np.abs(f.values)
    vmax = v.max()
    if vmax == 0:
        return 0.0
    edge = 0.0
    for ax in range(v.ndim):
        w = np.moveaxis(v, ax, 0)
        edge = max(edge, w[0].max(), w[-1].max())
    return float(edge / vmax)


def warn_if_boundary_heavy(f: ScalarField, rel: float = BOUNDARY_WARN_REL) -> float:
    r = boundary_ratio(f)
    if r > rel:
        warnings.warn(
            f"density at the grid boundary is {r:.3g} of its maximum (> {rel:g}); "
            "flux-free identities may not hold",
            BoundaryMassWarning,
            stacklevel=2,
        )
    return r
