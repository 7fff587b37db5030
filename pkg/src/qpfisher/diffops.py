"""Finite-difference operators on uniform grids.

Interior points use centred stencils; the first and last ``order // 2``
points along each axis use one-sided stencils of the same formal order, so
no ghost points are needed.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .core import (
    DensityField,
    GridError,
    ScalarField,
    VectorField,
    integrate,
    same_grid,
)

__all__ = [
    "StencilScheme",
    "ScoreField",
    "fd_weights",
    "gradient",
    "laplacian",
    "log_density_score",
    "time_derivative",
    "DEFAULT_FLOOR_REL",
]

DEFAULT_FLOOR_REL = 1e-12
_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class StencilScheme:
    order: int = 2

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ValueError(f"stencil order must be 2 or 4, got {self.order}")


ORDER2 = StencilScheme(2)


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple[int, ...], deriv: int) -> tuple[float, ...]:
    """Exact weights of the finite-difference rule on integer ``offsets``.

    Solves the moment conditions sum_j w_j o_j^k = k! [k == deriv] in rational
    arithmetic and rounds once at the end.
    """
    m = len(offsets)
    A = [[Fraction(o) ** k for o in offsets] for k in range(m)]
    b = [Fraction(0)] * m
    fact = 1
    for k in range(1, deriv + 1):
        fact *= k
    b[deriv] = Fraction(fact)
    # Gauss-Jordan on the Vandermonde system; sizes are at most 7x7
    for col in range(m):
        piv = next(r for r in range(col, m) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r in range(m):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [a - f * c for a, c in zip(A[r], A[col])]
                b[r] -= f * b[col]
    return tuple(float(b[i] / A[i][i]) for i in range(m))


def _apply_axis(v: np.ndarray, axis: int, h: float, deriv: int, order: int) -> np.ndarray:
    # weights sum to zero, so each rule acts on differences v[i+o] - v[i];
    # constants then differentiate to exactly 0
    w = np.moveaxis(v, axis, 0)
    n = w.shape[0]
    half = order // 2
    out = np.empty_like(w)
    central = tuple(range(-half, half + 1))
    mid = w[half : n - half]
    acc = np.zeros_like(mid)
    for o, c in zip(central, fd_weights(central, deriv)):
        if o != 0 and c != 0.0:
            acc += c * (w[half + o : n - half + o] - mid)
    out[half : n - half] = acc
    # one-sided rows need order + deriv points for formal accuracy ``order``
    npts = order + deriv
    for i in range(half):
        left = tuple(range(-i, npts - i))
        out[i] = sum(c * (w[i + o] - w[i]) for o, c in zip(left, fd_weights(left, deriv)) if o != 0)
        j = n - 1 - i
        right = tuple(-o for o in left)
        out[j] = sum(c * (w[j + o] - w[j]) for o, c in zip(right, fd_weights(right, deriv)) if o != 0)
    return np.moveaxis(out / h**deriv, 0, axis)


def gradient(f: ScalarField, scheme: StencilScheme = ORDER2) -> VectorField:
    g = f.grid
    comps = [
        _apply_axis(f.values, ax, h, 1, scheme.order) for ax, h in enumerate(g.spacing)
    ]
    return VectorField(g, np.stack(comps), f.mask)


def laplacian(f: ScalarField, scheme: StencilScheme = ORDER2) -> ScalarField:
    g = f.grid
    total = np.zeros(g.shape)
    for ax, h in enumerate(g.spacing):
        total += _apply_axis(f.values, ax, h, 2, scheme.order)
    return ScalarField(g, total, f.mask)


@dataclass(frozen=True, eq=False)
class ScoreField:
    """Log-density gradient on the support of a density.

    ``score`` is zero where ``support_mask`` is false. ``log_density`` is the
    floored ``log P`` the score was differentiated from, kept for second
    derivatives.
    """

    score: VectorField
    support_mask: np.ndarray
    excluded_mass: float
    log_density: ScalarField


def log_density_score(
    P: DensityField,
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> ScoreField:
    """Score grad P / P, evaluated as grad log P where P >= floor_rel * max P.

    Differentiating ``log P`` rather than dividing ``grad P`` by ``P`` keeps
    the truncation error tied to derivatives of ``log P``, which stay bounded
    in Gaussian-like tails where ``P'''/P`` grows like ``x**3``.
    """
    if not (0 < floor_rel <= 1e-3):
        raise ValueError(f"floor_rel must lie in (0, 1e-3], got {floor_rel!r}")
    v = P.values
    mask = v >= floor_rel * v.max()
    logp = ScalarField(P.grid, np.log(np.maximum(v, _TINY)), mask)
    grad = gradient(logp, scheme)
    comps = np.where(mask, grad.components, 0.0)
    excluded = integrate(ScalarField(P.grid, np.where(mask, 0.0, v)), P.quadrature)
    return ScoreField(VectorField(P.grid, comps, mask), mask, excluded, logp)


def time_derivative(
    before: ScalarField, current: ScalarField, after: ScalarField, dt: float
) -> ScalarField:
    """Central difference (f(t + dt) - f(t - dt)) / (2 dt) at the middle frame."""
    grid = same_grid(before, current, after)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    mask = None
    masks = [f.mask for f in (before, current, after) if f.mask is not None]
    if masks:
        mask = np.logical_and.reduce(masks)
    return ScalarField(grid, (after.values - before.values) / (2.0 * dt), mask)
