"""Osmotic velocity, momentum fluctuation, quantum potential, Fisher
information and the heat <-> density maps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DensityField,
    NumericalError,
    PhysicalConstants,
    ScalarField,
    VectorField,
    integrate,
    normalize_density,
    same_grid,
)
from .diffops import (
    DEFAULT_FLOOR_REL,
    ORDER2,
    ScoreField,
    StencilScheme,
    gradient,
    laplacian,
    log_density_score,
)

__all__ = [
    "GAUGES",
    "HeatField",
    "FisherResult",
    "osmotic_velocity",
    "momentum_fluctuation",
    "total_energy_density",
    "laplacian_ratio",
    "quantum_potential_paper",
    "quantum_potential_standard",
    "fisher_information",
    "mean_quantum_potential",
    "heat_from_density",
    "density_from_heat",
    "fisher_from_heat",
    "heat_difference_from_ratio",
]

GAUGES = ("zero_c", "min_zero")
_TINY = np.finfo(float).tiny
_EXP_LIMIT = 700.0


@dataclass(frozen=True, eq=False)
class HeatField:
    """Heat distribution with the gauge constant of P = exp(-alpha*Q + c).

    ``Q_heat`` carries the support mask of the density it came from (if
    any); off the mask it still holds finite values so that stencils
    touching the mask edge stay well defined.
    """

    Q_heat: ScalarField
    c_gauge: float
    alpha: float
    gauge: str = "zero_c"

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.gauge not in GAUGES + ("custom",):
            raise ValueError(f"unknown gauge {self.gauge!r}")

    @property
    def grid(self):
        return self.Q_heat.grid

    @property
    def scaled(self) -> ScalarField:
        """Dimensionless heat alpha * Q."""
        return ScalarField(self.grid, self.alpha * self.Q_heat.values, self.Q_heat.mask)

    def boltzmann_weight(self) -> np.ndarray:
        aq = self.alpha * self.Q_heat.values
        if aq.min() < -_EXP_LIMIT:
            raise NumericalError(
                f"exp(-alpha*Q) overflows: alpha*Q reaches {aq.min():.6g} < -{_EXP_LIMIT:g}"
            )
        return np.exp(-aq)

    @property
    def c_hat(self) -> float:
        """Realized normalization 1 / integral of exp(-alpha*Q)."""
        return 1.0 / integrate(ScalarField(self.grid, self.boltzmann_weight()))


@dataclass(frozen=True)
class FisherResult:
    value: float
    excluded_mass: float

    def __post_init__(self):
        if self.value < 0:
            raise NumericalError(f"negative Fisher information {self.value!r}")
        if not 0 <= self.excluded_mass < 1:
            raise NumericalError(f"excluded mass {self.excluded_mass!r} outside [0, 1)")


def _score(P, floor_rel, scheme) -> ScoreField:
    return log_density_score(P, floor_rel, scheme)


def osmotic_velocity(
    P: DensityField,
    consts: PhysicalConstants,
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> VectorField:
    s = _score(P, floor_rel, scheme)
    return VectorField(P.grid, -consts.D * s.score.components + 0.0, s.support_mask)


def momentum_fluctuation(
    P: DensityField,
    consts: PhysicalConstants,
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> VectorField:
    s = _score(P, floor_rel, scheme)
    return VectorField(P.grid, -(consts.hbar / 2.0) * s.score.components + 0.0, s.support_mask)


def total_energy_density(
    P: DensityField,
    consts: PhysicalConstants,
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> ScalarField:
    """hbar*omega + |dp|^2 / 2m pointwise."""
    dp = momentum_fluctuation(P, consts, floor_rel, scheme)
    e = consts.hbar * consts.omega + dp.norm_squared() / (2.0 * consts.mass)
    return ScalarField(P.grid, e, dp.mask)


def laplacian_ratio(
    P: DensityField,
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
    score: ScoreField | None = None,
) -> ScalarField:
    """Laplacian(P) / P on the support, via lap(log P) + |grad log P|^2."""
    s = score if score is not None else _score(P, floor_rel, scheme)
    lap_log = laplacian(s.log_density, scheme).values
    r = lap_log + s.score.norm_squared()
    return ScalarField(P.grid, np.where(s.support_mask, r, 0.0), s.support_mask)


def quantum_potential_paper(
    P: DensityField,
    consts: PhysicalConstants,
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> ScalarField:
    """Q = -(hbar^2/4m) [ (1/2)|grad P / P|^2 - lap P / P ], sign as written."""
    s = _score(P, floor_rel, scheme)
    ratio = laplacian_ratio(P, score=s, scheme=scheme).values
    q = -(consts.hbar**2 / (4.0 * consts.mass)) * (0.5 * s.score.norm_squared() - ratio)
    return ScalarField(P.grid, np.where(s.support_mask, q, 0.0), s.support_mask)


def quantum_potential_standard(
    R: ScalarField,
    consts: PhysicalConstants,
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
    route: str = "log",
) -> ScalarField:
    """Q = -(hbar^2/2m) lap R / R for an amplitude R = sqrt(P).

    The mask keeps points with R^2 >= floor_rel * max R^2. ``route="log"``
    evaluates lap R / R as lap(log R) + |grad log R|^2; ``route="direct"``
    divides the stencil Laplacian of R by R.
    """
    r = np.asarray(R.values)
    if np.any(r < 0):
        raise NumericalError("amplitude must be nonnegative")
    mask = r**2 >= floor_rel * r.max() ** 2
    if route == "log":
        logr = ScalarField(R.grid, np.log(np.maximum(r, _TINY)))
        ratio = laplacian(logr, scheme).values + gradient(logr, scheme).norm_squared()
    elif route == "direct":
        ratio = laplacian(R, scheme).values / np.where(mask, r, 1.0)
    else:
        raise ValueError(f"unknown route {route!r}")
    q = -(consts.hbar**2 / (2.0 * consts.mass)) * ratio
    return ScalarField(R.grid, np.where(mask, q, 0.0), mask)


def fisher_information(
    P: DensityField,
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> FisherResult:
    """F = integral of P |grad P / P|^2 over the support mask."""
    s = _score(P, floor_rel, scheme)
    integrand = ScalarField(P.grid, P.values * s.score.norm_squared())
    return FisherResult(integrate(integrand, P.quadrature), s.excluded_mass)


def mean_quantum_potential(P: DensityField, Q: ScalarField) -> float:
    same_grid(P, Q)
    vals = P.values * Q.values
    if Q.mask is not None:
        vals = np.where(Q.mask, vals, 0.0)
    return integrate(ScalarField(P.grid, vals), P.quadrature)


def heat_from_density(
    P: DensityField,
    consts: PhysicalConstants,
    gauge: str = "zero_c",
    floor_rel: float = DEFAULT_FLOOR_REL,
) -> HeatField:
    """Invert P = exp(-alpha*Q + c): Q = -(log P - c) / alpha.

    ``zero_c`` fixes c = 0; ``min_zero`` picks c so that min Q = 0 on the
    support.
    """
    if gauge not in GAUGES:
        raise ValueError(f"gauge must be one of {GAUGES}, got {gauge!r}")
    v = P.values
    mask = v >= floor_rel * v.max()
    logp = np.log(np.maximum(v, _TINY))
    c = 0.0 if gauge == "zero_c" else float(logp[mask].max())
    q = -(logp - c) / consts.alpha
    return HeatField(ScalarField(P.grid, q, mask), c, consts.alpha, gauge)


def density_from_heat(H: HeatField) -> DensityField:
    """P = c_hat exp(-alpha*Q) with c_hat fixed by normalization."""
    w = ScalarField(H.grid, H.boltzmann_weight())
    return normalize_density(w)


def fisher_from_heat(H: HeatField, scheme: StencilScheme = ORDER2) -> FisherResult:
    """F = alpha^2 c_hat integral of exp(-alpha*Q) |grad Q|^2 over the support."""
    w = H.boltzmann_weight()
    c_hat = H.c_hat
    g2 = gradient(H.Q_heat, scheme).norm_squared()
    mask = H.Q_heat.support
    integrand = np.where(mask, w * g2, 0.0)
    value = H.alpha**2 * c_hat * integrate(ScalarField(H.grid, integrand))
    excluded = c_hat * integrate(ScalarField(H.grid, np.where(mask, 0.0, w)))
    return FisherResult(value, excluded)


def heat_difference_from_ratio(
    P_t: DensityField,
    P_0: DensityField,
    consts: PhysicalConstants,
    floor_rel: float = DEFAULT_FLOOR_REL,
) -> ScalarField:
    """dQ = -kT log(P_t / P_0) on the joint support, zero elsewhere."""
    grid = same_grid(P_t, P_0)
    a, b = P_t.values, P_0.values
    mask = (a >= floor_rel * a.max()) & (b >= floor_rel * b.max())
    ratio = np.log(np.maximum(a, _TINY)) - np.log(np.maximum(b, _TINY))
    return ScalarField(grid, np.where(mask, -consts.kT * ratio, 0.0), mask)
