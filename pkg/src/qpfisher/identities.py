"""Both sides of each heat / quantum-potential / Fisher relation, with
quantified residuals.

Relations split into two classes. *Exact* relations follow algebraically
from the definitions and must vanish up to discretization error. *Formal*
relations are only asserted through substitution; for them the residual is
measured and reported, never asserted to be small.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import (
    BoundaryMassError,
    DensityField,
    PhysicalConstants,
    ScalarField,
    VectorField,
    boundary_ratio,
    integrate,
    same_grid,
)
from .diffops import (
    DEFAULT_FLOOR_REL,
    ORDER2,
    StencilScheme,
    gradient,
    laplacian,
    log_density_score,
    time_derivative,
)
from .quantities import (
    HeatField,
    fisher_from_heat,
    fisher_information,
    heat_from_density,
    mean_quantum_potential,
    momentum_fluctuation,
    osmotic_velocity,
    quantum_potential_paper,
)

__all__ = [
    "RelationId",
    "CLASSIFICATION",
    "TIME_DEPENDENT",
    "IdentityReport",
    "ConvergenceTable",
    "thermalized_qp_rhs",
    "residual_eq_1_1",
    "residual_gradient_relation",
    "check_mean_qp_fisher",
    "check_fisher_representations",
    "thermal_fisher_value",
    "check_dp_mu",
    "convergence_study",
    "fit_order",
]

BOUNDARY_ESCALATE_REL = 1e-6


class RelationId(str, enum.Enum):
    EQ_1_1 = "EQ_1_1"
    EQ_2_1 = "EQ_2_1"
    EQ_2_3_VS_2_7 = "EQ_2_3_VS_2_7"
    EQ_2_5 = "EQ_2_5"
    EQ_2_6 = "EQ_2_6"
    DELTA_P_EQ_M_U = "DELTA_P_EQ_M_U"


CLASSIFICATION = {
    RelationId.EQ_1_1: "formal",
    RelationId.EQ_2_1: "exact",
    RelationId.EQ_2_3_VS_2_7: "exact",
    RelationId.EQ_2_5: "exact",
    RelationId.EQ_2_6: "formal",
    RelationId.DELTA_P_EQ_M_U: "exact",
}

# relations that need three frames for a time derivative
TIME_DEPENDENT = frozenset({RelationId.EQ_1_1, RelationId.EQ_2_6})


@dataclass(frozen=True, eq=False)
class IdentityReport:
    """Outcome of one relation check.

    For pointwise relations ``lhs`` and ``rhs`` are sup-norms of the two
    sides over the mask and ``residual_field`` holds the pointwise residual.
    For scalar relations ``residual_sup == residual_l2 == |lhs - rhs|``.
    """

    relation: RelationId
    lhs: float
    rhs: float
    residual_sup: float
    residual_l2: float
    excluded_mass: float
    relative_residual: float
    metadata: dict = field(default_factory=dict)
    residual_field: ScalarField | VectorField | None = None

    def __post_init__(self):
        object.__setattr__(self, "relation", RelationId(self.relation))
        if self.residual_sup < 0 or self.residual_l2 < 0:
            raise ValueError("residual norms must be nonnegative")

    @property
    def classification(self) -> str:
        return CLASSIFICATION[self.relation]

    def as_dict(self) -> dict:
        return {
            "relation": self.relation.value,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual_sup": self.residual_sup,
            "residual_l2": self.residual_l2,
            "relative_residual": self.relative_residual,
            "excluded_mass": self.excluded_mass,
            "classification": self.classification,
            "metadata": self.metadata,
        }


def _rel(num: float, den: float) -> float:
    return 0.0 if num == 0 else num / abs(den) if den != 0 else math.inf


def _scalar_report(rel_id, lhs, rhs, excluded, metadata) -> IdentityReport:
    r = abs(lhs - rhs)
    return IdentityReport(rel_id, lhs, rhs, r, r, excluded, _rel(r, rhs), metadata)


def _field_norms(res: np.ndarray, mask: np.ndarray, grid, quadrature="trapezoid"):
    """(sup, L2) of a scalar or vector residual over the mask."""
    sq = res**2 if res.ndim == mask.ndim else np.sum(res**2, axis=0)
    sq = np.where(mask, sq, 0.0)
    sup = float(np.sqrt(sq.max())) if sq.size else 0.0
    l2 = math.sqrt(max(integrate(ScalarField(grid, sq), quadrature), 0.0))
    return sup, l2


def _sup(values: np.ndarray, mask: np.ndarray) -> float:
    sq = values**2 if values.ndim == mask.ndim else np.sum(values**2, axis=0)
    return float(np.sqrt(np.where(mask, sq, 0.0).max()))


def _check_boundary(P: DensityField) -> float:
    r = boundary_ratio(P)
    if r > BOUNDARY_ESCALATE_REL:
        raise BoundaryMassError(
            f"density at the boundary is {r:.3g} of its maximum (> {BOUNDARY_ESCALATE_REL:g}); "
            "enlarge the box"
        )
    return r


def _meta(P: DensityField, consts: PhysicalConstants, **extra) -> dict:
    d = {"grid": P.grid.describe(), "constants": consts.as_dict()}
    d.update(extra)
    return d


def _heat_frames(P_frames, consts, gauge, floor_rel):
    if len(P_frames) != 3:
        raise ValueError("exactly three frames (t - dt, t, t + dt) are required")
    same_grid(*P_frames)
    return [heat_from_density(P, consts, gauge, floor_rel) for P in P_frames]


def thermalized_qp_rhs(
    H_frames: Sequence[HeatField],
    dt: float,
    consts: PhysicalConstants,
    scheme: StencilScheme = ORDER2,
) -> ScalarField:
    """(hbar^2/4m) [lap(alpha Q) - (1/D) d/dt (alpha Q)] at the middle frame."""
    if len(H_frames) != 3:
        raise ValueError("exactly three heat frames are required")
    gauges = {H.gauge for H in H_frames}
    if len(gauges) != 1:
        raise ValueError(f"heat frames use mixed gauges {sorted(gauges)}")
    before, mid, after = (H.scaled for H in H_frames)
    lap = laplacian(mid, scheme)
    dtq = time_derivative(before, mid, after, dt)
    mask = dtq.support & lap.support
    rhs = (consts.hbar**2 / (4.0 * consts.mass)) * (lap.values - dtq.values / consts.D)
    return ScalarField(mid.grid, np.where(mask, rhs, 0.0), mask)


def residual_eq_1_1(
    P_frames: Sequence[DensityField],
    dt: float,
    consts: PhysicalConstants,
    gauge: str = "zero_c",
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> IdentityReport:
    """Quantum potential of the middle frame minus the thermalized form."""
    H = _heat_frames(P_frames, consts, gauge, floor_rel)
    P = P_frames[1]
    q = quantum_potential_paper(P, consts, floor_rel, scheme)
    rhs = thermalized_qp_rhs(H, dt, consts, scheme)
    mask = q.support & rhs.support
    res = np.where(mask, q.values - rhs.values, 0.0)
    sup, l2 = _field_norms(res, mask, P.grid, P.quadrature)
    lhs_sup = _sup(q.values, mask)
    excluded = integrate(ScalarField(P.grid, np.where(mask, 0.0, P.values)), P.quadrature)
    return IdentityReport(
        RelationId.EQ_1_1,
        lhs_sup,
        _sup(rhs.values, mask),
        sup,
        l2,
        excluded,
        _rel(sup, lhs_sup),
        _meta(P, consts, dt=dt, gauge=gauge, summary="sup over mask",
              residual_at_peak=float(res.flat[int(np.argmax(P.values))])),
        ScalarField(P.grid, res, mask),
    )


def residual_gradient_relation(
    P: DensityField,
    H: HeatField,
    consts: PhysicalConstants | None = None,
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> IdentityReport:
    """grad P / P + alpha grad Q, with alpha from ``consts`` (default: H's).

    ``relative_residual`` is the sup residual over max |grad P / P|.
    """
    same_grid(P, H.Q_heat)
    alpha = consts.alpha if consts is not None else H.alpha
    s = log_density_score(P, floor_rel, scheme)
    gq = gradient(H.Q_heat, scheme).components
    mask = s.support_mask & H.Q_heat.support
    res = np.where(mask, s.score.components + alpha * gq, 0.0)
    sup, l2 = _field_norms(res, mask, P.grid, P.quadrature)
    lhs_sup = _sup(s.score.components, mask)
    excluded = integrate(ScalarField(P.grid, np.where(mask, 0.0, P.values)), P.quadrature)
    meta = {"grid": P.grid.describe(), "alpha": alpha, "heat_alpha": H.alpha,
            "gauge": H.gauge, "summary": "sup over mask"}
    return IdentityReport(
        RelationId.EQ_2_1,
        lhs_sup,
        _sup(alpha * gq, mask),
        sup,
        l2,
        excluded,
        _rel(sup, lhs_sup),
        meta,
        VectorField(P.grid, res, mask),
    )


def check_mean_qp_fisher(
    P: DensityField,
    consts: PhysicalConstants,
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> IdentityReport:
    """Mean quantum potential against -(hbar^2/8m) F.

    Raises BoundaryMassError when the density is not negligible on the
    boundary, because the identity relies on vanishing boundary flux.
    """
    ratio = _check_boundary(P)
    q = quantum_potential_paper(P, consts, floor_rel, scheme)
    F = fisher_information(P, floor_rel, scheme)
    lhs = mean_quantum_potential(P, q)
    rhs = -(consts.hbar**2 / (8.0 * consts.mass)) * F.value
    return _scalar_report(
        RelationId.EQ_2_5, lhs, rhs, F.excluded_mass,
        _meta(P, consts, fisher=F.value, boundary_ratio=ratio),
    )


def check_fisher_representations(
    P: DensityField,
    consts: PhysicalConstants,
    gauge: str = "zero_c",
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> IdentityReport:
    """Fisher information of P against the heat-weighted form of the same P."""
    F = fisher_information(P, floor_rel, scheme)
    H = heat_from_density(P, consts, gauge, floor_rel)
    Fh = fisher_from_heat(H, scheme)
    return _scalar_report(
        RelationId.EQ_2_3_VS_2_7, F.value, Fh.value, F.excluded_mass,
        _meta(P, consts, gauge=gauge, c_gauge=H.c_gauge, c_hat=H.c_hat),
    )


def thermal_fisher_value(
    P_frames: Sequence[DensityField],
    dt: float,
    consts: PhysicalConstants,
    gauge: str = "zero_c",
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> IdentityReport:
    """Thermal form F_thermal = -2 alpha int P [lap Q - (2m/hbar) dQ/dt] dx.

    The comparison side is the value it must take when the heat field comes
    from the density, -2F + (4m/hbar) c'(t); ``metadata["deviation"]`` is
    F_thermal - F. In gauge ``min_zero`` c(t) is the grid maximum of log P,
    so c'(t) inherits the sampling error of that maximum.
    """
    P = P_frames[1]
    H = _heat_frames(P_frames, consts, gauge, floor_rel)
    lap = laplacian(H[1].Q_heat, scheme)
    dq = time_derivative(H[0].Q_heat, H[1].Q_heat, H[2].Q_heat, dt)
    mask = dq.support
    bracket = lap.values - (2.0 * consts.mass / consts.hbar) * dq.values
    integrand = np.where(mask, P.values * bracket, 0.0)
    f_thermal = -2.0 * H[1].alpha * integrate(ScalarField(P.grid, integrand), P.quadrature)
    F = fisher_information(P, floor_rel, scheme)
    c_rate = (H[2].c_gauge - H[0].c_gauge) / (2.0 * dt)
    predicted = -2.0 * F.value + (4.0 * consts.mass / consts.hbar) * c_rate
    excluded = integrate(ScalarField(P.grid, np.where(mask, 0.0, P.values)), P.quadrature)
    return _scalar_report(
        RelationId.EQ_2_6, f_thermal, predicted, excluded,
        _meta(P, consts, dt=dt, gauge=gauge, fisher=F.value, c_rate=c_rate,
              deviation=f_thermal - F.value, boundary_ratio=boundary_ratio(P)),
    )


def check_dp_mu(
    P: DensityField,
    consts: PhysicalConstants,
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> IdentityReport:
    """Momentum fluctuation against mass times osmotic velocity."""
    dp = momentum_fluctuation(P, consts, floor_rel, scheme)
    mu = osmotic_velocity(P, consts, floor_rel, scheme)
    mask = dp.support
    res = np.where(mask, dp.components - consts.mass * mu.components, 0.0)
    sup, l2 = _field_norms(res, mask, P.grid, P.quadrature)
    lhs_sup = _sup(dp.components, mask)
    excluded = integrate(ScalarField(P.grid, np.where(mask, 0.0, P.values)), P.quadrature)
    return IdentityReport(
        RelationId.DELTA_P_EQ_M_U, lhs_sup, _sup(consts.mass * mu.components, mask),
        sup, l2, excluded, _rel(sup, lhs_sup),
        _meta(P, consts, summary="sup over mask"), VectorField(P.grid, res, mask),
    )


def run_relation(
    relation: RelationId | str,
    frames: Sequence[DensityField],
    dt: float,
    consts: PhysicalConstants,
    gauge: str = "zero_c",
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> IdentityReport:
    """Dispatch one relation; ``frames`` is (before, mid, after), and static
    relations use the middle frame only."""
    rel = RelationId(relation)
    P = frames[1]
    if rel is RelationId.EQ_1_1:
        return residual_eq_1_1(frames, dt, consts, gauge, floor_rel, scheme)
    if rel is RelationId.EQ_2_6:
        return thermal_fisher_value(frames, dt, consts, gauge, floor_rel, scheme)
    if rel is RelationId.EQ_2_1:
        H = heat_from_density(P, consts, gauge, floor_rel)
        return residual_gradient_relation(P, H, consts, floor_rel, scheme)
    if rel is RelationId.EQ_2_5:
        return check_mean_qp_fisher(P, consts, floor_rel, scheme)
    if rel is RelationId.EQ_2_3_VS_2_7:
        return check_fisher_representations(P, consts, gauge, floor_rel, scheme)
    return check_dp_mu(P, consts, floor_rel, scheme)


def convergence_residual(report: IdentityReport) -> float:
    """The number a convergence study tracks for a relation."""
    if report.relation is RelationId.EQ_2_1:
        return report.relative_residual
    return report.residual_sup


def fit_order(steps: Sequence[float], residuals: Sequence[float]) -> float:
    """Least-squares slope of log(residual) against log(step)."""
    s = np.asarray(steps, dtype=float)
    r = np.asarray(residuals, dtype=float)
    if np.any(r <= 0) or not np.all(np.isfinite(r)):
        return math.nan
    return float(np.polyfit(np.log(s), np.log(r), 1)[0])


@dataclass(frozen=True)
class ConvergenceTable:
    relation: RelationId
    parameter: str
    steps: tuple[float, ...]
    residuals: tuple[float, ...]
    order: float
    points: tuple[int, ...] = ()

    @property
    def monotone(self) -> bool:
        return all(a > b for a, b in zip(self.residuals, self.residuals[1:]))

    def as_dict(self) -> dict:
        rows = [
            {self.parameter: s, "residual": r} | ({"n": n} if self.points else {})
            for s, r, n in zip(self.steps, self.residuals, self.points or (None,) * len(self.steps))
        ]
        return {
            "relation": self.relation.value,
            "parameter": self.parameter,
            "rows": rows,
            "fitted_order": self.order,
            "monotone": self.monotone,
        }


FrameSource = Callable[..., DensityField]


def convergence_study(
    relation: RelationId | str,
    density: FrameSource,
    grids: Sequence | None = None,
    dts: Sequence[float] | None = None,
    consts: PhysicalConstants | None = None,
    t: float = 0.0,
    dt: float = 1e-3,
    gauge: str = "zero_c",
    floor_rel: float = DEFAULT_FLOOR_REL,
    scheme: StencilScheme = ORDER2,
) -> ConvergenceTable:
    """Residual of one relation under grid (``grids``) or time-step (``dts``)
    refinement, with the fitted log-log order.

    ``density(grid, t)`` must return the density at time t on ``grid``. For
    a dt study ``grids`` holds exactly one grid.
    """
    rel = RelationId(relation)
    consts = consts or PhysicalConstants()
    if not grids:
        raise ValueError("at least one grid is required")
    if dts is not None:
        if len(grids) != 1:
            raise ValueError("a time-step study runs on exactly one grid")
        if len(dts) < 3:
            raise ValueError("a convergence study needs at least three resolutions")
        grid = grids[0]
        steps, res = [], []
        for d in dts:
            frames = [density(grid, t + k * d) for k in (-1, 0, 1)]
            steps.append(float(d))
            res.append(convergence_residual(
                run_relation(rel, frames, d, consts, gauge, floor_rel, scheme)))
        return ConvergenceTable(rel, "dt", tuple(steps), tuple(res), fit_order(steps, res))
    if len(grids) < 3:
        raise ValueError("a convergence study needs at least three resolutions")
    steps, res, points = [], [], []
    for grid in grids:
        frames = [density(grid, t + k * dt) for k in (-1, 0, 1)]
        report = run_relation(rel, frames, dt, consts, gauge, floor_rel, scheme)
        steps.append(float(max(grid.spacing)))
        points.append(int(grid.n[0]))
        res.append(convergence_residual(report))
    return ConvergenceTable(
        rel, "h", tuple(steps), tuple(res), fit_order(steps, res), tuple(points)
    )
