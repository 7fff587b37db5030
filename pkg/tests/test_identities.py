import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.optimize import minimize_scalar

from qpfisher import (
    BoundaryMassError,
    GridError,
    PhysicalConstants,
    RelationId,
    ScalarField,
    analytic_free_gaussian,
    analytic_ho_density,
    check_dp_mu,
    check_fisher_representations,
    check_mean_qp_fisher,
    convergence_study,
    fisher_information,
    heat_from_density,
    integrate,
    laplacian,
    make_grid,
    normalize_density,
    residual_eq_1_1,
    residual_gradient_relation,
    thermal_fisher_value,
    thermalized_qp_rhs,
)
from qpfisher.catalog import CATALOG
from qpfisher.identities import CLASSIFICATION, IdentityReport, fit_order, run_relation

DT = 1e-3


def frames(density, t, dt=DT):
    return [density(t + k * dt) for k in (-1, 0, 1)]


@pytest.fixture(scope="module")
def ho_frames(grid, consts):
    return frames(lambda t: analytic_ho_density("ground", t, consts, grid), 0.0)


@pytest.fixture(scope="module")
def uniform3():
    g = make_grid(1, (0, 4), 65)
    P = normalize_density(ScalarField(g, np.ones(65)))
    return [P, P, P]


def test_classification_table():
    exact = {RelationId.EQ_2_1, RelationId.EQ_2_3_VS_2_7, RelationId.EQ_2_5, RelationId.DELTA_P_EQ_M_U}
    for rel in RelationId:
        assert CLASSIFICATION[rel] == ("exact" if rel in exact else "formal")


def test_report_rejects_negative_norms():
    with pytest.raises(ValueError):
        IdentityReport(RelationId.EQ_2_5, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0)


class TestThermalizedRHS:
    def test_ho_ground(self, ho_frames, consts, grid):
        H = [heat_from_density(P, consts) for P in ho_frames]
        rhs = thermalized_qp_rhs(H, DT, consts)
        m = rhs.mask & (np.abs(grid.x) < 8)
        assert np.abs(rhs.values[m] - 0.5).max() <= 1e-5

    def test_static_frames(self, gauss, consts, grid):
        P = gauss(1.0)
        H = heat_from_density(P, consts)
        rhs = thermalized_qp_rhs([H, H, H], DT, consts)
        expected = consts.hbar**2 / (4 * consts.mass) * laplacian(H.scaled).values
        m = rhs.mask
        np.testing.assert_array_equal(rhs.values[m], expected[m])
        assert np.abs(rhs.values[m & (np.abs(grid.x) < 8)] - 0.25).max() <= 1e-5

    def test_mixed_gauges(self, gauss, consts):
        P = gauss()
        a, b = heat_from_density(P, consts, "zero_c"), heat_from_density(P, consts, "min_zero")
        with pytest.raises(ValueError):
            thermalized_qp_rhs([a, b, a], DT, consts)


class TestThermalizedResidual:
    def test_ho_closed_form(self, ho_frames, consts, grid):
        r = residual_eq_1_1(ho_frames, DT, consts)
        assert r.classification == "formal"
        m = r.residual_field.mask & (np.abs(grid.x) <= 3)
        assert np.abs(r.residual_field.values[m] - (0.5 * grid.x[m] ** 2 - 1)).max() <= 1e-4

    def test_crossing_point(self, consts):
        # put a grid point at sqrt(2) and one at 0
        g = make_grid(1, (-20 * math.sqrt(2), 20 * math.sqrt(2)), 4001)
        fr = frames(lambda t: analytic_ho_density("ground", t, consts, g), 0.0)
        res = residual_eq_1_1(fr, DT, consts).residual_field.values
        assert abs(res[2000] + 1.0) <= 1e-4
        assert abs(res[2100]) <= 1e-4
        assert math.isclose(g.x[2100], math.sqrt(2), rel_tol=1e-12)

    def test_free_packet_reports(self, grid, consts):
        fr = frames(lambda t: analytic_free_gaussian(1.0, 0.0, 0.0, t, consts, grid), 0.5)
        r = residual_eq_1_1(fr, DT, consts)
        assert r.residual_sup > 0 and r.residual_l2 > 0
        assert r.metadata["gauge"] == "zero_c"


class TestGradientRelation:
    @pytest.mark.parametrize("gauge", ["zero_c", "min_zero"])
    def test_identity(self, gauss, consts, gauge):
        P = gauss()
        r = residual_gradient_relation(P, heat_from_density(P, consts, gauge), consts)
        assert r.relative_residual <= 1e-6
        assert r.classification == "exact"

    def test_mismatched_alpha(self, gauss, consts):
        P = gauss()
        H2 = heat_from_density(P, PhysicalConstants(omega=0.5))
        assert H2.alpha == 2 * consts.alpha
        r = residual_gradient_relation(P, H2, consts)
        assert abs(r.relative_residual - 0.5) <= 1e-12

    def test_constant(self, uniform3, consts):
        P = uniform3[0]
        r = residual_gradient_relation(P, heat_from_density(P, consts), consts)
        assert r.residual_sup == 0.0 and r.residual_l2 == 0.0

    def test_grid_mismatch(self, gauss, consts, uniform3):
        with pytest.raises(GridError):
            residual_gradient_relation(gauss(), heat_from_density(uniform3[0], consts), consts)


class TestMeanQP:
    @pytest.mark.parametrize("which, expected", [("gauss", -0.125), ("ho", -0.25)])
    def test_static(self, which, expected, gauss, ho_frames, consts):
        P = gauss() if which == "gauss" else ho_frames[1]
        r = check_mean_qp_fisher(P, consts)
        assert abs(r.lhs - expected) <= 1e-5 * abs(expected)
        assert r.relative_residual <= 1e-5

    def test_free_packet(self, grid, consts):
        r = check_mean_qp_fisher(analytic_free_gaussian(1.0, 0.0, 0.0, 1.0, consts, grid), consts)
        assert abs(r.lhs + 0.1) <= 1e-4 * 0.1 and abs(r.rhs + 0.1) <= 1e-4 * 0.1
        assert r.relative_residual <= 1e-4

    def test_boundary_escalation(self, consts):
        g = make_grid(1, (-3, 3), 601)
        P = normalize_density(ScalarField(g, np.exp(-g.x**2 / 2)))
        with pytest.raises(BoundaryMassError):
            check_mean_qp_fisher(P, consts)


class TestFisherRepresentations:
    @pytest.mark.parametrize("sigma", [1.0, 2.0])
    def test_gaussians(self, gauss, consts, sigma):
        r = check_fisher_representations(gauss(sigma), consts)
        assert abs(r.lhs - 1 / sigma**2) <= 1e-6 / sigma**2
        assert r.relative_residual <= 1e-6

    def test_gauge_invariant(self, gauss, consts):
        P = gauss(1.0, 0.3)
        a = check_fisher_representations(P, consts, "zero_c")
        b = check_fisher_representations(P, consts, "min_zero")
        assert a.lhs == b.lhs
        assert abs(a.rhs - b.rhs) <= 4 * np.finfo(float).eps * a.rhs


def analytic_log_density(kind, consts):
    """log P(x, t) of a catalog state, written out independently of the package."""
    if kind == "coherent":
        s2 = consts.hbar / (2 * consts.mass * consts.omega)
        return lambda x, t: -((x - math.cos(consts.omega * t)) ** 2) / (2 * s2) - 0.5 * math.log(2 * math.pi * s2)

    def logp(x, t):
        s2 = 1.0 + (consts.hbar * t / (2 * consts.mass)) ** 2
        return -((x - 0.5 * t) ** 2) / (2 * s2) - 0.5 * math.log(2 * math.pi * s2)

    return logp


def brute_force_thermal_fisher(logp, t, consts, gauge):
    """F_thermal and F by adaptive quadrature with finite-difference derivatives
    of an explicit log-density; c(t) per gauge is the max of log P over x."""
    e = 1e-4
    a = consts.alpha

    def c(tt):
        return 0.0 if gauge == "zero_c" else max_logp(tt)

    def max_logp(tt):
        return -minimize_scalar(lambda x: -logp(x, tt), bounds=(-10, 10), method="bounded",
                                options={"xatol": 1e-12}).fun

    def heat(x, tt):
        return -(logp(x, tt) - c(tt)) / a

    def integrand(x):
        lap = (heat(x + e, t) - 2 * heat(x, t) + heat(x - e, t)) / e**2
        dq = (heat(x, t + e) - heat(x, t - e)) / (2 * e)
        return math.exp(logp(x, t)) * (lap - 2 * consts.mass / consts.hbar * dq)

    def fisher_density(x):
        s = (logp(x + e, t) - logp(x - e, t)) / (2 * e)
        return math.exp(logp(x, t)) * s * s

    ft = -2 * a * quad(integrand, -30, 30, limit=200, points=[0.0])[0]
    F = quad(fisher_density, -30, 30, limit=200, points=[0.0])[0]
    c_rate = (c(t + e) - c(t - e)) / (2 * e)
    return ft, F, c_rate


class TestThermalFisher:
    def test_ho_ground(self, ho_frames, consts):
        r = thermal_fisher_value(ho_frames, DT, consts)
        assert r.classification == "formal"
        assert abs(r.lhs + 4.0) <= 1e-3
        assert abs(r.metadata["deviation"] + 6.0) <= 1e-3 * 2

    def test_coherent_quarter_period(self, grid, consts):
        fr = frames(lambda t: analytic_ho_density("coherent", t, consts, grid, x0=1.0), math.pi / 4)
        r = thermal_fisher_value(fr, DT, consts)
        assert abs(r.lhs + 4.0) <= 1e-3
        assert r.metadata["c_rate"] == 0.0

    def test_uniform(self, uniform3, consts):
        r = thermal_fisher_value(uniform3, DT, consts)
        assert r.lhs == 0.0 and r.metadata["fisher"] == 0.0

    def test_brute_force_oracle_coherent(self, grid, consts):
        ft, F, c_rate = brute_force_thermal_fisher(analytic_log_density("coherent", consts), 0.6, consts, "zero_c")
        assert abs(ft - (-2 * F + 4 * c_rate)) <= 1e-6 * F
        fr = frames(lambda t: analytic_ho_density("coherent", t, consts, grid, x0=1.0), 0.6)
        r = thermal_fisher_value(fr, DT, consts)
        assert abs(r.lhs - ft) <= 1e-3 * F

    @pytest.mark.parametrize("gauge", ["zero_c", "min_zero"])
    def test_brute_force_oracle_free_packet(self, grid, consts, gauge):
        # moving and spreading, so both the transport and the c'(t) terms are exercised
        ft, F, c_rate = brute_force_thermal_fisher(analytic_log_density("free", consts), 0.7, consts, gauge)
        assert abs(ft - (-2 * F + 4 * c_rate)) <= 1e-6 * F
        if gauge == "min_zero":
            assert abs(c_rate) > 0.1
        fr = frames(lambda t: analytic_free_gaussian(1.0, 0.0, 0.5, t, consts, grid), 0.7)
        r = thermal_fisher_value(fr, DT, consts, gauge)
        # min_zero reads c(t) off grid samples, so its c'(t) carries a sampling
        # error of its own; compare the c-independent part against the oracle
        shift = 4 * consts.mass / consts.hbar * (r.metadata["c_rate"] - c_rate)
        assert abs(r.lhs - shift - ft) <= 1e-3 * F
        assert abs(r.lhs - r.rhs) <= 1e-3 * F
        assert abs(r.metadata["c_rate"] - c_rate) <= 1e-2


class TestDpMu:
    def test_gaussian(self, gauss, consts):
        r = check_dp_mu(gauss(), consts)
        assert r.residual_sup <= np.spacing(r.lhs)

    def test_uniform(self, uniform3, consts):
        r = check_dp_mu(uniform3[0], consts)
        assert r.lhs == r.rhs == r.residual_sup == 0.0

    @pytest.mark.parametrize("name", sorted(CATALOG))
    def test_catalog(self, name, grid, consts):
        r = check_dp_mu(CATALOG[name].density(grid, consts, 0.3), consts)
        assert r.residual_sup <= 1e-12

    @given(st.floats(0.1, 10), st.floats(0.1, 10))
    @settings(max_examples=20, deadline=None)
    def test_any_constants(self, hbar, mass):
        c = PhysicalConstants(hbar=hbar, mass=mass)
        g = make_grid(1, (-20, 20), 801)
        P = normalize_density(ScalarField(g, np.exp(-g.x**2 / 2) * (1.2 + np.sin(g.x))))
        r = check_dp_mu(P, c)
        assert r.residual_sup <= 4 * np.spacing(max(r.lhs, 1e-300))


class TestLemma:
    @pytest.mark.parametrize("name", sorted(CATALOG))
    def test_p_lap_log_p(self, name, grid, consts):
        P = CATALOG[name].density(grid, consts, 0.4)
        logp = ScalarField(grid, np.log(np.maximum(P.values, np.finfo(float).tiny)))
        m = P.values >= 1e-12 * P.values.max()
        val = integrate(ScalarField(grid, np.where(m, P.values * laplacian(logp).values, 0.0)))
        F = fisher_information(P).value
        assert abs(val + F) <= 1e-5 * F


class TestDeterminism:
    def test_bit_identical(self, grid, consts):
        fr = frames(lambda t: analytic_ho_density("coherent", t, consts, grid, x0=1.0), 0.3)
        for rel in RelationId:
            a = run_relation(rel, fr, DT, consts).as_dict()
            b = run_relation(rel, fr, DT, consts).as_dict()
            assert a == b


class TestConvergence:
    def grids(self, ns):
        return [make_grid(1, (-20, 20), n) for n in ns]

    def test_needs_three(self, consts):
        with pytest.raises(ValueError):
            convergence_study(RelationId.EQ_2_5, lambda g, t: None, self.grids([513, 1025]))

    def test_dt_study_single_grid(self):
        with pytest.raises(ValueError):
            convergence_study(RelationId.EQ_2_6, lambda g, t: None, self.grids([513, 1025, 2049]), dts=[1e-2, 5e-3, 2.5e-3])

    def test_fit_order(self):
        h = np.array([0.1, 0.05, 0.025])
        assert abs(fit_order(h, 3 * h**2) - 2) < 1e-12
        assert math.isnan(fit_order(h, [1.0, 0.0, 1.0]))

    def test_thermalized_residual_does_not_vanish(self, consts):
        def P(g, t):
            return analytic_ho_density("ground", t, consts, g)

        grids = [make_grid(1, (-20, 20), 1024 * 2**k + 1) for k in range(3)]
        tab = convergence_study(RelationId.EQ_1_1, P, grids, consts=consts)
        assert min(tab.residuals) > 0.9

    def test_thermal_fisher_deviation_limit(self, consts):
        for n in (1025, 2049, 4097):
            g = make_grid(1, (-20, 20), n)
            fr = frames(lambda t: analytic_ho_density("ground", t, consts, g), 0.0)
            r = thermal_fisher_value(fr, DT, consts)
            assert abs(abs(r.metadata["deviation"]) - 3 * r.metadata["fisher"]) <= 1e-3 * 2

    def test_second_order_on_non_gaussian(self, consts):
        # log P of a Gaussian is quadratic and order-2 stencils are exact on it;
        # this density has a genuine h^2 truncation error to watch decay
        def P(g, t):
            x = g.x
            return normalize_density(ScalarField(g, np.exp(-x**2 / 2) * (1.5 + np.sin(2 * x))))

        grids = [make_grid(1, (-20, 20), 4096 // 2**k) for k in (3, 2, 1, 0)]
        tab = convergence_study(RelationId.EQ_2_5, P, grids, consts=consts)
        assert tab.monotone
        assert 1.8 <= tab.order <= 2.2
        assert tab.as_dict()["rows"][0]["n"] == 512
