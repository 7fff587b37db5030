import math

import numpy as np
import pytest

from qpfisher import (
    GridError,
    PhysicalConstants,
    ScalarField,
    Trajectory,
    analytic_free_gaussian,
    analytic_ho_density,
    crank_nicolson_step,
    evolve,
    fisher_information,
    integrate,
    make_grid,
)
from qpfisher.evolution import (
    CrankNicolson,
    free_gaussian_width,
    free_potential,
    gaussian_wavefunction,
    harmonic_potential,
)

HO_SIGMA = math.sqrt(0.5)


def center_and_variance(P):
    x = P.grid.x
    mean = integrate(ScalarField(P.grid, x * P.values))
    var = integrate(ScalarField(P.grid, (x - mean) ** 2 * P.values))
    return mean, var


class TestStep:
    def test_norm_after_step(self, grid, consts):
        psi = gaussian_wavefunction(grid, 1.0, 0.5, 2.0, consts)
        out = crank_nicolson_step(psi, harmonic_potential(grid, consts), 1e-3, consts)
        assert abs(out.norm() - 1) <= 1e-12

    def test_ho_ground_stationary(self, grid, consts):
        psi = gaussian_wavefunction(grid, HO_SIGMA, 0.0, 0.0, consts)
        out = crank_nicolson_step(psi, harmonic_potential(grid, consts), 1e-3, consts)
        assert np.abs(np.abs(out.values) ** 2 - np.abs(psi.values) ** 2).max() <= 1e-8

    def test_second_order_in_time(self, consts):
        g = make_grid(1, (-20, 20), 801)
        psi = np.array(gaussian_wavefunction(g, 1.0, 0.0, 1.0, consts).values)
        V = free_potential(g)
        diffs = []
        for dt in (0.1, 0.05, 0.025):
            full = CrankNicolson(V, dt, consts).step_values(psi)
            half = CrankNicolson(V, dt / 2, consts)
            diffs.append(np.abs(full - half.step_values(half.step_values(psi))).max())
        ratios = np.array(diffs[:-1]) / np.array(diffs[1:])
        assert np.all(np.abs(ratios - 8) < 0.6), ratios

    def test_rejects_2d(self, consts):
        g = make_grid(2, (-5, 5), 16)
        with pytest.raises(GridError):
            CrankNicolson(free_potential(g), 1e-3, consts)

    def test_rejects_bad_dt(self, grid, consts):
        with pytest.raises(ValueError):
            CrankNicolson(free_potential(grid), 0.0, consts)

    def test_grid_mismatch(self, grid, consts):
        psi = gaussian_wavefunction(make_grid(1, (-20, 20), 100), 1.0)
        with pytest.raises(GridError):
            crank_nicolson_step(psi, free_potential(grid), 1e-3, consts)


class TestEvolve:
    def test_minimum_trajectory(self, grid, consts):
        psi = gaussian_wavefunction(grid, 1.0)
        tr = evolve(psi, free_potential(grid), 1e-3, 20, 10, consts)
        assert len(tr) == 3
        np.testing.assert_allclose(tr.times, [0.0, 0.01, 0.02], rtol=1e-15)

    def test_too_few_steps(self, grid, consts):
        with pytest.raises(ValueError):
            evolve(gaussian_wavefunction(grid, 1.0), free_potential(grid), 1e-3, 19, 10, consts)

    def test_free_packet_fisher(self, consts):
        g = make_grid(1, (-40, 40), 2048)
        tr = evolve(gaussian_wavefunction(g, 1.0), free_potential(g), 1e-3, 1000, 100, consts)
        assert abs(tr.times[-1] - 1.0) < 1e-12
        F = fisher_information(tr.density(len(tr) - 1)).value
        assert abs(F - 0.8) <= 1e-4 * 0.8

    def test_free_packet_oracle(self, consts):
        g = make_grid(1, (-40, 40), 2048)
        tr = evolve(gaussian_wavefunction(g, 1.0), free_potential(g), 1e-3, 1000, 100, consts)
        exact = analytic_free_gaussian(1.0, 0.0, 0.0, 1.0, consts, g)
        assert np.abs(tr.density(len(tr) - 1).values - exact.values).max() <= 1e-4

    def test_norm_conservation(self, grid, consts):
        psi = gaussian_wavefunction(grid, 1.0, -1.0, 1.5, consts)
        tr = evolve(psi, free_potential(grid), 1e-3, 2000, 100, consts)
        assert np.abs(tr.norms() - 1).max() <= 1e-10

    def test_norm_conservation_ho(self, consts):
        g = make_grid(1, (-20, 20), 2048)
        psi = gaussian_wavefunction(g, HO_SIGMA, 2.0, 0.0, consts)
        tr = evolve(psi, harmonic_potential(g, consts), 1e-3, 2000, 100, consts)
        assert np.abs(tr.norms() - 1).max() <= 1e-10

    def test_ho_ground_fisher_constant(self, consts):
        # the standard box leaves a 1.7e-5 spatial error; 1e-6 needs h ~ 1e-3
        g = make_grid(1, (-10, 10), 16385)
        psi = gaussian_wavefunction(g, HO_SIGMA, 0.0, 0.0, consts)
        tr = evolve(psi, harmonic_potential(g, consts), 1e-3, 1000, 100, consts)
        F = np.array([fisher_information(P).value for P in tr.densities()])
        assert np.abs(F - 2.0).max() <= 1e-6

    def test_coherent_fisher_invariance(self, consts):
        g = make_grid(1, (-10, 10), 8193)
        psi = gaussian_wavefunction(g, HO_SIGMA, 1.0, 0.0, consts)
        steps = int(round(2 * math.pi / 1e-3))
        tr = evolve(psi, harmonic_potential(g, consts), 1e-3, steps, 200, consts)
        assert tr.times[-1] >= 2 * math.pi - 0.2
        F = np.array([fisher_information(P).value for P in tr.densities()])
        assert np.abs(F / 2.0 - 1).max() <= 1e-4

    def test_coherent_follows_classical_path(self, consts):
        g = make_grid(1, (-20, 20), 2048)
        psi = gaussian_wavefunction(g, HO_SIGMA, 1.0, 0.0, consts)
        tr = evolve(psi, harmonic_potential(g, consts), 1e-3, 3142, 1571, consts)
        mean, var = center_and_variance(tr.density(2))
        assert abs(mean + 1.0) < 1e-3
        assert abs(var - 0.5) < 1e-3


class TestTrajectory:
    def test_needs_three_frames(self, grid):
        psi = gaussian_wavefunction(grid, 1.0)
        with pytest.raises(ValueError):
            Trajectory(grid, 0.0, 0.1, (psi, psi))

    def test_triple_bounds(self, grid, consts):
        tr = evolve(gaussian_wavefunction(grid, 1.0), free_potential(grid), 1e-3, 20, 10, consts)
        assert len(tr.triple(1)) == 3
        with pytest.raises(IndexError):
            tr.triple(0)
        with pytest.raises(IndexError):
            tr.triple(2)


class TestAnalytic:
    def test_t0(self, grid, consts):
        P = analytic_free_gaussian(1.3, 0.5, 2.0, 0.0, consts, grid)
        mean, var = center_and_variance(P)
        assert abs(mean - 0.5) < 1e-12 and abs(var - 1.69) < 1e-10

    def test_spreading(self, consts):
        assert math.isclose(free_gaussian_width(1.0, 1.0, consts) ** 2, 1.25, rel_tol=1e-15)

    def test_spreading_density(self, grid, consts):
        _, var = center_and_variance(analytic_free_gaussian(1.0, 0.0, 0.0, 1.0, consts, grid))
        assert abs(var - 1.25) < 1e-10

    def test_drift(self, grid, consts):
        mean, _ = center_and_variance(analytic_free_gaussian(1.0, 0.3, 1.0, 2.0, consts, grid))
        assert abs(mean - 2.3) < 1e-12

    def test_ho_ground(self, grid, consts):
        P = analytic_ho_density("ground", 0.7, consts, grid)
        _, var = center_and_variance(P)
        assert abs(var - 0.5) < 1e-10
        assert abs(fisher_information(P).value - 2.0) <= 2e-6

    def test_coherent_half_period(self, grid, consts):
        mean, _ = center_and_variance(analytic_ho_density("coherent", math.pi, consts, grid, x0=1.0))
        assert abs(mean + 1.0) < 1e-12

    @pytest.mark.parametrize("t", [0.0, 0.4, 1.9, 3.3, 5.0])
    def test_coherent_fisher(self, grid, consts, t):
        P = analytic_ho_density("coherent", t, consts, grid, x0=1.0)
        assert abs(fisher_information(P).value - 2.0) <= 2e-6

    def test_unknown_kind(self, grid, consts):
        with pytest.raises(ValueError):
            analytic_ho_density("squeezed", 0.0, consts, grid)

    def test_nondefault_constants(self, grid):
        c = PhysicalConstants(hbar=1.0, mass=2.0, omega=0.5)
        _, var = center_and_variance(analytic_ho_density("ground", 0.0, c, grid))
        assert abs(var - 1.0 / (2 * 2.0 * 0.5)) < 1e-10
