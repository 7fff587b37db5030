"""Analytic test densities and their closed-form oracle values."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import DensityField, Grid, PhysicalConstants, WaveFunction
from .evolution import (
    Potential,
    analytic_free_gaussian,
    analytic_ho_density,
    free_gaussian_width,
    free_potential,
    gaussian_wavefunction,
    harmonic_potential,
)

__all__ = ["Gaussian", "HOGround", "HOCoherent", "FreePacket", "DensitySpec", "CATALOG"]


@dataclass(frozen=True)
class Gaussian:
    """Static Gaussian of standard deviation ``sigma`` (per axis)."""

    sigma: float = 1.0
    x0: float = 0.0
    kind = "gaussian"
    stationary = False

    def width(self, consts, t=0.0):
        return self.sigma

    def variance(self, consts, t=0.0):
        return self.sigma**2

    def density(self, grid: Grid, consts: PhysicalConstants, t: float = 0.0,
                quadrature: str = "trapezoid") -> DensityField:
        return analytic_free_gaussian(self.sigma, self.x0, 0.0, 0.0, consts, grid, quadrature)

    def wavefunction(self, grid, consts) -> WaveFunction:
        return gaussian_wavefunction(grid, self.sigma, self.x0, 0.0, consts)

    def potential(self, grid, consts) -> Potential:
        return free_potential(grid)


@dataclass(frozen=True)
class HOGround:
    kind = "ho_ground"
    stationary = True

    def width(self, consts, t=0.0):
        return math.sqrt(consts.hbar / (2.0 * consts.mass * consts.omega))

    def variance(self, consts, t=0.0):
        return consts.hbar / (2.0 * consts.mass * consts.omega)

    def density(self, grid, consts, t=0.0, quadrature="trapezoid"):
        return analytic_ho_density("ground", t, consts, grid, quadrature=quadrature)

    def wavefunction(self, grid, consts):
        return gaussian_wavefunction(grid, self.width(consts), 0.0, 0.0, consts)

    def potential(self, grid, consts):
        return harmonic_potential(grid, consts)


@dataclass(frozen=True)
class HOCoherent:
    """Coherent state released from rest at ``x0``."""

    x0: float = 1.0
    kind = "ho_coherent"
    stationary = False

    def width(self, consts, t=0.0):
        return math.sqrt(consts.hbar / (2.0 * consts.mass * consts.omega))

    def variance(self, consts, t=0.0):
        return consts.hbar / (2.0 * consts.mass * consts.omega)

    def density(self, grid, consts, t=0.0, quadrature="trapezoid"):
        return analytic_ho_density("coherent", t, consts, grid, self.x0, quadrature)

    def wavefunction(self, grid, consts):
        return gaussian_wavefunction(grid, self.width(consts), self.x0, 0.0, consts)

    def potential(self, grid, consts):
        return harmonic_potential(grid, consts)


@dataclass(frozen=True)
class FreePacket:
    sigma0: float = 1.0
    x0: float = 0.0
    p0: float = 0.0
    kind = "free_packet"
    stationary = False

    def width(self, consts, t=0.0):
        return free_gaussian_width(self.sigma0, t, consts)

    def variance(self, consts, t=0.0):
        tau = consts.hbar * t / (2.0 * consts.mass * self.sigma0**2)
        return self.sigma0**2 * (1.0 + tau**2)

    def density(self, grid, consts, t=0.0, quadrature="trapezoid"):
        return analytic_free_gaussian(self.sigma0, self.x0, self.p0, t, consts, grid, quadrature)

    def wavefunction(self, grid, consts):
        return gaussian_wavefunction(grid, self.sigma0, self.x0, self.p0, consts)

    def potential(self, grid, consts):
        return free_potential(grid)


DensitySpec = Gaussian | HOGround | HOCoherent | FreePacket


def oracle_values(spec: DensitySpec, consts: PhysicalConstants, t: float = 0.0, dim: int = 1) -> dict:
    """Closed-form values for an isotropic Gaussian with the state's width at t.

    Each entry is ``(value, tag)``; the tag says how the value was obtained.
    """
    s2 = spec.variance(consts, t)
    fisher = dim / s2
    hb2m = consts.hbar**2 / consts.mass
    out = {
        "variance": (s2, "DERIVED: width law of the analytic state"),
        "fisher": (fisher, "DERIVED: F = dim / sigma^2 for an isotropic Gaussian"),
        "mean_qp_paper": (-hb2m * fisher / 8.0, "DERIVED: -(hbar^2/8m) F"),
        "qp_paper_at_center": (-hb2m * dim / (4.0 * s2), "DERIVED: -(hbar^2/4m) dim / sigma^2"),
        "thermal_fisher_zero_c": (-2.0 * fisher, "DERIVED: -2F with c'(t) = 0"),
    }
    if spec.kind == "ho_ground":
        out["qp_standard_at_center"] = (
            consts.hbar * consts.omega * dim / 2.0,
            "DERIVED: hbar omega / 2 per dimension",
        )
    return out


CATALOG: dict[str, DensitySpec] = {
    "gaussian(sigma=1)": Gaussian(1.0),
    "gaussian(sigma=0.5)": Gaussian(0.5),
    "gaussian(sigma=2)": Gaussian(2.0),
    "ho_ground": HOGround(),
    "ho_coherent(x0=1)": HOCoherent(1.0),
    "free_packet(sigma0=1)": FreePacket(1.0),
}
