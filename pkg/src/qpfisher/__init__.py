"""Quantum potential, heat field and Fisher information on discretized densities."""

__version__ = "0.1.0"

from .core import (
    BoundaryMassError,
    DensityField,
    Grid,
    GridError,
    NumericalError,
    PhysicalConstants,
    QpFisherError,
    ScalarField,
    VectorField,
    WaveFunction,
    amplitude_from_density,
    density_from_wavefunction,
    integrate,
    make_grid,
    normalize_density,
)
from .diffops import StencilScheme, gradient, laplacian, log_density_score, time_derivative
from .quantities import (
    FisherResult,
    HeatField,
    density_from_heat,
    fisher_from_heat,
    fisher_information,
    heat_difference_from_ratio,
    heat_from_density,
    mean_quantum_potential,
    momentum_fluctuation,
    osmotic_velocity,
    quantum_potential_paper,
    quantum_potential_standard,
    total_energy_density,
)
from .evolution import (
    Potential,
    Trajectory,
    analytic_free_gaussian,
    analytic_ho_density,
    crank_nicolson_step,
    evolve,
)
from .identities import (
    IdentityReport,
    RelationId,
    check_dp_mu,
    check_fisher_representations,
    check_mean_qp_fisher,
    convergence_study,
    residual_eq_1_1,
    residual_gradient_relation,
    thermal_fisher_value,
    thermalized_qp_rhs,
)
