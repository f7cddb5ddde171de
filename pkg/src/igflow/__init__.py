"""Dually-flat information geometry, its gradient flows, and their Hamiltonian and
spacetime descriptions."""

from igflow.errors import (
    ConfigError,
    ConvergenceError,
    DomainBoundaryHit,
    DomainError,
    EvaluationError,
    IGFlowError,
    InsufficientSamples,
    SignatureError,
    SingularFieldError,
    StepLimitExceeded,
    ZeroVelocityError,
)
from igflow.flows import (
    IntegratorConfig,
    Trajectory,
    eta_flow,
    gaussian_closed_form,
    gaussian_flow,
    grad_rhs_eta,
    grad_rhs_theta,
    integrate,
    rf_flow,
    rf_rhs_theta,
    theta_flow,
)
from igflow.hamiltonian import (
    HamiltonianSpec,
    PhaseState,
    PhaseTrajectory,
    conformal_ig_hamiltonian,
    euler_homogeneity_defect,
    hamilton_rhs,
    ig_hamiltonian_eta,
    ig_hamiltonian_quadratic,
    ig_hamiltonian_theta,
    integrate_hamilton,
    null_lagrangian_residual,
    reparametrize,
    rf_ig_hamiltonian,
)
from igflow.manifold import (
    Chart,
    ChartPoint,
    DuallyFlatModel,
    DualModel,
    GaussianModel,
    PotentialModel,
    QuadraticModel,
    eta_point,
    theta_point,
)
from igflow.spacetime import (
    ADMMetric,
    RandersData,
    SpacetimeMomentum,
    ZermeloData,
    ig_to_adm,
    null_hamiltonian,
)

__version__ = "0.1.0"
