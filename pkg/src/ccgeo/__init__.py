"""Geodesics of conformally compact metrics integrated up to the conformal infinity."""
from .chart import (
    BoundaryPoint,
    FermiChart,
    A_shift,
    E_remainder,
    energy,
    k_covector,
    kappa,
    mu_matrix,
    transport_matrices,
    validate_chart,
)
from .errors import (
    CCGeoError,
    ChartIntegrityError,
    DiagnosticsError,
    DomainError,
    IllConditionedWindowError,
    InboundRegimeError,
    IntegrationFailure,
    NumericError,
)
from .examples import EpsilonFamily, make_epsilon_chart, make_hyperbolic_chart, make_warped_ah_chart
from .systems import CotangentState, TauState, from_tau_state, rhs_cogeodesic, rhs_tau_regular, to_tau_state
from .integrate import IntegratorConfig, Trajectory, integrate_t, integrate_tau_from_boundary, integrate_tau_to_boundary
from .shoot import ShootResult, boundary_shoot, endpoint_map, expmap_jacobian, rho_decay_rate
from .asymptotics import ExpansionFit, fit_expansion, is_asymptotically_hyperbolic, obstruction

__version__ = "0.1.0"

__all__ = [
    "BoundaryPoint",
    "FermiChart",
    "A_shift",
    "E_remainder",
    "energy",
    "k_covector",
    "kappa",
    "mu_matrix",
    "transport_matrices",
    "validate_chart",
    "CCGeoError",
    "ChartIntegrityError",
    "DiagnosticsError",
    "DomainError",
    "IllConditionedWindowError",
    "InboundRegimeError",
    "IntegrationFailure",
    "NumericError",
    "EpsilonFamily",
    "make_epsilon_chart",
    "make_hyperbolic_chart",
    "make_warped_ah_chart",
    "CotangentState",
    "TauState",
    "from_tau_state",
    "rhs_cogeodesic",
    "rhs_tau_regular",
    "to_tau_state",
    "IntegratorConfig",
    "Trajectory",
    "integrate_t",
    "integrate_tau_from_boundary",
    "integrate_tau_to_boundary",
    "ShootResult",
    "boundary_shoot",
    "endpoint_map",
    "expmap_jacobian",
    "rho_decay_rate",
    "ExpansionFit",
    "fit_expansion",
    "is_asymptotically_hyperbolic",
    "obstruction",
]
