"""Constrained-dynamics engine: ideal reactions in closed form, Lagrange
equations of the first and second kind, and machine checks of the theory's
structural identities."""

__version__ = "0.1.0"

from .smooth import ConfigurationMap, SmoothMap, State, fd_jacobian
from .system import (
    ForceField,
    MassMatrix,
    MechanicalSystem,
    build_point_mass_matrix,
    check_spd,
    energy,
)
from .constraints import (
    ConstraintSet,
    ManifoldResidual,
    RegularityError,
    VirtualBasis,
    check_regularity,
    constraint_jacobians,
    eval_constraints,
    lift_holonomic,
    manifold_residual,
    virtual_basis,
)
from .reactions import (
    ReactionResult,
    Realization,
    Reparametrization,
    gram_matrix,
    invariance_report,
    multipliers,
    reaction,
    reaction_with_realization,
    reparametrize,
    virtual_work,
)
from .integrate import (
    IntegratorConfig,
    OffManifoldError,
    Trajectory,
    acceleration,
    gde_residual,
    integrate_first_kind,
    integrate_with_realization,
    project_to_manifold,
)
from .generalized import (
    ChartError,
    Embedding,
    GeneralizedState,
    GeneralizedTrajectory,
    covariance_residual,
    decompose_T,
    generalized_forces,
    integrate_second_kind,
    lagrangian_derivative,
    lagrangian_derivative_from_pieces,
    match_trajectories,
    pullback_lagrangian,
    pushforward_state,
    random_polynomial_chart,
)
from .scenarios import Scenario, ScenarioError, catalog_scenario, parse_scenario, write_scenario

__all__ = [
    "ChartError",
    "ConfigurationMap",
    "ConstraintSet",
    "Embedding",
    "ForceField",
    "GeneralizedState",
    "GeneralizedTrajectory",
    "IntegratorConfig",
    "ManifoldResidual",
    "MassMatrix",
    "MechanicalSystem",
    "OffManifoldError",
    "ReactionResult",
    "Realization",
    "RegularityError",
    "Reparametrization",
    "Scenario",
    "ScenarioError",
    "SmoothMap",
    "State",
    "Trajectory",
    "VirtualBasis",
    "acceleration",
    "build_point_mass_matrix",
    "catalog_scenario",
    "check_regularity",
    "check_spd",
    "constraint_jacobians",
    "covariance_residual",
    "decompose_T",
    "energy",
    "eval_constraints",
    "fd_jacobian",
    "gde_residual",
    "generalized_forces",
    "gram_matrix",
    "integrate_first_kind",
    "integrate_second_kind",
    "integrate_with_realization",
    "invariance_report",
    "lagrangian_derivative",
    "lagrangian_derivative_from_pieces",
    "lift_holonomic",
    "manifold_residual",
    "match_trajectories",
    "multipliers",
    "parse_scenario",
    "project_to_manifold",
    "pullback_lagrangian",
    "pushforward_state",
    "random_polynomial_chart",
    "reaction",
    "reaction_with_realization",
    "reparametrize",
    "virtual_basis",
    "virtual_work",
    "write_scenario",
]
