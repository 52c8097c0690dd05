"""Exact front tracking for 1D convex conservation laws with Wasserstein error analysis."""

from .flux import (
    Burgers,
    ConjugatePair,
    Flux,
    PiecewiseLinearFlux,
    PowerFlux,
    flux_from_dict,
    flux_gap,
    interpolate_flux,
    legendre_transform,
    oleinik_a_sup,
    restricted_inverse,
)
from .harness import ConfigError, EocTable, StudyConfig, StudyResult, emit, eoc, run_study
from .metrics import (
    DistanceReport,
    distance_report,
    interpolation_check,
    primitive_sup,
    stability_bound_check,
    w1,
    winf,
    winf_contraction_check,
    winf_flux_stability_check,
    wp,
)
from .piecewise import (
    PiecewiseConstantFn,
    PiecewiseLinearFn,
    QuantileFn,
    l1_distance,
    lip_plus,
    mass,
    primitive,
    project_to_grid,
    pseudo_inverse,
    total_variation,
)
from .reference import ShockSolution, WedgeSolution, exact_shock_burgers, exact_wedge_burgers
from .solver import (
    FrontTrackingRun,
    RiemannFan,
    hopf_lax_primitive,
    inverse_primitive_formula,
    run,
    snapshot,
    solve_riemann,
)

__version__ = "0.1.0"

__all__ = [
    "Burgers",
    "ConfigError",
    "ConjugatePair",
    "distance_report",
    "DistanceReport",
    "emit",
    "eoc",
    "EocTable",
    "exact_shock_burgers",
    "exact_wedge_burgers",
    "Flux",
    "flux_from_dict",
    "flux_gap",
    "FrontTrackingRun",
    "hopf_lax_primitive",
    "interpolate_flux",
    "interpolation_check",
    "inverse_primitive_formula",
    "l1_distance",
    "legendre_transform",
    "lip_plus",
    "mass",
    "oleinik_a_sup",
    "PiecewiseConstantFn",
    "PiecewiseLinearFlux",
    "PiecewiseLinearFn",
    "PowerFlux",
    "primitive",
    "primitive_sup",
    "project_to_grid",
    "pseudo_inverse",
    "QuantileFn",
    "restricted_inverse",
    "RiemannFan",
    "run",
    "run_study",
    "ShockSolution",
    "snapshot",
    "solve_riemann",
    "stability_bound_check",
    "StudyConfig",
    "StudyResult",
    "total_variation",
    "w1",
    "WedgeSolution",
    "winf",
    "winf_contraction_check",
    "winf_flux_stability_check",
    "wp",
    "__version__",
]
