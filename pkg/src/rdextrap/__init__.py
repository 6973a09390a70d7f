"""Bounds on extrapolated treatment effects in multi-cutoff RD designs."""

__version__ = "0.1.0"

from .bandwidth import BandwidthPlan, imse_bandwidth, mse_bandwidth
from .bounds import (
    BoundsCurve,
    CutoffPair,
    DIRECTION_DECREASING,
    DIRECTION_INCREASING,
    constant_bias_extrapolation,
    default_grid,
    dominance_diagnostic,
    multi_cutoff_bounds,
    sharp_bounds,
)
from .data import RdData, RdSample, Subsample, subsample
from .decision import (
    DecisionModelSpec,
    EffortSolution,
    PeriodicSineDensity,
    example1_effort,
    example1_spec,
    example2_spec,
    objective,
    periodicity_check,
    regression_curves,
    solve_effort_numeric,
)
from .estimators import FuzzyRdBounds, SharpRdBounds
from .fuzzy import FuzzyBoundsCurve, fuzzy_bounds, takeup_fit
from .inference import (
    PointwiseCI,
    UniformBand,
    excludes_zero,
    imbens_manski_critical,
    mammen_draws,
    pointwise_cis,
    uniform_band_fuzzy,
    uniform_band_sharp,
)
from .kernels import (
    KernelMoments,
    KernelSpec,
    equivalent_kernel_boundary,
    equivalent_kernel_interior,
    eval_kernel,
    moments,
)
from .locpoly import (
    LocalFit,
    bias_corrected_fit,
    density_estimate,
    fit_local_linear,
    fit_local_quadratic,
    variance_estimate,
)
from .simulation import (
    SimulationConfig,
    SimulationReport,
    generate_fuzzy,
    generate_sharp,
    run_monte_carlo,
)

__all__ = [
    "BandwidthPlan",
    "BoundsCurve",
    "CutoffPair",
    "DIRECTION_DECREASING",
    "DIRECTION_INCREASING",
    "DecisionModelSpec",
    "EffortSolution",
    "FuzzyBoundsCurve",
    "FuzzyRdBounds",
    "KernelMoments",
    "KernelSpec",
    "LocalFit",
    "PeriodicSineDensity",
    "PointwiseCI",
    "RdData",
    "RdSample",
    "SharpRdBounds",
    "SimulationConfig",
    "SimulationReport",
    "Subsample",
    "UniformBand",
    "bias_corrected_fit",
    "constant_bias_extrapolation",
    "default_grid",
    "density_estimate",
    "dominance_diagnostic",
    "equivalent_kernel_boundary",
    "equivalent_kernel_interior",
    "eval_kernel",
    "example1_effort",
    "example1_spec",
    "example2_spec",
    "excludes_zero",
    "fit_local_linear",
    "fit_local_quadratic",
    "fuzzy_bounds",
    "generate_fuzzy",
    "generate_sharp",
    "imbens_manski_critical",
    "imse_bandwidth",
    "mammen_draws",
    "moments",
    "mse_bandwidth",
    "multi_cutoff_bounds",
    "objective",
    "periodicity_check",
    "pointwise_cis",
    "regression_curves",
    "run_monte_carlo",
    "sharp_bounds",
    "solve_effort_numeric",
    "subsample",
    "takeup_fit",
    "uniform_band_fuzzy",
    "uniform_band_sharp",
    "variance_estimate",
]
