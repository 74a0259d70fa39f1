"""Fluctuation transforms for random walks built from dependent increment pairs.

The walk steps are differences B - A of a nonnegative pair with joint
Laplace-Stieltjes transform h(s1, s2).  The package evaluates the transforms
of the first-passage functionals (number of steps, accumulated B at passage,
overshoot) and of the running maximum, by contour quadrature for general
kernels and by root products for rational ones, with Monte Carlo cross-checks.
"""

from .contour import (
    ContourSpec,
    TransformValue,
    boundary_values,
    log_branch,
    pv_axis,
    pv_axis_singular,
)
from .errors import (
    BranchCutHit,
    CountMismatch,
    DomainError,
    EvalError,
    HoelderSuspect,
    InvalidSpec,
    NoConvergence,
    NonIntegerWinding,
    ParseError,
    PoleError,
    PreconditionViolated,
    StabilityError,
    UnsupportedModel,
    WalkfluctError,
    ZeroOnContour,
)
from .fluct import (
    WalkFunctionals,
    busy_period_rational,
    busy_period_transform,
    geometric_limit,
    idle_period_transform,
    invert_to_distribution,
    max_transform_rational,
    steps_pgf,
    steps_pgf_rational,
    transient_max_transform,
    walk_functionals,
    wienerhopf_factors,
)
from .model import (
    Deterministic,
    DistributionSpec,
    Erlang,
    Exponential,
    Hyperexponential,
    IncrementModel,
    RationalKernel,
    Uniform,
    build_markov_modulated,
    build_product_model,
    build_rational_custom,
    build_threshold_model,
    builtin_models,
    increment_char,
    lst_eval,
    sample_increment,
)
from .oracle import (
    AtomicMeasure2D,
    BVFunctionSpec,
    MCEstimate,
    default_cap,
    estimate_functional,
    max_n_estimate,
    spitzer_series,
    verify_hewitt_discrete,
)
from .roots import (
    RootReport,
    count_left_zeros,
    find_kernel_roots,
    verify_rouche,
)

__all__ = [
    "AtomicMeasure2D",
    "BVFunctionSpec",
    "BranchCutHit",
    "ContourSpec",
    "CountMismatch",
    "Deterministic",
    "DistributionSpec",
    "DomainError",
    "Erlang",
    "EvalError",
    "Exponential",
    "HoelderSuspect",
    "Hyperexponential",
    "IncrementModel",
    "InvalidSpec",
    "MCEstimate",
    "NoConvergence",
    "NonIntegerWinding",
    "ParseError",
    "PoleError",
    "PreconditionViolated",
    "RationalKernel",
    "RootReport",
    "StabilityError",
    "TransformValue",
    "Uniform",
    "UnsupportedModel",
    "WalkFunctionals",
    "WalkfluctError",
    "ZeroOnContour",
    "boundary_values",
    "build_markov_modulated",
    "build_product_model",
    "build_rational_custom",
    "build_threshold_model",
    "builtin_models",
    "busy_period_rational",
    "busy_period_transform",
    "count_left_zeros",
    "default_cap",
    "estimate_functional",
    "find_kernel_roots",
    "geometric_limit",
    "idle_period_transform",
    "increment_char",
    "invert_to_distribution",
    "log_branch",
    "lst_eval",
    "max_n_estimate",
    "max_transform_rational",
    "pv_axis",
    "pv_axis_singular",
    "sample_increment",
    "spitzer_series",
    "steps_pgf",
    "steps_pgf_rational",
    "transient_max_transform",
    "verify_hewitt_discrete",
    "verify_rouche",
    "walk_functionals",
    "wienerhopf_factors",
]
__version__ = "0.1.0"
