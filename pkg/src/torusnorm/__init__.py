"""Numerical laboratory for stable norms, Mather beta-functions, and
metric rigidity diagnostics on the 2-torus."""

__version__ = "0.1.0"

from .errors import (
    ConvergenceError,
    DegenerateMetricError,
    NullClassError,
    SpecError,
    TorusNormError,
)
from .fields import ExprField1D, ExprField2D, GridField1D, GridField2D
from .loops import (
    DiscreteLoop,
    HomologyClass,
    energy_gradient,
    init_loop,
    loop_energy,
    loop_length,
    resample,
)
from .metrics import (
    ConformalMetric,
    FlatMetric,
    GeneralMetric,
    LiouvilleMetric,
    MetricSpec,
    TangentSample,
    distortion_constant,
    fiber_distortion,
    load_metric,
    metric_eval,
    metric_from_dict,
)
from .minimizer import MinOptions, MinResult, distinct_minima, minimize_energy
from .beta import (
    BetaResult,
    batch_beta,
    beta_rational,
    check_norm_axioms,
    norm_ball,
    stable_norm_rational,
)
from .rigidity import (
    ComparisonEntry,
    ComparisonReport,
    MatherSample,
    compare_at_class,
    flat_rigidity_check,
    mather_sample,
    projected_coverage,
    rigidity_scan,
)
from .mane import (
    ManeBetaResult,
    TonelliSpec,
    average_action,
    beta_mane,
    load_tonelli,
    mane_inequality_check,
    mane_rigidity_check,
    normalize_potential,
    tonelli_from_dict,
)

__all__ = [
    "__version__",
    "BetaResult",
    "ComparisonEntry",
    "ComparisonReport",
    "ConformalMetric",
    "ConvergenceError",
    "DegenerateMetricError",
    "DiscreteLoop",
    "ExprField1D",
    "ExprField2D",
    "FlatMetric",
    "GeneralMetric",
    "GridField1D",
    "GridField2D",
    "HomologyClass",
    "LiouvilleMetric",
    "ManeBetaResult",
    "MatherSample",
    "MetricSpec",
    "MinOptions",
    "MinResult",
    "NullClassError",
    "SpecError",
    "TangentSample",
    "TonelliSpec",
    "TorusNormError",
    "average_action",
    "batch_beta",
    "beta_mane",
    "beta_rational",
    "check_norm_axioms",
    "compare_at_class",
    "distinct_minima",
    "distortion_constant",
    "energy_gradient",
    "fiber_distortion",
    "flat_rigidity_check",
    "init_loop",
    "load_metric",
    "load_tonelli",
    "loop_energy",
    "loop_length",
    "mane_inequality_check",
    "mane_rigidity_check",
    "mather_sample",
    "metric_eval",
    "metric_from_dict",
    "minimize_energy",
    "norm_ball",
    "normalize_potential",
    "projected_coverage",
    "resample",
    "rigidity_scan",
    "stable_norm_rational",
    "tonelli_from_dict",
]
