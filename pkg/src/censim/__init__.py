"""Single-index regression with right-censored responses."""

from .errors import (
    CensimError,
    DegenerateIndexError,
    EmptyCriterionError,
    EmptyNeighborhoodError,
    EmptySampleError,
    SingularInformationError,
    TailTruncationWarning,
    WeightSingularityError,
)
from .estimate import (
    FitConfig,
    FitResult,
    IndexParam,
    SearchRegion,
    criterion_sd,
    criterion_wls,
    fit,
    preliminary_fit,
    variance_plugin,
)
from .simulate import MseReport, SimulationConfig, dgp_sample, run_monte_carlo
from .smooth import (
    BandwidthRule,
    KernelSpec,
    LinkEstimate,
    TrimmingSpec,
    bandwidth,
    index_density,
    kernel_eval,
    link_fit,
    link_gradient,
    trimming_indicator,
)
from .survival import (
    CensoredSample,
    ContinuousCdf,
    Observation,
    StepCdf,
    WeightedSample,
    c_integral,
    empirical_cdf,
    ideal_weights,
    km_fit,
    km_weights,
)
from .transform import SyntheticSample, synthetic_transform

__all__ = [
    "BandwidthRule",
    "CensimError",
    "CensoredSample",
    "ContinuousCdf",
    "DegenerateIndexError",
    "EmptyCriterionError",
    "EmptyNeighborhoodError",
    "EmptySampleError",
    "FitConfig",
    "FitResult",
    "IndexParam",
    "KernelSpec",
    "LinkEstimate",
    "MseReport",
    "Observation",
    "SearchRegion",
    "SimulationConfig",
    "SingularInformationError",
    "StepCdf",
    "SyntheticSample",
    "TailTruncationWarning",
    "TrimmingSpec",
    "WeightSingularityError",
    "WeightedSample",
    "bandwidth",
    "c_integral",
    "criterion_sd",
    "criterion_wls",
    "dgp_sample",
    "empirical_cdf",
    "fit",
    "ideal_weights",
    "index_density",
    "kernel_eval",
    "km_fit",
    "km_weights",
    "link_fit",
    "link_gradient",
    "preliminary_fit",
    "run_monte_carlo",
    "synthetic_transform",
    "trimming_indicator",
    "variance_plugin",
]

__version__ = "0.1.0"
