"""Monte Carlo laboratory for singlet spin-correlation experiments."""

from .engine import (
    ChshResult,
    HerbertResult,
    PairRecord,
    Report,
    RunConfig,
    RunResult,
    SamplingMode,
    chsh_pairs,
    chsh_statistic,
    correlation_scan,
    fresh_sample_chsh,
    herbert_scan,
    reproduce,
    run_experiment,
    shared_sample_chsh,
    standard_chsh_analyzers,
    substream,
)
from .geometry import (
    CapRegion,
    Direction,
    SmearingDistribution,
    SmearingKind,
    angle_between,
    cap_mean_projection,
    sample_direction,
    sample_directions,
)
from .models import (
    BellSignModel,
    ContextualSampler,
    FactorizedModel,
    HiddenVariableModel,
    SpinFunctionModel,
    bell_sign_model,
    contextual_sampler,
    factorized_model,
    lhv_correlation_exact,
    model_from_name,
)
from .quantum import (
    AnalyzerSpec,
    SettingPair,
    coincidence_probability,
    conditional_correlation,
    herbert_disagreement_qm,
    joint_detection_density,
    singlet_correlation,
    smeared_correlation,
)
from .stats import EstimateWithError, binomial_ci, mean_stderr, violation_zscore

__version__ = "0.1.0"

__all__ = [
    "AnalyzerSpec",
    "BellSignModel",
    "CapRegion",
    "ChshResult",
    "ContextualSampler",
    "Direction",
    "EstimateWithError",
    "FactorizedModel",
    "HerbertResult",
    "HiddenVariableModel",
    "PairRecord",
    "Report",
    "RunConfig",
    "RunResult",
    "SamplingMode",
    "SettingPair",
    "SmearingDistribution",
    "SmearingKind",
    "SpinFunctionModel",
    "angle_between",
    "bell_sign_model",
    "binomial_ci",
    "cap_mean_projection",
    "chsh_pairs",
    "chsh_statistic",
    "coincidence_probability",
    "conditional_correlation",
    "contextual_sampler",
    "correlation_scan",
    "factorized_model",
    "fresh_sample_chsh",
    "herbert_disagreement_qm",
    "herbert_scan",
    "joint_detection_density",
    "lhv_correlation_exact",
    "mean_stderr",
    "model_from_name",
    "reproduce",
    "run_experiment",
    "sample_direction",
    "sample_directions",
    "shared_sample_chsh",
    "singlet_correlation",
    "smeared_correlation",
    "standard_chsh_analyzers",
    "substream",
    "violation_zscore",
]
