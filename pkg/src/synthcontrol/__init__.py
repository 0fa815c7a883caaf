"""Synthetic-control estimation toolkit for monthly panel data.

Fits a convex donor-weight counterfactual to a treated unit under a
time-decay-weighted pre-treatment loss, estimates post-treatment effects,
and performs placebo-in-space permutation inference with robustness
diagnostics.
"""

from .effects import EffectSeries, gaps, relative_pre_rmspe, rmspe
from .errors import (
    InferenceError,
    PanelFormatError,
    PanelValidationError,
    ParameterError,
    StudyError,
    SynthControlError,
    WindowRangeError,
)
from .estimator import (
    FitResult,
    SyntheticControl,
    TimeWeights,
    fit_study,
    kkt_gap,
    project_to_simplex,
    time_weights,
)
from .inference import (
    GapTest,
    InferenceReport,
    PlaceboEntry,
    PlaceboSet,
    RatioTest,
    filter_placebos,
    inference_report,
    p_value_gap,
    p_value_ratio,
    render_p,
    run_placebos,
)
from .panel import (
    Panel,
    PanelLayout,
    Period,
    load_long_panel,
    load_panel,
    period_range,
    slice_panel,
    write_long_csv,
    write_wide_csv,
)
from .robustness import (
    AlphaSweepRow,
    LooResult,
    alpha_sweep,
    att_change_pct,
    leave_one_out,
)
from .study import (
    DonorExclusion,
    DonorScreen,
    StudyData,
    StudySpec,
    build_study,
    pre_period_index,
    study_from_pool,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # panel
    "Period",
    "period_range",
    "Panel",
    "PanelLayout",
    "load_panel",
    "load_long_panel",
    "write_wide_csv",
    "write_long_csv",
    "slice_panel",
    # study
    "DonorScreen",
    "StudySpec",
    "DonorExclusion",
    "StudyData",
    "build_study",
    "study_from_pool",
    "pre_period_index",
    # solver
    "TimeWeights",
    "time_weights",
    "project_to_simplex",
    "kkt_gap",
    "SyntheticControl",
    "FitResult",
    "fit_study",
    # effects
    "EffectSeries",
    "rmspe",
    "gaps",
    "relative_pre_rmspe",
    # inference
    "PlaceboEntry",
    "PlaceboSet",
    "GapTest",
    "RatioTest",
    "InferenceReport",
    "render_p",
    "run_placebos",
    "p_value_gap",
    "p_value_ratio",
    "inference_report",
    "filter_placebos",
    # robustness
    "LooResult",
    "AlphaSweepRow",
    "att_change_pct",
    "leave_one_out",
    "alpha_sweep",
    # errors
    "SynthControlError",
    "ParameterError",
    "PanelFormatError",
    "PanelValidationError",
    "WindowRangeError",
    "StudyError",
    "InferenceError",
]
