"""Per-period gaps, ATT, and RMSPE diagnostics for a fitted study.

All RMSPE figures here are unweighted, even when the solver loss used
time-decay weights: the pre/post ratio is compared across units, so a
common weightless definition is used throughout, and the decay affects
only the solver loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .study import StudyData

__all__ = ["EffectSeries", "rmspe", "gaps", "relative_pre_rmspe"]


@dataclass(frozen=True)
class EffectSeries:
    """Gap series and summary statistics for one fitted unit.

    rmspe_ratio is +inf, with perfect_pre_fit set, when the pre-window
    fit is exact; rmspe_pre_relative is the pre RMSPE as a fraction of
    the unit's mean pre-window level (NaN when that mean is not
    positive).
    """

    gaps_pre: np.ndarray
    gaps_post: np.ndarray
    att: float
    rmspe_pre: float
    rmspe_post: float
    rmspe_ratio: float
    rmspe_pre_relative: float
    perfect_pre_fit: bool = False

    def __post_init__(self) -> None:
        for name in ("gaps_pre", "gaps_post"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)


def rmspe(residuals) -> float:
    """Root mean squared prediction error, unweighted."""
    r = np.asarray(residuals, dtype=np.float64)
    if r.size == 0:
        raise ParameterError("rmspe of an empty vector is undefined")
    return math.sqrt(float(r @ r) / r.size)


def gaps(study: StudyData, weights) -> EffectSeries:
    """Gap series (treated minus synthetic) over both windows.

    The ATT is the arithmetic mean of the post-window gaps.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (study.n_donors,):
        raise ParameterError(
            f"{w.size} weights for {study.n_donors} donors"
        )
    gaps_pre = study.treated_pre - study.donors_pre.T @ w
    gaps_post = study.treated_post - study.donors_post.T @ w
    rmspe_pre = rmspe(gaps_pre)
    rmspe_post = rmspe(gaps_post)
    perfect = rmspe_pre == 0.0
    mean_level = float(study.treated_pre.mean())
    return EffectSeries(
        gaps_pre=gaps_pre,
        gaps_post=gaps_post,
        att=float(gaps_post.mean()),
        rmspe_pre=rmspe_pre,
        rmspe_post=rmspe_post,
        rmspe_ratio=math.inf if perfect else rmspe_post / rmspe_pre,
        rmspe_pre_relative=rmspe_pre / mean_level if mean_level > 0 else math.nan,
        perfect_pre_fit=perfect,
    )


def relative_pre_rmspe(effects: EffectSeries, study: StudyData) -> float:
    """Pre RMSPE as a fraction of the treated unit's mean pre-window level."""
    mean_level = float(study.treated_pre.mean())
    if mean_level <= 0:
        raise ParameterError(
            f"mean pre-treatment level must be positive, got {mean_level}"
        )
    return effects.rmspe_pre / mean_level
