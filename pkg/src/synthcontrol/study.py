"""Study design: treated unit, windows, and donor-pool screening.

A StudySpec binds a Panel to an event study. The intervention period is
the last pre-treatment month; the first post-treatment month is the one
after it. build_study screens the donor pool and extracts dense arrays
with no missing values, which is what the solver and everything
downstream consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError, StudyError
from .panel import Panel, Period, period_range

__all__ = [
    "MIN_DONORS",
    "DonorScreen",
    "StudySpec",
    "DonorExclusion",
    "StudyData",
    "build_study",
    "study_from_pool",
    "pre_period_index",
]

MIN_DONORS = 2


@dataclass(frozen=True)
class DonorScreen:
    """Donor-pool screening rules.

    completeness_required drops donors with any missing value inside the
    study window; when False, an incomplete donor is a hard error instead
    of a silent exclusion (downstream code never sees missing values
    either way). min_pre_correlation, when set, drops donors whose Pearson
    correlation with the treated pre-window series falls below it.
    """

    completeness_required: bool = True
    min_pre_correlation: float | None = None

    def __post_init__(self) -> None:
        r = self.min_pre_correlation
        if r is not None and not -1.0 <= r <= 1.0:
            raise ParameterError(f"min_pre_correlation must be in [-1, 1], got {r}")


@dataclass(frozen=True)
class StudySpec:
    """Treated unit, window bounds, decay rate, and screening rules."""

    treated: str
    intervention: Period
    pre_start: Period
    post_end: Period
    alpha: float = 0.005
    donor_screen: DonorScreen = field(default_factory=DonorScreen)

    def __post_init__(self) -> None:
        if not self.pre_start <= self.intervention:
            raise ParameterError(
                f"pre_start {self.pre_start} must not be after "
                f"intervention {self.intervention}"
            )
        if not self.intervention < self.post_end:
            raise ParameterError(
                f"post_end {self.post_end} must be after "
                f"intervention {self.intervention}"
            )
        if not (math.isfinite(self.alpha) and self.alpha >= 0.0):
            raise ParameterError(f"alpha must be finite and >= 0, got {self.alpha}")

    @property
    def periods_pre(self) -> tuple[Period, ...]:
        return period_range(self.pre_start, self.intervention)

    @property
    def periods_post(self) -> tuple[Period, ...]:
        return period_range(self.intervention.shift(1), self.post_end)


@dataclass(frozen=True)
class DonorExclusion:
    unit: str
    reason: str


@dataclass(frozen=True)
class StudyData:
    """Dense study arrays; guaranteed complete (no missing values).

    donors_pre/donors_post are (n_donors, n_periods) in stable donor
    order. donor_labels never contains the treated unit.
    """

    treated: str
    donor_labels: tuple[str, ...]
    periods_pre: tuple[Period, ...]
    periods_post: tuple[Period, ...]
    treated_pre: np.ndarray
    treated_post: np.ndarray
    donors_pre: np.ndarray
    donors_post: np.ndarray
    excluded: tuple[DonorExclusion, ...] = ()

    def __post_init__(self) -> None:
        for name in ("treated_pre", "treated_post", "donors_pre", "donors_post"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.treated in self.donor_labels:
            raise StudyError(f"treated unit {self.treated!r} also in donor pool")
        if self.n_donors < MIN_DONORS:
            raise StudyError(
                f"donor pool has {self.n_donors} units; need at least {MIN_DONORS}"
            )
        shapes_ok = (
            self.treated_pre.shape == (len(self.periods_pre),)
            and self.treated_post.shape == (len(self.periods_post),)
            and self.donors_pre.shape == (self.n_donors, len(self.periods_pre))
            and self.donors_post.shape == (self.n_donors, len(self.periods_post))
        )
        if not shapes_ok:
            raise StudyError("study arrays do not match the period windows")
        for name in ("treated_pre", "treated_post", "donors_pre", "donors_post"):
            if not np.isfinite(getattr(self, name)).all():
                raise StudyError(f"{name} contains missing or non-finite values")

    @property
    def n_donors(self) -> int:
        return len(self.donor_labels)


def pre_period_index(spec: StudySpec) -> np.ndarray:
    """Integer offsets for the pre window: last pre month is 0, earlier
    months are negative, strictly increasing by 1."""
    n = len(spec.periods_pre)
    return np.arange(-(n - 1), 1)


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        return math.nan
    return float(xc @ yc) / denom


def _window_columns(panel: Panel, spec: StudySpec) -> tuple[int, int, int]:
    """(start, split, stop) column indices: pre = [start, split),
    post = [split, stop)."""
    i, j = panel.column_range(spec.pre_start, spec.post_end)
    split = i + (spec.intervention - spec.pre_start) + 1
    return i, split, j


def _treated_row(panel: Panel, spec: StudySpec, treated: str, i: int, j: int) -> int:
    try:
        row = panel.row(treated)
    except KeyError:
        raise StudyError(f"treated unit {treated!r} not found in panel") from None
    miss = panel.missing[row, i:j]
    if miss.any():
        first = panel.periods[i + int(np.argmax(miss))]
        raise StudyError(f"treated unit {treated!r} is missing a value at {first}")
    return row


def build_study(panel: Panel, spec: StudySpec) -> StudyData:
    """Screen the donor pool and extract study arrays.

    Donor order follows panel order (stable filtering). Exclusions are
    recorded with their reason. Raises StudyError when the treated unit
    is incomplete inside the window or fewer than MIN_DONORS donors
    survive screening.
    """
    i, split, j = _window_columns(panel, spec)
    row = _treated_row(panel, spec, spec.treated, i, j)
    treated_pre = panel.values[row, i:split]
    treated_post = panel.values[row, split:j]

    screen = spec.donor_screen
    survivors: list[str] = []
    rows: list[int] = []
    excluded: list[DonorExclusion] = []
    for r, unit in enumerate(panel.units):
        if unit == spec.treated:
            continue
        miss = panel.missing[r, i:j]
        if miss.any():
            first = panel.periods[i + int(np.argmax(miss))]
            if not screen.completeness_required:
                raise StudyError(
                    f"donor {unit!r} is missing a value at {first} and "
                    "completeness screening is disabled"
                )
            excluded.append(DonorExclusion(unit, f"missing value at {first}"))
            continue
        if screen.min_pre_correlation is not None:
            r_pre = _pearson(panel.values[r, i:split], treated_pre)
            if math.isnan(r_pre):
                excluded.append(
                    DonorExclusion(unit, "zero variance over the pre window")
                )
                continue
            if r_pre < screen.min_pre_correlation:
                excluded.append(
                    DonorExclusion(
                        unit,
                        f"pre-window correlation {r_pre:.4f} below "
                        f"{screen.min_pre_correlation}",
                    )
                )
                continue
        survivors.append(unit)
        rows.append(r)

    if len(survivors) < MIN_DONORS:
        raise StudyError(
            f"only {len(survivors)} donors survive screening; "
            f"need at least {MIN_DONORS}"
        )
    return StudyData(
        treated=spec.treated,
        donor_labels=tuple(survivors),
        periods_pre=spec.periods_pre,
        periods_post=spec.periods_post,
        treated_pre=treated_pre,
        treated_post=treated_post,
        donors_pre=panel.values[rows, i:split],
        donors_post=panel.values[rows, split:j],
        excluded=tuple(excluded),
    )


def study_from_pool(
    panel: Panel,
    spec: StudySpec,
    treated: str,
    donor_labels: tuple[str, ...],
) -> StudyData:
    """Extract study arrays for a caller-fixed donor pool.

    Used by placebo and leave-one-out refits, where the pool is the
    already-screened baseline pool minus specific units and must not be
    re-screened. Completeness is still verified; an incomplete unit is a
    StudyError.
    """
    i, split, j = _window_columns(panel, spec)
    row = _treated_row(panel, spec, treated, i, j)
    rows = []
    for unit in donor_labels:
        try:
            r = panel.row(unit)
        except KeyError:
            raise StudyError(f"donor {unit!r} not found in panel") from None
        miss = panel.missing[r, i:j]
        if miss.any():
            first = panel.periods[i + int(np.argmax(miss))]
            raise StudyError(f"donor {unit!r} is missing a value at {first}")
        rows.append(r)
    return StudyData(
        treated=treated,
        donor_labels=tuple(donor_labels),
        periods_pre=spec.periods_pre,
        periods_post=spec.periods_post,
        treated_pre=panel.values[row, i:split],
        treated_post=panel.values[row, split:j],
        donors_pre=panel.values[rows, i:split],
        donors_post=panel.values[rows, split:j],
    )
