"""Placebo-in-space permutation inference.

Every donor in the screened pool is refit as if it were the treated unit,
against the pool minus itself and minus the actual treated unit (whose
post-event series is contaminated and would bias placebo counterfactuals).
The treated unit's effect is then ranked inside the placebo distribution
under two metrics, with the finite-sample corrected p-value
(k + 1) / (J + 1) kept as an exact rational.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from functools import partial

from .effects import EffectSeries, gaps
from .errors import InferenceError, ParameterError, StudyError
from .estimator import DEFAULT_MAX_ITER, DEFAULT_TOL, fit_study, time_weights
from .panel import Panel
from .study import (
    MIN_DONORS,
    StudySpec,
    build_study,
    pre_period_index,
    study_from_pool,
)

__all__ = [
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
]


@dataclass(frozen=True)
class PlaceboEntry:
    unit: str
    effects: EffectSeries | None = None
    skipped: bool = False
    skip_reason: str | None = None


@dataclass(frozen=True)
class PlaceboSet:
    """One placebo fit per screened donor, plus the treated unit's own."""

    treated: str
    treated_entry: EffectSeries
    entries: tuple[PlaceboEntry, ...]

    def fitted(self) -> tuple[PlaceboEntry, ...]:
        return tuple(e for e in self.entries if not e.skipped)


@dataclass(frozen=True)
class GapTest:
    """Two-sided test on the magnitude of the average post-event gap."""

    k: int
    j: int
    p: Fraction


@dataclass(frozen=True)
class RatioTest:
    """Test on the post/pre RMSPE ratio; rank 1 is the largest ratio."""

    k: int
    j: int
    p: Fraction
    rank: int
    zero_fit_placebos: tuple[str, ...]


@dataclass(frozen=True)
class InferenceReport:
    """Both placebo tests, with p-values kept as exact rationals.

    j is the number of usable (non-skipped) placebos; the ratio test's
    denominator j_ratio additionally excludes placebos whose pre-window
    fit was exact, since their ratio is unbounded.
    """

    k_gap: int
    p_gap: Fraction
    k_ratio: int
    p_ratio: Fraction
    rank_ratio: int
    j: int
    j_ratio: int
    zero_fit_placebos: tuple[str, ...] = ()

    @property
    def p_gap_value(self) -> float:
        return render_p(self.p_gap)

    @property
    def p_ratio_value(self) -> float:
        return render_p(self.p_ratio)


def render_p(p: Fraction) -> float:
    """Exact rational rounded half-to-even at 4 decimals."""
    quantized = (Decimal(p.numerator) / Decimal(p.denominator)).quantize(
        Decimal("0.0001"), rounding=ROUND_HALF_EVEN
    )
    return float(quantized)


def _placebo_task(panel, spec, pool, tol, max_iter, unit):
    donors = tuple(u for u in pool if u != unit)
    if len(donors) < MIN_DONORS:
        return PlaceboEntry(
            unit,
            skipped=True,
            skip_reason=(
                f"donor pool below minimum: {len(donors)} of {MIN_DONORS} "
                "after removing the pseudo-treated unit"
            ),
        )
    pseudo = replace(spec, treated=unit)
    try:
        data = study_from_pool(panel, pseudo, unit, donors)
    except StudyError as err:
        return PlaceboEntry(unit, skipped=True, skip_reason=str(err))
    tw = time_weights(pre_period_index(pseudo), pseudo.alpha)
    fit = fit_study(data, tw, tol=tol, max_iter=max_iter)
    return PlaceboEntry(unit, effects=gaps(data, fit.weights))


def run_placebos(
    panel: Panel,
    spec: StudySpec,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    workers: int = 1,
) -> PlaceboSet:
    """Fit every screened donor as pseudo-treated.

    Entries come back in donor-pool order regardless of worker count, and
    each fit is a pure function of its inputs, so results are identical
    for any scheduling. Placebos that cannot be fit (pool too small) are
    recorded as skipped with a reason, never dropped.
    """
    base = build_study(panel, spec)
    tw = time_weights(pre_period_index(spec), spec.alpha)
    baseline_fit = fit_study(base, tw, tol=tol, max_iter=max_iter)
    treated_entry = gaps(base, baseline_fit.weights)

    pool = base.donor_labels
    task = partial(_placebo_task, panel, spec, pool, tol, max_iter)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            entries = tuple(executor.map(task, pool))
    else:
        entries = tuple(task(unit) for unit in pool)
    return PlaceboSet(treated=spec.treated, treated_entry=treated_entry,
                      entries=entries)


def p_value_gap(placebos: PlaceboSet) -> GapTest:
    """Count placebos whose |ATT| is at least the treated unit's."""
    fitted = placebos.fitted()
    j = len(fitted)
    if j == 0:
        raise InferenceError("no usable placebo fits")
    threshold = abs(placebos.treated_entry.att)
    k = sum(1 for e in fitted if abs(e.effects.att) >= threshold)
    return GapTest(k=k, j=j, p=Fraction(k + 1, j + 1))


def p_value_ratio(placebos: PlaceboSet) -> RatioTest:
    """Count placebos whose RMSPE ratio is at least the treated unit's.

    Placebos with an exact pre-window fit have an unbounded ratio; they
    are excluded from the comparison and reported.
    """
    if placebos.treated_entry.perfect_pre_fit:
        raise InferenceError(
            "treated unit has an exact pre-window fit; RMSPE ratio undefined"
        )
    fitted = placebos.fitted()
    zero_fit = tuple(e.unit for e in fitted if e.effects.perfect_pre_fit)
    usable = [e for e in fitted if not e.effects.perfect_pre_fit]
    j = len(usable)
    if j == 0:
        raise InferenceError("no usable placebo fits for the ratio test")
    threshold = placebos.treated_entry.rmspe_ratio
    k = sum(1 for e in usable if e.effects.rmspe_ratio >= threshold)
    return RatioTest(
        k=k, j=j, p=Fraction(k + 1, j + 1), rank=k + 1, zero_fit_placebos=zero_fit
    )


def inference_report(placebos: PlaceboSet) -> InferenceReport:
    gap_test = p_value_gap(placebos)
    ratio_test = p_value_ratio(placebos)
    return InferenceReport(
        k_gap=gap_test.k,
        p_gap=gap_test.p,
        k_ratio=ratio_test.k,
        p_ratio=ratio_test.p,
        rank_ratio=ratio_test.rank,
        j=gap_test.j,
        j_ratio=ratio_test.j,
        zero_fit_placebos=ratio_test.zero_fit_placebos,
    )


def filter_placebos(placebos: PlaceboSet, multiplier: float = 2.0) -> PlaceboSet:
    """Keep placebos whose pre RMSPE is at most multiplier times the
    treated unit's (inclusive boundary). Entry values are never altered;
    skipped entries are retained."""
    if not multiplier > 0:
        raise ParameterError(f"multiplier must be positive, got {multiplier}")
    bound = multiplier * placebos.treated_entry.rmspe_pre
    kept = tuple(
        e
        for e in placebos.entries
        if e.skipped or e.effects.rmspe_pre <= bound or math.isinf(multiplier)
    )
    return PlaceboSet(
        treated=placebos.treated,
        treated_entry=placebos.treated_entry,
        entries=kept,
    )
