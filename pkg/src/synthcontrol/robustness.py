"""Leave-one-out donor robustness and decay-rate sensitivity sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .effects import gaps
from .errors import StudyError
from .estimator import DEFAULT_MAX_ITER, DEFAULT_TOL, fit_study, time_weights
from .inference import p_value_ratio, run_placebos
from .panel import Panel
from .study import MIN_DONORS, StudySpec, build_study, pre_period_index, study_from_pool

__all__ = [
    "DEFAULT_ALPHA_GRID",
    "DEFAULT_LOO_MIN_WEIGHT",
    "LooResult",
    "AlphaSweepRow",
    "att_change_pct",
    "leave_one_out",
    "alpha_sweep",
]

# decay-stability grid: the sweep endpoints plus the default rate
DEFAULT_ALPHA_GRID = (0.003, 0.005, 0.01)
DEFAULT_LOO_MIN_WEIGHT = 0.05


@dataclass(frozen=True)
class LooResult:
    """Refit with one donor removed. infeasible marks pools that would
    drop below the donor minimum; its numeric fields are NaN."""

    excluded: str
    att: float
    att_change_pct: float
    weights: np.ndarray | None
    donor_labels: tuple[str, ...]
    infeasible: bool = False


@dataclass(frozen=True)
class AlphaSweepRow:
    alpha: float
    att: float
    rmspe_pre: float
    p_ratio: float | None = None


def att_change_pct(att: float, baseline: float) -> float:
    """Absolute percent change of the ATT against the baseline ATT."""
    if baseline == 0:
        return math.nan
    return 100.0 * abs(att - baseline) / abs(baseline)


def _fit_effects(panel, spec, treated, pool, tol, max_iter):
    data = study_from_pool(panel, spec, treated, pool)
    tw = time_weights(pre_period_index(spec), spec.alpha)
    fit = fit_study(data, tw, tol=tol, max_iter=max_iter)
    return fit, gaps(data, fit.weights)


def leave_one_out(
    panel: Panel,
    spec: StudySpec,
    targets: str | Sequence[str] = "top",
    min_weight: float = DEFAULT_LOO_MIN_WEIGHT,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[LooResult, ...]:
    """Refit with influential donors removed, one at a time.

    targets: "top" removes only the highest-weight donor; "all" sweeps
    every donor whose baseline weight is at least min_weight; otherwise
    an explicit iterable of donor labels (each must be in the screened
    pool).
    """
    base = build_study(panel, spec)
    tw = time_weights(pre_period_index(spec), spec.alpha)
    base_fit = fit_study(base, tw, tol=tol, max_iter=max_iter)
    base_att = gaps(base, base_fit.weights).att

    pool = base.donor_labels
    w = base_fit.weights
    if targets == "top":
        chosen = [pool[int(np.argmax(w))]]
    elif targets == "all":
        order = np.argsort(-w, kind="stable")
        chosen = [pool[int(i)] for i in order if w[int(i)] >= min_weight]
    else:
        chosen = list(targets)
        for unit in chosen:
            if unit not in pool:
                raise StudyError(f"leave-one-out target {unit!r} not in donor pool")

    results = []
    for unit in chosen:
        reduced = tuple(u for u in pool if u != unit)
        if len(reduced) < MIN_DONORS:
            results.append(
                LooResult(
                    excluded=unit,
                    att=math.nan,
                    att_change_pct=math.nan,
                    weights=None,
                    donor_labels=reduced,
                    infeasible=True,
                )
            )
            continue
        fit, effects = _fit_effects(panel, spec, spec.treated, reduced, tol, max_iter)
        results.append(
            LooResult(
                excluded=unit,
                att=effects.att,
                att_change_pct=att_change_pct(effects.att, base_att),
                weights=fit.weights,
                donor_labels=reduced,
            )
        )
    return tuple(results)


def alpha_sweep(
    panel: Panel,
    spec: StudySpec,
    alphas: Iterable[float] = DEFAULT_ALPHA_GRID,
    with_placebos: bool = False,
    workers: int = 1,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> tuple[AlphaSweepRow, ...]:
    """One full fit per decay rate, same windows and screened pool.

    Placebo p-values are costly (J + 1 fits per rate) and off by default.
    """
    rows = []
    for alpha in alphas:
        spec_a = replace(spec, alpha=float(alpha))
        base = build_study(panel, spec_a)
        tw = time_weights(pre_period_index(spec_a), spec_a.alpha)
        fit = fit_study(base, tw, tol=tol, max_iter=max_iter)
        effects = gaps(base, fit.weights)
        p_ratio = None
        if with_placebos:
            placebos = run_placebos(
                panel, spec_a, tol=tol, max_iter=max_iter, workers=workers
            )
            p_ratio = float(p_value_ratio(placebos).p)
        rows.append(
            AlphaSweepRow(
                alpha=spec_a.alpha,
                att=effects.att,
                rmspe_pre=effects.rmspe_pre,
                p_ratio=p_ratio,
            )
        )
    return tuple(rows)
