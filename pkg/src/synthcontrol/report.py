"""Report assembly and flat-file emission.

Everything numeric lands in CSVs at full floating precision (shortest
round-trip representation), so reruns with identical inputs produce
byte-identical data files. report.json is a human-oriented view over the
CSVs; it is the only artifact carrying a timestamp, and it displays
currency amounts rounded to whole dollars alongside the exact values.
"""

from __future__ import annotations

import csv
import hashlib
import math

import numpy as np

from .effects import EffectSeries
from .estimator import FitResult
from .inference import InferenceReport, PlaceboSet
from .robustness import AlphaSweepRow, LooResult
from .study import StudyData, StudySpec

__all__ = [
    "WEIGHT_TABLE_CUTOFF",
    "round_dollars",
    "weight_table",
    "write_weights_csv",
    "write_gaps_csv",
    "write_placebos_csv",
    "write_placebo_gaps_csv",
    "write_ratio_ranking_csv",
    "write_loo_csv",
    "write_alpha_sweep_csv",
    "build_report",
    "sha256_file",
]

# donors at or above this share get their own weight-table row
WEIGHT_TABLE_CUTOFF = 0.05


def _fmt(value) -> str:
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return ""
    return repr(value)


def round_dollars(value: float) -> int:
    """Whole dollars, half away from zero."""
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _allocate_percent(shares) -> list[float]:
    """Two-decimal percentages that sum to exactly 100.00.

    Largest-remainder allocation over hundredths of a percent, so the
    display invariant holds regardless of how many rows there are.
    """
    shares = np.asarray(shares, dtype=np.float64)
    exact = shares * 10_000.0
    floors = np.floor(exact).astype(int)
    shortfall = 10_000 - int(floors.sum())
    order = np.argsort(-(exact - floors), kind="stable")
    for i in order[:shortfall]:
        floors[i] += 1
    return [f / 100.0 for f in floors]


def weight_table(
    labels, weights, cutoff: float = WEIGHT_TABLE_CUTOFF
) -> list[dict]:
    """Donor weight rows sorted descending, small donors aggregated.

    Donors below the cutoff collapse into a single "Others" row recording
    how many were aggregated and how many of those hold non-zero weight.
    """
    w = np.asarray(weights, dtype=np.float64)
    order = np.argsort(-w, kind="stable")
    named = [int(i) for i in order if w[i] >= cutoff]
    others = [int(i) for i in order if w[i] < cutoff]
    shares = [w[i] for i in named] + ([sum(w[i] for i in others)] if others else [])
    percents = _allocate_percent(shares)
    rows = [
        {"unit": labels[i], "weight": float(w[i]), "weight_pct": percents[k]}
        for k, i in enumerate(named)
    ]
    if others:
        rows.append(
            {
                "unit": "Others",
                "units_aggregated": len(others),
                "units_nonzero": int(sum(1 for i in others if w[i] > 0)),
                "weight": float(sum(w[i] for i in others)),
                "weight_pct": percents[-1],
            }
        )
    return rows


def _writer(path):
    return open(path, "w", newline="", encoding="utf-8")


def write_weights_csv(fit: FitResult, path) -> None:
    with _writer(path) as stream:
        out = csv.writer(stream)
        out.writerow(["unit", "weight"])
        for unit, weight in zip(fit.donor_labels, fit.weights):
            out.writerow([unit, _fmt(weight)])


def write_gaps_csv(study: StudyData, effects: EffectSeries, path) -> None:
    """Per-period treated, synthetic, and gap rows over both windows."""
    with _writer(path) as stream:
        out = csv.writer(stream)
        out.writerow(["period", "treated", "synthetic", "gap", "window"])
        for k, period in enumerate(study.periods_pre):
            treated = study.treated_pre[k]
            gap = effects.gaps_pre[k]
            out.writerow(
                [str(period), _fmt(treated), _fmt(treated - gap), _fmt(gap), "pre"]
            )
        for k, period in enumerate(study.periods_post):
            treated = study.treated_post[k]
            gap = effects.gaps_post[k]
            out.writerow(
                [str(period), _fmt(treated), _fmt(treated - gap), _fmt(gap), "post"]
            )


def write_placebos_csv(placebos: PlaceboSet, path) -> None:
    with _writer(path) as stream:
        out = csv.writer(stream)
        out.writerow(
            [
                "unit",
                "att",
                "rmspe_pre",
                "rmspe_post",
                "rmspe_ratio",
                "skipped",
                "skip_reason",
            ]
        )
        for entry in placebos.entries:
            if entry.skipped:
                out.writerow([entry.unit, "", "", "", "", "true", entry.skip_reason])
            else:
                e = entry.effects
                out.writerow(
                    [
                        entry.unit,
                        _fmt(e.att),
                        _fmt(e.rmspe_pre),
                        _fmt(e.rmspe_post),
                        _fmt(e.rmspe_ratio),
                        "false",
                        "",
                    ]
                )


def write_placebo_gaps_csv(placebos: PlaceboSet, spec: StudySpec, path) -> None:
    """Per-period gap columns for the treated unit and every fitted
    placebo, plus the 5th/95th percentiles of the placebo distribution
    (linear interpolation between order statistics)."""
    fitted = placebos.fitted()
    periods = list(spec.periods_pre) + list(spec.periods_post)
    windows = ["pre"] * len(spec.periods_pre) + ["post"] * len(spec.periods_post)
    treated_gaps = np.concatenate(
        [placebos.treated_entry.gaps_pre, placebos.treated_entry.gaps_post]
    )
    placebo_gaps = [
        np.concatenate([e.effects.gaps_pre, e.effects.gaps_post]) for e in fitted
    ]
    with _writer(path) as stream:
        out = csv.writer(stream)
        out.writerow(
            ["period", "window", placebos.treated]
            + [e.unit for e in fitted]
            + ["p05", "p95"]
        )
        for t, (period, window) in enumerate(zip(periods, windows)):
            row = [str(period), window, _fmt(treated_gaps[t])]
            row += [_fmt(g[t]) for g in placebo_gaps]
            if placebo_gaps:
                column = np.array([g[t] for g in placebo_gaps])
                lo, hi = np.percentile(column, [5.0, 95.0])
                row += [_fmt(lo), _fmt(hi)]
            else:
                row += ["", ""]
            out.writerow(row)


def write_ratio_ranking_csv(placebos: PlaceboSet, path) -> None:
    """All fitted units sorted by RMSPE ratio, largest first."""
    rows = [(placebos.treated, placebos.treated_entry.rmspe_ratio, True)]
    rows += [(e.unit, e.effects.rmspe_ratio, False) for e in placebos.fitted()]
    rows.sort(key=lambda r: (-r[1], r[0]))
    with _writer(path) as stream:
        out = csv.writer(stream)
        out.writerow(["unit", "rmspe_ratio", "is_treated"])
        for unit, ratio, is_treated in rows:
            out.writerow([unit, _fmt(ratio), "true" if is_treated else "false"])


def write_loo_csv(results, path) -> None:
    with _writer(path) as stream:
        out = csv.writer(stream)
        out.writerow(["excluded", "att", "att_change_pct", "infeasible"])
        for r in results:
            out.writerow(
                [
                    r.excluded,
                    _fmt(r.att),
                    _fmt(r.att_change_pct),
                    "true" if r.infeasible else "false",
                ]
            )


def write_alpha_sweep_csv(rows, path) -> None:
    with _writer(path) as stream:
        out = csv.writer(stream)
        out.writerow(["alpha", "att", "rmspe_pre", "p_ratio"])
        for r in rows:
            out.writerow([_fmt(r.alpha), _fmt(r.att), _fmt(r.rmspe_pre),
                          _fmt(r.p_ratio)])


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def _effects_block(study: StudyData, effects: EffectSeries) -> dict:
    return {
        "att": effects.att,
        "att_dollars": round_dollars(effects.att),
        "rmspe_pre": effects.rmspe_pre,
        "rmspe_pre_relative": _json_safe(effects.rmspe_pre_relative),
        "rmspe_post": effects.rmspe_post,
        "rmspe_ratio": _json_safe(effects.rmspe_ratio),
        "gaps_post": [
            {
                "period": str(p),
                "gap": float(g),
                "gap_dollars": round_dollars(float(g)),
            }
            for p, g in zip(study.periods_post, effects.gaps_post)
        ],
    }


def _inference_block(report: InferenceReport) -> dict:
    # unreduced (k+1)/(J+1) strings; equal to the Fraction values exactly
    return {
        "p_gap": f"{report.k_gap + 1}/{report.j + 1}",
        "p_gap_value": report.p_gap_value,
        "k_gap": report.k_gap,
        "p_ratio": f"{report.k_ratio + 1}/{report.j_ratio + 1}",
        "p_ratio_value": report.p_ratio_value,
        "k_ratio": report.k_ratio,
        "rank_ratio": report.rank_ratio,
        "j": report.j,
        "j_ratio": report.j_ratio,
        "zero_fit_placebos": list(report.zero_fit_placebos),
    }


def build_report(
    spec: StudySpec,
    study: StudyData,
    fit: FitResult,
    effects: EffectSeries,
    inference: InferenceReport | None = None,
    filtered_inference: InferenceReport | None = None,
    filter_multiplier: float | None = None,
    loo: tuple[LooResult, ...] | None = None,
    sweep: tuple[AlphaSweepRow, ...] | None = None,
    solver: dict | None = None,
    provenance: dict | None = None,
) -> dict:
    """Assemble the run report; every number is recomputable from the
    emitted CSVs."""
    report = {
        "study": {
            "treated": spec.treated,
            "intervention": str(spec.intervention),
            "pre_start": str(spec.pre_start),
            "post_end": str(spec.post_end),
            "alpha": spec.alpha,
            "completeness_required": spec.donor_screen.completeness_required,
            "min_pre_correlation": spec.donor_screen.min_pre_correlation,
        },
        "donor_pool": {
            "n_donors": study.n_donors,
            "excluded": [
                {"unit": e.unit, "reason": e.reason} for e in study.excluded
            ],
        },
        "fit": {
            "objective": fit.objective,
            "iterations": fit.iterations,
            "converged": fit.converged,
            **(solver or {}),
        },
        "weight_table": weight_table(fit.donor_labels, fit.weights),
        "effects": _effects_block(study, effects),
        "inference": None if inference is None else _inference_block(inference),
    }
    if filtered_inference is not None or filter_multiplier is not None:
        report["inference_filtered"] = {
            "multiplier": filter_multiplier,
            **(
                {}
                if filtered_inference is None
                else _inference_block(filtered_inference)
            ),
        }
    report["robustness"] = {
        "leave_one_out": None
        if loo is None
        else [
            {
                "excluded": r.excluded,
                "att": _json_safe(r.att),
                "att_change_pct": _json_safe(r.att_change_pct),
                "infeasible": r.infeasible,
            }
            for r in loo
        ],
        "alpha_sweep": None
        if sweep is None
        else [
            {
                "alpha": r.alpha,
                "att": r.att,
                "rmspe_pre": r.rmspe_pre,
                "p_ratio": r.p_ratio,
            }
            for r in sweep
        ],
    }
    report["provenance"] = provenance or {}
    return report
