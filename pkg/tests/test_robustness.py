import math

import numpy as np
import pytest

from synthcontrol import (
    ParameterError,
    StudyError,
    alpha_sweep,
    att_change_pct,
    build_study,
    fit_study,
    gaps,
    leave_one_out,
    pre_period_index,
    time_weights,
)

from conftest import combo_panel, price_panel
from test_study import spec_for


class TestAttChangePct:
    def test_headline_dollar_figures(self):
        # -32,125 baseline vs -29,801 after dropping the top donor
        change = att_change_pct(-29801.0, -32125.0)
        assert change == 100.0 * 2324.0 / 32125.0
        assert 7.23 < change < 7.24

    def test_sign_insensitive(self):
        assert att_change_pct(110.0, 100.0) == att_change_pct(-110.0, -100.0) == 10.0

    def test_zero_baseline_is_nan(self):
        assert math.isnan(att_change_pct(5.0, 0.0))


class TestLeaveOneOut:
    def test_zero_weight_donor_removal_keeps_att(self, rng):
        # treated is an exact mix of the first two donors; extras get zero weight
        panel, spec = combo_panel(rng, [0.4, 0.6], n_extra=2, delta=500.0)
        base_study = build_study(panel, spec)
        tw = time_weights(pre_period_index(spec), spec.alpha)
        base_fit = fit_study(base_study, tw)
        base_att = gaps(base_study, base_fit.weights).att

        zero_weight_donor = base_study.donor_labels[int(np.argmin(base_fit.weights))]
        results = leave_one_out(panel, spec, targets=[zero_weight_donor])
        assert len(results) == 1
        assert not results[0].infeasible
        assert results[0].att == pytest.approx(base_att, abs=1e-6)
        assert results[0].att_change_pct < 1e-6
        # reduced-pool weights reproduce the baseline weights without the donor
        keep = [
            i for i, label in enumerate(base_study.donor_labels)
            if label != zero_weight_donor
        ]
        assert np.allclose(results[0].weights, base_fit.weights[keep], atol=1e-8)

    def test_convex_combination_gives_identical_att_for_any_kept_pool(self, rng):
        # treated equals the same donor mix over the whole range; removing
        # never-used donors cannot move the estimate
        panel, spec = combo_panel(rng, [0.25, 0.75], n_extra=3, delta=0.0)
        base_study = build_study(panel, spec)
        tw = time_weights(pre_period_index(spec), spec.alpha)
        base_att = gaps(base_study, fit_study(base_study, tw).weights).att
        extras = [f"donor_{i}" for i in (2, 3, 4)]
        for result in leave_one_out(panel, spec, targets=extras):
            assert result.att == pytest.approx(base_att, abs=1e-6)

    def test_top_target_removes_highest_weight_donor(self, rng):
        panel, spec = combo_panel(rng, [0.7, 0.3], n_extra=1)
        base_fit = fit_study(
            build_study(panel, spec),
            time_weights(pre_period_index(spec), spec.alpha),
        )
        top_donor = base_fit.donor_labels[int(np.argmax(base_fit.weights))]
        results = leave_one_out(panel, spec, targets="top")
        assert [r.excluded for r in results] == [top_donor]
        assert top_donor not in results[0].donor_labels

    def test_all_targets_respect_weight_floor(self, rng):
        panel, spec = combo_panel(rng, [0.5, 0.3, 0.2], n_extra=3)
        base_fit = fit_study(
            build_study(panel, spec),
            time_weights(pre_period_index(spec), spec.alpha),
        )
        results = leave_one_out(panel, spec, targets="all", min_weight=0.15)
        heavy = {
            label
            for label, w in zip(base_fit.donor_labels, base_fit.weights)
            if w >= 0.15
        }
        assert {r.excluded for r in results} == heavy
        # ordered by descending baseline weight
        weights = dict(zip(base_fit.donor_labels, base_fit.weights))
        excluded = [r.excluded for r in results]
        assert excluded == sorted(excluded, key=lambda u: -weights[u])

    def test_two_donor_pool_is_infeasible(self, rng):
        panel = price_panel(rng, 3, 14)
        spec = spec_for(10, 4)
        results = leave_one_out(panel, spec, targets="top")
        assert results[0].infeasible
        assert math.isnan(results[0].att)
        assert results[0].weights is None

    def test_unknown_target_rejected(self, rng):
        panel = price_panel(rng, 5, 14)
        with pytest.raises(StudyError, match="ghost"):
            leave_one_out(panel, spec_for(10, 4), targets=["ghost"])

    def test_results_reproducible_by_direct_refit(self, rng):
        panel = price_panel(rng, 6, 16)
        spec = spec_for(12, 4)
        results = leave_one_out(panel, spec, targets="top")
        loo = results[0]
        from synthcontrol import study_from_pool

        data = study_from_pool(panel, spec, spec.treated, loo.donor_labels)
        refit = fit_study(data, time_weights(pre_period_index(spec), spec.alpha))
        assert np.array_equal(refit.weights, loo.weights)
        assert gaps(data, refit.weights).att == loo.att


class TestAlphaSweep:
    def test_single_rate_matches_baseline(self, rng):
        panel = price_panel(rng, 6, 16)
        spec = spec_for(12, 4)
        rows = alpha_sweep(panel, spec, alphas=(spec.alpha,))
        base = fit_study(
            build_study(panel, spec),
            time_weights(pre_period_index(spec), spec.alpha),
        )
        base_att = gaps(build_study(panel, spec), base.weights).att
        assert len(rows) == 1
        assert rows[0].alpha == spec.alpha
        assert rows[0].att == base_att
        assert rows[0].p_ratio is None

    def test_default_grid_endpoints(self, rng):
        panel = price_panel(rng, 6, 16)
        rows = alpha_sweep(panel, spec_for(12, 4))
        assert [r.alpha for r in rows] == [0.003, 0.005, 0.01]

    def test_zero_alpha_row_is_unweighted_fit(self, rng):
        panel = price_panel(rng, 6, 16)
        spec = spec_for(12, 4)
        rows = alpha_sweep(panel, spec, alphas=(0.0,))
        study = build_study(panel, spec)
        flat = time_weights(pre_period_index(spec), 0.0)
        assert np.array_equal(flat.omega, np.ones(12))
        direct = fit_study(study, flat)
        assert rows[0].att == gaps(study, direct.weights).att

    def test_placebo_rerun_fills_p_ratio(self, rng):
        panel = price_panel(rng, 5, 14)
        rows = alpha_sweep(
            panel, spec_for(10, 4), alphas=(0.005,), with_placebos=True
        )
        assert rows[0].p_ratio is not None
        assert 0.0 < rows[0].p_ratio <= 1.0

    def test_negative_rate_rejected(self, rng):
        panel = price_panel(rng, 5, 14)
        with pytest.raises(ParameterError):
            alpha_sweep(panel, spec_for(10, 4), alphas=(-0.001,))
