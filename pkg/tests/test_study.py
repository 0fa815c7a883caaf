import numpy as np
import pytest

from synthcontrol import (
    DonorScreen,
    ParameterError,
    Period,
    StudyError,
    StudySpec,
    WindowRangeError,
    build_study,
    pre_period_index,
    study_from_pool,
)

from conftest import make_panel, price_panel


def spec_for(n_pre, n_post, start="2020-01", **kwargs):
    first = Period.parse(start)
    return StudySpec(
        treated=kwargs.pop("treated", "city_00"),
        pre_start=first,
        intervention=first.shift(n_pre - 1),
        post_end=first.shift(n_pre + n_post - 1),
        **kwargs,
    )


class TestStudySpec:
    def test_window_properties(self):
        spec = spec_for(3, 2)
        assert [str(p) for p in spec.periods_pre] == ["2020-01", "2020-02", "2020-03"]
        assert [str(p) for p in spec.periods_post] == ["2020-04", "2020-05"]

    def test_pre_start_after_intervention_rejected(self):
        with pytest.raises(ParameterError):
            StudySpec(
                treated="x",
                pre_start=Period(2020, 5),
                intervention=Period(2020, 4),
                post_end=Period(2020, 9),
            )

    def test_post_end_not_after_intervention_rejected(self):
        with pytest.raises(ParameterError):
            StudySpec(
                treated="x",
                pre_start=Period(2020, 1),
                intervention=Period(2020, 4),
                post_end=Period(2020, 4),
            )

    def test_negative_alpha_rejected(self):
        with pytest.raises(ParameterError):
            spec_for(3, 2, alpha=-0.001)

    def test_bad_correlation_threshold_rejected(self):
        with pytest.raises(ParameterError):
            DonorScreen(min_pre_correlation=1.5)


class TestPrePeriodIndex:
    def test_sixty_month_window(self):
        offsets = pre_period_index(spec_for(60, 6))
        assert offsets[0] == -59
        assert offsets[-1] == 0
        assert len(offsets) == 60

    def test_single_month_window(self):
        assert pre_period_index(spec_for(1, 1)).tolist() == [0]

    def test_offsets_increase_by_one(self):
        offsets = pre_period_index(spec_for(17, 3))
        assert np.array_equal(np.diff(offsets), np.ones(16))


class TestBuildStudy:
    def test_complete_donors_all_kept(self, rng):
        panel = price_panel(rng, 4, 10)
        data = build_study(panel, spec_for(6, 4))
        assert data.donor_labels == ("city_01", "city_02", "city_03")
        assert data.excluded == ()
        assert data.donors_pre.shape == (3, 6)
        assert data.donors_post.shape == (3, 4)

    def test_windows_extracted_correctly(self, rng):
        panel = price_panel(rng, 3, 10)
        data = build_study(panel, spec_for(6, 4))
        assert np.array_equal(data.treated_pre, panel.values[0, :6])
        assert np.array_equal(data.treated_post, panel.values[0, 6:])
        assert np.array_equal(data.donors_pre, panel.values[1:, :6])

    def test_incomplete_donor_excluded_with_reason(self, rng):
        values = price_panel(rng, 4, 10).values.copy()
        values[2, 8] = np.nan
        panel = make_panel([f"city_{i:02d}" for i in range(4)], "2020-01", values)
        data = build_study(panel, spec_for(6, 4))
        assert data.donor_labels == ("city_01", "city_03")
        assert len(data.excluded) == 1
        assert data.excluded[0].unit == "city_02"
        assert "2020-09" in data.excluded[0].reason

    def test_missing_outside_window_is_fine(self, rng):
        values = price_panel(rng, 3, 12).values.copy()
        values[1, 11] = np.nan
        panel = make_panel([f"city_{i:02d}" for i in range(3)], "2020-01", values)
        data = build_study(panel, spec_for(6, 4))
        assert data.donor_labels == ("city_01", "city_02")

    def test_sixty_candidates_two_dropped_leaves_58(self, rng):
        values = price_panel(rng, 61, 12).values.copy()
        values[7, 3] = np.nan
        values[30, 10] = np.nan
        panel = make_panel([f"city_{i:02d}" for i in range(61)], "2020-01", values)
        data = build_study(panel, spec_for(6, 6))
        assert data.n_donors == 58

    def test_treated_missing_is_fatal(self, rng):
        values = price_panel(rng, 3, 10).values.copy()
        values[0, 4] = np.nan
        panel = make_panel([f"city_{i:02d}" for i in range(3)], "2020-01", values)
        with pytest.raises(StudyError, match="2020-05"):
            build_study(panel, spec_for(6, 4))

    def test_treated_not_in_panel(self, rng):
        panel = price_panel(rng, 3, 10)
        with pytest.raises(StudyError, match="nowhere"):
            build_study(panel, spec_for(6, 4, treated="nowhere"))

    def test_too_few_survivors(self, rng):
        values = price_panel(rng, 3, 10).values.copy()
        values[2, 0] = np.nan
        panel = make_panel([f"city_{i:02d}" for i in range(3)], "2020-01", values)
        with pytest.raises(StudyError, match="at least 2"):
            build_study(panel, spec_for(6, 4))

    def test_window_outside_panel(self, rng):
        panel = price_panel(rng, 3, 10)
        with pytest.raises(WindowRangeError):
            build_study(panel, spec_for(6, 6))

    def test_correlation_screen_drops_anticorrelated_donor(self, rng):
        up = np.linspace(100.0, 200.0, 12)
        down = np.linspace(200.0, 100.0, 12)
        panel = make_panel(
            ["t", "a", "b", "c"],
            "2020-01",
            np.vstack([up, up * 1.1, down, up * 0.9]),
        )
        spec = spec_for(8, 4, treated="t",
                        donor_screen=DonorScreen(min_pre_correlation=0.8))
        data = build_study(panel, spec)
        assert data.donor_labels == ("a", "c")
        assert data.excluded[0].unit == "b"
        assert "correlation" in data.excluded[0].reason

    def test_correlation_screen_off_by_default(self, rng):
        up = np.linspace(100.0, 200.0, 12)
        down = np.linspace(200.0, 100.0, 12)
        panel = make_panel("tab", "2020-01", np.vstack([up, up * 1.1, down]))
        data = build_study(panel, spec_for(8, 4, treated="t"))
        assert data.donor_labels == ("a", "b")

    def test_constant_donor_dropped_when_screen_active(self, rng):
        up = np.linspace(100.0, 200.0, 12)
        flat = np.full(12, 150.0)
        panel = make_panel(
            ["t", "a", "b", "c"],
            "2020-01",
            np.vstack([up, up * 1.1, flat, up * 0.9]),
        )
        spec = spec_for(8, 4, treated="t",
                        donor_screen=DonorScreen(min_pre_correlation=0.0))
        data = build_study(panel, spec)
        assert data.donor_labels == ("a", "c")
        assert "variance" in data.excluded[0].reason

    def test_surviving_donors_satisfy_screen(self, rng):
        panel = price_panel(rng, 12, 14)
        threshold = 0.2
        spec = spec_for(
            10, 4, donor_screen=DonorScreen(min_pre_correlation=threshold)
        )
        data = build_study(panel, spec)
        treated_pre = data.treated_pre
        for row in data.donors_pre:
            r = np.corrcoef(row, treated_pre)[0, 1]
            assert r >= threshold

    def test_deterministic_and_stable_order(self, rng):
        panel = price_panel(rng, 8, 12)
        spec = spec_for(8, 4)
        one = build_study(panel, spec)
        two = build_study(panel, spec)
        assert one.donor_labels == two.donor_labels == tuple(
            f"city_{i:02d}" for i in range(1, 8)
        )
        assert np.array_equal(one.donors_pre, two.donors_pre)

    def test_completeness_screen_disabled_makes_missing_fatal(self, rng):
        values = price_panel(rng, 4, 10).values.copy()
        values[2, 8] = np.nan
        panel = make_panel([f"city_{i:02d}" for i in range(4)], "2020-01", values)
        spec = spec_for(6, 4, donor_screen=DonorScreen(completeness_required=False))
        with pytest.raises(StudyError, match="city_02"):
            build_study(panel, spec)


class TestStudyFromPool:
    def test_fixed_pool_skips_correlation_screen(self, rng):
        up = np.linspace(100.0, 200.0, 12)
        down = np.linspace(200.0, 100.0, 12)
        panel = make_panel("tab", "2020-01", np.vstack([up, up * 1.1, down]))
        spec = spec_for(8, 4, treated="t",
                        donor_screen=DonorScreen(min_pre_correlation=0.9))
        data = study_from_pool(panel, spec, "a", ("t", "b"))
        assert data.treated == "a"
        assert data.donor_labels == ("t", "b")

    def test_incomplete_donor_is_fatal(self, rng):
        values = price_panel(rng, 3, 10).values.copy()
        values[2, 4] = np.nan
        panel = make_panel([f"city_{i:02d}" for i in range(3)], "2020-01", values)
        with pytest.raises(StudyError, match="city_02"):
            study_from_pool(panel, spec_for(6, 4), "city_00", ("city_01", "city_02"))

    def test_unknown_donor(self, rng):
        panel = price_panel(rng, 3, 10)
        with pytest.raises(StudyError, match="ghost"):
            study_from_pool(panel, spec_for(6, 4), "city_00", ("city_01", "ghost"))
