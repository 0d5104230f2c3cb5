import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajtok.errors import DataError
from trajtok.mobility_stats import (
    DEFAULT_PERIODS,
    NO_REPEAT_SENTENCE,
    SUMMARY_HEADER,
    ScenarioLabel,
    TimePeriod,
    classify_scenario,
    extract_features,
    period_of,
    render_summary,
    round_to_five_percent,
    validate_partition,
)

visit_pairs = st.lists(
    st.tuples(st.integers(min_value=0, max_value=47), st.sampled_from("ABCDE")),
    min_size=1,
    max_size=40,
)


class TestPeriods:
    def test_default_partition_is_valid(self):
        validate_partition(DEFAULT_PERIODS)

    @pytest.mark.parametrize(
        "slot,name",
        [(0, "night"), (11, "night"), (44, "night"), (47, "night"),
         (12, "morning"), (23, "morning"), (24, "afternoon"), (36, "evening"), (43, "evening")],
    )
    def test_period_of(self, slot, name):
        assert period_of(slot).name == name

    def test_overlapping_partition_rejected(self):
        bad = (TimePeriod("a", ((0, 25),)), TimePeriod("b", ((24, 48),)))
        with pytest.raises(DataError):
            validate_partition(bad)

    def test_gap_partition_rejected(self):
        bad = (TimePeriod("a", ((0, 24),)), TimePeriod("b", ((25, 48),)))
        with pytest.raises(DataError):
            validate_partition(bad)


class TestRounding:
    @pytest.mark.parametrize(
        "count,total,steps",
        [
            (3, 10, 6),   # 30% -> 6 steps
            (1, 8, 3),    # 12.5% rounds half up to 15%
            (1, 3, 7),    # 33.33% -> 35%
            (0, 7, 0),
            (7, 7, 20),
            (1, 40, 1),   # 2.5% rounds half up to 5%
        ],
    )
    def test_half_up(self, count, total, steps):
        assert round_to_five_percent(count, total) == steps

    @given(count=st.integers(min_value=0, max_value=100), total=st.integers(min_value=1, max_value=100))
    def test_within_2_5_points_of_raw(self, count, total):
        count = min(count, total)
        steps = round_to_five_percent(count, total)
        assert abs(steps * 5 - 100 * count / total) <= 2.5


class TestExtractFeatures:
    def test_single_morning_point(self):
        f = extract_features([(13, "A")])
        assert f.period_prob_steps == {"night": 0, "morning": 20, "afternoon": 0, "evening": 0}
        assert f.period_probs["morning"] == pytest.approx(1.0)
        assert f.length == 1

    def test_three_of_ten_at_night(self):
        pts = [(0, "A"), (1, "B"), (2, "C")] + [(20, f"L{i}") for i in range(7)]
        f = extract_features(pts)
        assert f.period_prob_steps["night"] == 6
        assert f.period_probs["night"] == pytest.approx(0.30)

    def test_more_than_once_rule(self):
        pts = [(10, "A"), (15, "A"), (20, "A"), (25, "B"), (30, "C")]
        f = extract_features(pts)
        assert f.frequent_locations == ("A",)

    def test_top3_cap_and_ordering(self):
        # counts: A=3, B=3, C=2, D=2 -> order by count, then first visit
        pts = [(1, "B"), (2, "A"), (3, "A"), (4, "B"), (5, "A"), (6, "B"),
               (7, "D"), (8, "C"), (9, "C"), (10, "D")]
        f = extract_features(pts)
        assert f.frequent_locations == ("B", "A", "D")

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            extract_features([])

    @given(pts=visit_pairs)
    @settings(max_examples=100)
    def test_raw_probs_sum_to_one(self, pts):
        total = len(pts)
        by_period = {
            p.name: sum(1 for s, _ in pts if p.contains(s)) for p in DEFAULT_PERIODS
        }
        assert sum(by_period.values()) == total
        f = extract_features(pts)
        for p in DEFAULT_PERIODS:
            raw = by_period[p.name] / total
            assert abs(f.period_probs[p.name] - raw) <= 0.025 + 1e-12

    @given(pts=visit_pairs)
    @settings(max_examples=100)
    def test_same_slot_permutation_invariance(self, pts):
        base = extract_features(pts)
        reordered = sorted(pts, key=lambda v: (v[0], v[1]))
        shuffled = sorted(pts, key=lambda v: (v[0], v[1]), reverse=True)
        shuffled = sorted(shuffled, key=lambda v: v[0])  # stable: same slots reversed
        assert extract_features(reordered) == extract_features(shuffled)
        assert base.length == len(pts)


class TestRenderSummary:
    def test_contains_template_phrases(self):
        f = extract_features([(13, "A"), (14, "A"), (30, "B")])
        text = render_summary(f)
        assert text.startswith(SUMMARY_HEADER)
        assert "- Most frequently visited locations (visited more than once): A" in text
        assert "- Probability of visits by time period (rounded to 5%):" in text
        assert NO_REPEAT_SENTENCE in text  # periods without repeats fall back

    def test_zero_percent_listed(self):
        f = extract_features([(13, "A")])
        text = render_summary(f)
        assert "night: 0%" in text
        assert "afternoon: 0%" in text
        assert "evening: 0%" in text
        assert "morning: 100%" in text

    def test_deterministic(self):
        f = extract_features([(1, "X"), (2, "X"), (13, "Y")])
        assert render_summary(f) == render_summary(f)

    def test_no_frequent_locations_rendered_as_none(self):
        f = extract_features([(1, "X"), (13, "Y")])
        assert "(visited more than once): None" in render_summary(f)


def triple(w, s, k):
    return (w, s, k)


class TestClassifyScenario:
    def test_late_night_commuter(self):
        hist = [triple(0, 0, "A")] * 5 + [triple(0, 20, "B")]
        fut = [triple(1, 2, "A")] * 3 + [triple(1, 30, "B")]
        # 8 of 10 at night: 0.8 > 0.75
        labels = classify_scenario(hist, fut)
        assert ScenarioLabel.LATE_NIGHT_COMMUTER in labels

    def test_exactly_three_quarters_not_labelled(self):
        hist = [triple(0, 0, "A")] * 6 + [triple(0, 20, "B")] * 2
        fut = [triple(1, 2, "A"), triple(1, 30, "B")]
        # 7.5/10 is not > 0.75... build 6 night + 2 day hist, 0 night + 2 day fut -> 6/10
        labels = classify_scenario(hist, fut)
        assert ScenarioLabel.LATE_NIGHT_COMMUTER not in labels

    def test_top3_equality_gives_no_temp_labels(self):
        hist = [triple(0, 13, k) for k in ["A", "A", "B", "B", "C", "C"]]
        fut = [triple(1, 13, k) for k in ["A", "B", "C"]]
        labels = classify_scenario(hist, fut)
        assert ScenarioLabel.TEMP_PLAN_NEW not in labels
        assert ScenarioLabel.TEMP_PLAN_CANCELLED not in labels

    def test_new_plan(self):
        hist = [triple(0, 13, k) for k in ["A", "A", "B", "B", "C", "C"]]
        fut = [triple(1, 13, k) for k in ["A", "B", "C", "Z"]]
        assert ScenarioLabel.TEMP_PLAN_NEW in classify_scenario(hist, fut)

    def test_cancelled_plan(self):
        hist = [triple(0, 13, k) for k in ["A", "A", "B", "B", "C", "C"]]
        fut = [triple(1, 13, k) for k in ["A", "B"]]
        assert ScenarioLabel.TEMP_PLAN_CANCELLED in classify_scenario(hist, fut)

    def test_weekend_user(self):
        hist = [triple(3, 13, "A"), triple(4, 14, "B")]
        fut = [triple(5, 15, "A")]
        assert ScenarioLabel.WEEKEND_USER in classify_scenario(hist, fut)

    def test_thu_fri_to_sunday_not_weekend(self):
        hist = [triple(3, 13, "A"), triple(4, 14, "B")]
        fut = [triple(6, 15, "A")]
        assert ScenarioLabel.WEEKEND_USER not in classify_scenario(hist, fut)

    def test_none_label(self):
        hist = [triple(0, 13, "A"), triple(1, 14, "A")]
        fut = [triple(2, 15, "A")]
        assert classify_scenario(hist, fut) == {ScenarioLabel.NONE}

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            classify_scenario([], [triple(0, 0, "A")])

    @given(
        n_night=st.integers(min_value=0, max_value=20),
        n_day=st.integers(min_value=1, max_value=20),
    )
    @settings(max_examples=60)
    def test_night_label_monotone_in_night_trips(self, n_night, n_day):
        hist = [triple(0, 2, "A")] * n_night + [triple(0, 20, "B")] * n_day
        fut = [triple(1, 20, "B")]
        before = ScenarioLabel.LATE_NIGHT_COMMUTER in classify_scenario(hist, fut)
        hist_more = hist + [triple(0, 3, "A")]
        after = ScenarioLabel.LATE_NIGHT_COMMUTER in classify_scenario(hist_more, fut)
        if before:
            assert after
