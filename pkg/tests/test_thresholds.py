import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percentmatch import (
    ClassHistogram,
    ThresholdState,
    WeightSchedule,
    fixed_thresholds,
    init_class_percentiles,
    loss_weight,
    refresh_thresholds,
)


def labels_with_neg_ratio(ratio, n=1000, n_classes=1):
    n_neg = int(round(ratio * n))
    column = np.concatenate([np.zeros(n_neg), np.ones(n - n_neg)])
    return np.tile(column[:, None], (1, n_classes))


class TestWeightSchedule:
    def test_defaults(self):
        sched = WeightSchedule()
        assert (sched.start_gap, sched.saturate_gap) == (0.5, 0.55)
        assert sched.saturate_weight == 1.0
        assert sched.warmup_iters == 300

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"start_gap": 0.6, "saturate_gap": 0.5},
            {"start_gap": 0.5, "saturate_gap": 0.5},
            {"saturate_weight": 0.0},
            {"warmup_iters": -1},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            WeightSchedule(**kwargs)


class TestInitPercentiles:
    def test_high_negative_ratio_raises_kappa_plus(self):
        state = init_class_percentiles(0.98, 0.1, labels_with_neg_ratio(0.995))
        assert state.kappa_plus[0] == pytest.approx(0.995)
        assert state.kappa_minus[0] == pytest.approx(0.1)

    def test_midrange_ratio_leaves_globals(self):
        state = init_class_percentiles(0.98, 0.1, labels_with_neg_ratio(0.5))
        assert state.kappa_plus[0] == pytest.approx(0.98)
        assert state.kappa_minus[0] == pytest.approx(0.1)

    def test_low_ratio_lowers_kappa_minus(self):
        state = init_class_percentiles(0.98, 0.1, labels_with_neg_ratio(0.05))
        assert state.kappa_minus[0] == pytest.approx(0.05)
        assert state.kappa_plus[0] == pytest.approx(0.98)

    def test_minus_clamp_off_switch(self):
        state = init_class_percentiles(0.98, 0.1, labels_with_neg_ratio(0.05), clamp_minus=False)
        assert state.kappa_minus[0] == pytest.approx(0.1)

    def test_initial_taus_equal_kappas(self):
        state = init_class_percentiles(0.98, 0.1, labels_with_neg_ratio(0.9, n_classes=3))
        assert np.array_equal(state.tau_plus, state.kappa_plus)
        assert np.array_equal(state.tau_minus, state.kappa_minus)

    def test_empty_labeled_set_rejected(self):
        with pytest.raises(ValueError):
            init_class_percentiles(0.98, 0.1, np.zeros((0, 3)))

    def test_bad_global_ordering_rejected(self):
        with pytest.raises(ValueError):
            init_class_percentiles(0.1, 0.98, labels_with_neg_ratio(0.5))

    def test_permuting_classes_permutes_state(self):
        rng = np.random.default_rng(3)
        labels = (rng.random((200, 6)) < rng.uniform(0.05, 0.9, size=6)).astype(int)
        perm = rng.permutation(6)
        direct = init_class_percentiles(0.98, 0.1, labels)
        permuted = init_class_percentiles(0.98, 0.1, labels[:, perm])
        assert np.allclose(permuted.kappa_plus, direct.kappa_plus[perm])
        assert np.allclose(permuted.kappa_minus, direct.kappa_minus[perm])


class TestThresholdState:
    def test_ordering_violation_reports_class(self):
        with pytest.raises(ValueError, match="class 1"):
            ThresholdState(kappa_plus=np.array([0.9, 0.2]), kappa_minus=np.array([0.1, 0.5]))

    def test_gap_is_tau_difference(self):
        state = fixed_thresholds(0.95, 0.0, n_classes=4)
        assert np.allclose(state.gap, 0.95)

    def test_fixed_thresholds_validation(self):
        with pytest.raises(ValueError):
            fixed_thresholds(0.2, 0.5, n_classes=2)


class TestRefresh:
    def test_frozen_uniform_reproduces_percentiles(self):
        state = init_class_percentiles(0.98, 0.1, labels_with_neg_ratio(0.5, n_classes=2))
        hists = [ClassHistogram.uniform(100, decay=0.0) for _ in range(2)]
        refresh_thresholds(state, hists)
        assert np.allclose(state.tau_plus, 0.98, atol=1e-12)
        assert np.allclose(state.tau_minus, 0.1, atol=1e-12)
        assert np.allclose(state.gap, 0.88, atol=1e-12)

    def test_two_bin_interpolation(self):
        state = ThresholdState(kappa_plus=np.array([0.9]), kappa_minus=np.array([0.4]))
        refresh_thresholds(state, [ClassHistogram(bins=[0.8, 0.2], decay=0.9)])
        assert state.tau_plus[0] == pytest.approx(0.75)
        assert state.tau_minus[0] == pytest.approx(0.25)
        assert state.gap[0] == pytest.approx(0.5)

    def test_class_count_mismatch_rejected(self):
        state = fixed_thresholds(0.9, 0.1, n_classes=3)
        with pytest.raises(ValueError):
            refresh_thresholds(state, [ClassHistogram.uniform(10, 0.9)] * 2)

    @settings(max_examples=60, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_tau_ordering_preserved_under_any_histogram(self, seed):
        rng = np.random.default_rng(seed)
        bins = rng.random(20)
        hist = ClassHistogram(bins=bins / bins.sum(), decay=0.9)
        km = rng.uniform(0.0, 0.8)
        kp = rng.uniform(km + 1e-6, 1.0)
        state = ThresholdState(kappa_plus=np.array([kp]), kappa_minus=np.array([km]))
        refresh_thresholds(state, [hist])
        assert state.tau_minus[0] <= state.tau_plus[0] + 1e-12
        assert state.gap[0] >= -1e-12


class TestLossWeight:
    def test_below_start_gap_is_zero(self):
        assert loss_weight(0.4, 1000, WeightSchedule()) == 0.0

    def test_above_saturate_gap_is_saturate_weight(self):
        assert loss_weight(0.6, 1000, WeightSchedule()) == 1.0

    def test_linear_ramp_midpoint(self):
        assert loss_weight(0.525, 1000, WeightSchedule()) == 0.5

    def test_warmup_dominates_large_gap(self):
        assert loss_weight(0.9, 100, WeightSchedule(warmup_iters=300)) == 0.0

    def test_boundary_continuity(self):
        sched = WeightSchedule()
        assert loss_weight(0.5, 400, sched) == 0.0
        assert loss_weight(0.55, 400, sched) == pytest.approx(1.0)

    def test_vectorized_matches_scalar(self):
        sched = WeightSchedule()
        gaps = np.array([0.1, 0.5, 0.52, 0.55, 0.9])
        vec = loss_weight(gaps, 500, sched)
        assert np.allclose(vec, [loss_weight(float(g), 500, sched) for g in gaps])

    @settings(max_examples=100, deadline=None)
    @given(
        g1=st.floats(min_value=0.0, max_value=1.0),
        g2=st.floats(min_value=0.0, max_value=1.0),
        t=st.integers(0, 2000),
    )
    def test_monotone_in_gap_and_bounded(self, g1, g2, t):
        sched = WeightSchedule()
        lo, hi = sorted((g1, g2))
        a_lo, a_hi = loss_weight(lo, t, sched), loss_weight(hi, t, sched)
        assert a_lo <= a_hi + 1e-12
        assert 0.0 <= a_lo <= sched.saturate_weight
        assert 0.0 <= a_hi <= sched.saturate_weight
