import random

import pytest

from progrun.timing import CALIBRATION_RANGE, TimePredictor


class TestInitialSteps:
    def test_first_call_in_range(self):
        p = TimePredictor(seed=1)
        assert CALIBRATION_RANGE[0] <= p.initial_steps() <= CALIBRATION_RANGE[1]

    def test_many_calls_stay_in_range(self):
        p = TimePredictor(seed=2)
        lo, hi = CALIBRATION_RANGE
        assert all(lo <= p.initial_steps() <= hi for _ in range(1000))

    def test_uncalibrated_predict_uses_initial_steps(self):
        p = TimePredictor(seed=3)
        lo, hi = CALIBRATION_RANGE
        assert lo <= p.predict(0.25) <= hi
        assert not p.calibrated


class TestRecord:
    def test_exact_fit_constant_rate(self):
        p = TimePredictor()
        for _ in range(3):
            p.record(1000, 1.0)
        assert p.calibrated
        assert p.rate == pytest.approx(1000.0)

    def test_exact_fit_two_points(self):
        p = TimePredictor()
        p.record(1000, 0.5)
        p.record(2000, 1.0)
        p.record(1000, 0.5)
        assert p.rate == pytest.approx(2000.0)

    def test_zero_step_records_ignored(self):
        p = TimePredictor()
        p.record(0, 1.0)
        assert p.history_len == 0

    def test_negative_duration_rejected(self):
        p = TimePredictor()
        with pytest.raises(ValueError):
            p.record(10, -1.0)

    def test_noisy_rate_recovered_within_15pct(self):
        rng = random.Random(7)
        true_rate = 5000.0
        p = TimePredictor()
        for _ in range(8):
            steps = rng.randint(500, 2000)
            noise = 1.0 + rng.uniform(-0.10, 0.10)
            p.record(steps, steps / true_rate * noise)
        assert abs(p.rate - true_rate) / true_rate < 0.15

    def test_window_keeps_only_recent_runs(self):
        p = TimePredictor(window=4)
        for _ in range(4):
            p.record(1000, 1.0)  # 1000 steps/s
        for _ in range(4):
            p.record(1000, 0.5)  # 2000 steps/s takes over the whole window
        assert p.rate == pytest.approx(2000.0)


class TestPredict:
    def test_simple_arithmetic(self):
        p = TimePredictor()
        for _ in range(3):
            p.record(1000, 1.0)
        assert p.predict(0.25) == 250

    def test_never_returns_zero(self):
        p = TimePredictor()
        for _ in range(3):
            p.record(1000, 1.0)
        assert p.predict(1e-9) == 1

    def test_overshoot_clamped_to_10x_history(self):
        p = TimePredictor()
        for _ in range(3):
            p.record(100, 1e-6)  # absurdly fast
        assert p.predict(10.0) <= 10 * 100

    def test_budget_must_be_positive(self):
        p = TimePredictor()
        with pytest.raises(ValueError):
            p.predict(0.0)

    def test_adapts_to_rate_shift_within_5_records(self):
        # module turns quadratic: local rate drops from 10000 to 1000 steps/s
        p = TimePredictor()
        for _ in range(6):
            p.record(1000, 0.1)
        assert p.rate == pytest.approx(10_000.0)
        for _ in range(5):
            steps = p.predict(0.1)
            p.record(steps, steps / 1000.0)
        assert abs(p.rate - 1000.0) / 1000.0 < 0.25

    def test_quadratic_cost_predictions_shrink(self):
        # data grows: each activation costs proportionally more per step
        p = TimePredictor()
        cost = 1e-4
        predictions = []
        for i in range(12):
            steps = p.predict(0.1)
            predictions.append(steps)
            p.record(steps, steps * cost)
            cost *= 1.3
        assert predictions[-1] < predictions[3]
