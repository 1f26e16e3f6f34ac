import math

import numpy as np
import pytest

from tweezersim.noise import NoiseModel, RngStream, trial_stream


class TestNoiseModel:
    def test_defaults_are_apparatus_values(self):
        nm = NoiseModel()
        assert nm.transport_rms == 0.190
        assert nm.insert_rms == 0.65
        assert nm.distance_meas_rms == 0.130
        assert nm.position_meas_rms == 0.140
        assert nm.loss_prob_atom1 == 0.065
        assert nm.loss_prob_atom2 == 0.0
        assert nm.storage_lifetime_hdt == 8.0
        assert nm.storage_lifetime_vdt == 13.0
        assert nm.molasses_lifetime == 60.0

    @pytest.mark.parametrize("kwargs", [
        {"transport_rms": -0.1}, {"loss_prob_atom1": 1.2},
        {"loss_prob_atom2": -0.01}, {"storage_lifetime_hdt": 0.0},
        {"pair_collision_rate": -5.0}, {"pair_loss_branching": 2.0},
    ])
    def test_invalid_values_rejected(self, kwargs):
        with pytest.raises(ValueError):
            NoiseModel(**kwargs)

    def test_without_randomness(self):
        nm = NoiseModel().without_randomness()
        assert nm.transport_rms == 0.0 and nm.insert_rms == 0.0
        assert nm.loss_prob_atom1 == 0.0 and nm.loss_prob_atom2 == 0.0


class TestGaussianDraw:
    def test_zero_rms_returns_mean_exactly(self):
        s = RngStream(1, 0)
        assert s.gaussian(3.0, 0.0) == 3.0
        assert s.draw_counter == 0

    def test_negative_rms_rejected(self):
        with pytest.raises(ValueError):
            RngStream(1, 0).gaussian(0.0, -1.0)

    def test_sample_rms_within_chi_square_bound(self):
        # 1e5 draws at rms 0.190: 99% interval for the sample rms is well
        # inside [0.186, 0.194]
        s = RngStream(123, 0)
        draws = np.array([s.gaussian(0.0, 0.190) for _ in range(100_000)])
        rms = float(np.std(draws, ddof=0))
        assert 0.186 <= rms <= 0.194
        assert abs(float(np.mean(draws))) < 0.002

    def test_same_stream_state_replays(self):
        a = RngStream(77, 5)
        b = RngStream(77, 5)
        seq_a = [a.gaussian(0.0, 1.0) for _ in range(10)]
        seq_b = [b.gaussian(0.0, 1.0) for _ in range(10)]
        assert seq_a == seq_b


class TestBernoulliDraw:
    def test_degenerate_probabilities_exact(self):
        s = RngStream(2, 0)
        assert all(not s.bernoulli(0.0) for _ in range(1000))
        assert all(s.bernoulli(1.0) for _ in range(1000))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            RngStream(2, 0).bernoulli(1.5)

    def test_fraction_within_binomial_bound(self):
        # p = 0.065, 1e5 draws, 99% binomial interval halfwidth ~0.002
        s = RngStream(3, 0)
        n = 100_000
        k = sum(s.bernoulli(0.065) for _ in range(n))
        assert abs(k / n - 0.065) <= 0.004


class TestExponentialSurvival:
    def test_zero_duration_always_survives(self):
        s = RngStream(4, 0)
        assert all(s.exponential_survival(0.0, 5.0) for _ in range(1000))

    def test_long_lifetime_limit(self):
        s = RngStream(5, 0)
        n = 10_000
        k = sum(s.exponential_survival(2.0, 1e9) for _ in range(n))
        assert k / n >= 0.999

    def test_one_lifetime_survival_fraction(self):
        s = RngStream(6, 0)
        n = 100_000
        k = sum(s.exponential_survival(7.5, 7.5) for _ in range(n))
        assert abs(k / n - math.exp(-1.0)) <= 0.005

    def test_invalid_arguments(self):
        s = RngStream(6, 0)
        with pytest.raises(ValueError):
            s.exponential_survival(-1.0, 5.0)
        with pytest.raises(ValueError):
            s.exponential_survival(1.0, 0.0)


class TestStreamIndependence:
    def test_trial_streams_reproducible(self):
        a = trial_stream(99, 17)
        b = trial_stream(99, 17)
        assert [a.gaussian(0, 1) for _ in range(5)] == \
            [b.gaussian(0, 1) for _ in range(5)]

    def test_execution_order_does_not_matter(self):
        # drawing trials in any order yields identical per-trial values
        forward = {i: trial_stream(42, i).gaussian(0.0, 1.0)
                   for i in range(50)}
        backward = {i: trial_stream(42, i).gaussian(0.0, 1.0)
                    for i in reversed(range(50))}
        assert forward == backward

    def test_distinct_trials_decorrelated(self):
        n = 2000
        x = np.array([trial_stream(7, i).gaussian(0.0, 1.0) for i in range(n)])
        y = np.array([trial_stream(7, i + n).gaussian(0.0, 1.0)
                      for i in range(n)])
        corr = float(np.corrcoef(x, y)[0, 1])
        assert abs(corr) < 0.08

    def test_child_streams_differ_from_parent(self):
        parent = RngStream(11, 3)
        child = parent.child(0)
        grandchild = child.child(0)
        values = {parent.gaussian(0, 1), child.gaussian(0, 1),
                  grandchild.gaussian(0, 1)}
        assert len(values) == 3

    def test_draw_counter_counts_calls(self):
        s = RngStream(1, 0)
        s.gaussian(0, 1)
        s.bernoulli(0.5)
        s.exponential_survival(1.0, 2.0)
        assert s.draw_counter == 3
