"""Reward model tests: mean rewards against hand arithmetic, sampling
noise statistics, and the exhaustive value helpers."""

import numpy as np
import pytest

from seqcredit.errors import CapabilityError, ConfigurationError, DomainError
from seqcredit.rewards import (
    RewardModel,
    enumerate_actions,
    mean_reward,
    mean_rewards,
    optimal_value,
    pair_list,
    sample_reward,
    sample_reward_model,
    sample_rewards,
    uniform_value,
)


def tiny_model(lambda_int=0.5, sigma=0.0):
    """K=2, A=2 model with hand-checkable tables."""
    phi = np.array([[1.0, 2.0], [3.0, 4.0]])
    g = np.array([[[0.0, 1.0], [1.0, 0.0]]])
    return RewardModel(K=2, A=2, phi=phi, g=g, lambda_int=lambda_int, sigma=sigma)


class TestPairList:
    def test_orders_pairs_lexicographically(self):
        assert pair_list(3) == [(0, 1), (0, 2), (1, 2)]

    def test_single_agent_has_no_pairs(self):
        assert pair_list(1) == []

    def test_pair_index_round_trips(self):
        model = sample_reward_model(0, K=4, A=2, lambda_int=1.0, sigma=0.0)
        for p, (k, l) in enumerate(model.pairs):
            assert model.pair_index(k, l) == p


class TestMeanReward:
    def test_hand_value(self):
        # phi contribution 1 + 4 = 5, interaction g[0, 1] = 1 weighted by 0.5
        model = tiny_model()
        assert mean_reward(model, (0, 1)) == pytest.approx(5.5)

    def test_interaction_switched_off(self):
        model = tiny_model(lambda_int=0.0)
        assert mean_reward(model, (0, 1)) == pytest.approx(5.0)

    def test_batch_matches_scalar(self):
        model = sample_reward_model(3, K=3, A=3, lambda_int=0.7, sigma=0.0)
        actions = enumerate_actions(3, 3)
        batch = mean_rewards(model, actions)
        for row, expected in zip(actions, batch):
            assert mean_reward(model, row) == pytest.approx(expected, abs=1e-12), (
                f"batch and scalar mean disagree at action {row}"
            )

    def test_rejects_out_of_range_action(self):
        model = tiny_model()
        with pytest.raises(DomainError):
            mean_reward(model, (0, 2))
        with pytest.raises(DomainError):
            mean_reward(model, (0, 1, 1))


class TestSampling:
    def test_noise_is_centered_with_matched_variance(self):
        model = sample_reward_model(11, K=4, A=3, lambda_int=0.4, sigma=0.7)
        a = (0, 1, 2, 0)
        rng = np.random.default_rng(7)
        draws = np.array([sample_reward(model, a, rng) for _ in range(20000)])
        assert draws.mean() == pytest.approx(mean_reward(model, a), abs=0.02), (
            "sampled rewards are not centered on the exact mean"
        )
        assert draws.std() == pytest.approx(0.7, rel=0.05), (
            f"noise std {draws.std():.4f} is not within 5% of sigma=0.7"
        )

    def test_sigma_zero_is_deterministic(self):
        model = tiny_model(sigma=0.0)
        rng = np.random.default_rng(0)
        actions = enumerate_actions(2, 2)
        assert np.allclose(sample_rewards(model, actions, rng), mean_rewards(model, actions))

    def test_batch_sampling_matches_means_in_expectation(self):
        model = sample_reward_model(5, K=2, A=2, lambda_int=1.0, sigma=0.5)
        actions = np.tile(np.array([[1, 0]]), (50000, 1))
        rng = np.random.default_rng(42)
        draws = sample_rewards(model, actions, rng)
        assert draws.mean() == pytest.approx(mean_reward(model, (1, 0)), abs=0.02)


class TestSampler:
    def test_shapes_and_stored_parameters(self):
        model = sample_reward_model(9, K=5, A=4, lambda_int=0.3, sigma=0.2)
        assert model.phi.shape == (5, 4)
        assert model.g.shape == (10, 4, 4)
        assert model.lambda_int == 0.3
        assert model.sigma == 0.2

    def test_same_seed_reproduces_tables(self):
        a = sample_reward_model(21, K=3, A=3, lambda_int=0.5, sigma=0.1)
        b = sample_reward_model(21, K=3, A=3, lambda_int=0.5, sigma=0.1)
        assert np.array_equal(a.phi, b.phi) and np.array_equal(a.g, b.g)

    def test_interaction_scale_shrinks_with_team_size(self):
        # entries are standard normal times sqrt(2 / (K - 1))
        draws = [sample_reward_model(s, K=9, A=2, lambda_int=1.0, sigma=0.0).g for s in range(40)]
        sd = np.concatenate([g.ravel() for g in draws]).std()
        assert sd == pytest.approx(np.sqrt(2.0 / 8.0), rel=0.1), (
            f"g entries have std {sd:.4f}, expected ~sqrt(2/(K-1))"
        )

    def test_rejects_bad_parameters(self):
        with pytest.raises(ConfigurationError):
            sample_reward_model(0, K=0, A=2, lambda_int=0.0, sigma=0.0)
        with pytest.raises(ConfigurationError):
            sample_reward_model(0, K=2, A=1, lambda_int=0.0, sigma=0.0)
        with pytest.raises(ConfigurationError):
            sample_reward_model(0, K=2, A=2, lambda_int=-0.1, sigma=0.0)
        with pytest.raises(ConfigurationError):
            sample_reward_model(0, K=2, A=2, lambda_int=0.0, sigma=-1.0)


class TestValueHelpers:
    def test_optimal_value_matches_brute_force(self):
        for seed in range(25):
            model = sample_reward_model(seed, K=3, A=3, lambda_int=0.8, sigma=0.0)
            brute = mean_rewards(model, enumerate_actions(3, 3)).max()
            assert optimal_value(model) == pytest.approx(brute, abs=1e-10), (
                f"optimal_value disagrees with enumeration at seed {seed}"
            )

    def test_additive_shortcut_matches_enumeration(self):
        model = sample_reward_model(2, K=4, A=3, lambda_int=0.0, sigma=0.0)
        brute = mean_rewards(model, enumerate_actions(4, 3)).max()
        assert optimal_value(model) == pytest.approx(brute, abs=1e-10)

    def test_uniform_value_matches_enumeration_mean(self):
        model = sample_reward_model(13, K=3, A=2, lambda_int=0.6, sigma=0.0)
        brute = mean_rewards(model, enumerate_actions(3, 2)).mean()
        assert uniform_value(model) == pytest.approx(brute, abs=1e-10)

    def test_enumeration_guard_on_large_teams(self):
        model = sample_reward_model(0, K=30, A=4, lambda_int=1.0, sigma=0.0)
        with pytest.raises(CapabilityError):
            optimal_value(model)
        # the additive shortcut never enumerates, so it stays available
        flat = sample_reward_model(0, K=30, A=4, lambda_int=0.0, sigma=0.0)
        assert np.isfinite(optimal_value(flat))
