"""Tests for reward computation/normalization, baselines, episode rollouts
and the training loop."""

import numpy as np
import pytest

from adaptive_denoise import dsp, policy
from adaptive_denoise.enhancer import ParameterSet
from adaptive_denoise import trainer
from adaptive_denoise.trainer import (
    BaselineEstimator,
    RewardNormalizer,
    TrainerConfig,
    Utterance,
    baseline_values,
    frame_reward,
    normalize_reward,
    run_episode,
    train,
)

from conftest import synth_clean


def make_pair(seed=0, n=16000, snr_db=5.0):
    clean = synth_clean(n=n, seed=seed)
    rng = np.random.default_rng(seed + 100)
    noise = rng.normal(size=n)
    k = np.sqrt(np.sum(clean.samples**2) / (np.sum(noise**2) * 10 ** (snr_db / 10)))
    noisy = dsp.AudioSignal(clean.samples + k * noise)
    return clean, noisy


def small_policy(seed=0):
    return policy.init_policy(256 + 6 + 1, 8, 6, np.random.default_rng(seed))


class TestFrameReward:
    def test_identical_frames_zero(self):
        x = np.random.default_rng(0).uniform(0, 1, 256)
        assert frame_reward(x, x) == 0.0

    def test_unit_error(self):
        assert frame_reward(np.array([1.0, 0.0]), np.array([0.0, 0.0])) == -1.0

    def test_never_positive(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            a, b = rng.normal(size=64), rng.normal(size=64)
            assert frame_reward(a, b) <= 0.0

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            frame_reward(np.zeros(4), np.zeros(5))


class TestNormalizeReward:
    def test_zero_stays_zero(self):
        out, _ = normalize_reward(RewardNormalizer(), 0.0)
        assert out == 0.0

    def test_first_reward_defines_scale(self):
        out, norm = normalize_reward(RewardNormalizer(), -4.0)
        assert out == -1.0
        assert norm.running_max_abs == 4.0

    def test_stated_recurrence(self):
        """Sequence (-4, -2) with decay 1 normalizes the second to -0.5."""
        norm = RewardNormalizer(decay=1.0)
        _, norm = normalize_reward(norm, -4.0)
        out, _ = normalize_reward(norm, -2.0)
        assert out == -0.5

    def test_outputs_bounded_over_random_streams(self):
        """10^5 random draws never leave [-1, 1]."""
        rng = np.random.default_rng(2)
        norm = RewardNormalizer(decay=0.99)
        rewards = rng.normal(scale=np.exp(rng.uniform(-8, 8, size=100_000)))
        for r in rewards:
            out, norm = normalize_reward(norm, float(r))
            assert -1.0 <= out <= 1.0
        assert norm.running_max_abs >= 1e-12

    def test_non_finite_rejected(self):
        with pytest.raises(FloatingPointError):
            normalize_reward(RewardNormalizer(), float("nan"))


class TestBaselineValues:
    def test_none_mode_zeroes(self):
        values, _ = baseline_values(BaselineEstimator(mode="none"), np.array([3.0, 1.0]))
        np.testing.assert_array_equal(values, 0.0)

    def test_episode_mean(self):
        """Returns-to-go (3, 1) give a constant (2, 2) baseline."""
        values, _ = baseline_values(
            BaselineEstimator(mode="episode-mean"), np.array([3.0, 1.0])
        )
        np.testing.assert_array_equal(values, [2.0, 2.0])

    def test_ema_update(self):
        """decay 0.9, prior 0, episode mean 1 -> next ema 0.1."""
        est = BaselineEstimator(mode="ema", ema_value=0.0, ema_decay=0.9)
        values, est2 = baseline_values(est, np.array([1.0, 1.0]))
        np.testing.assert_array_equal(values, 0.0)
        assert est2.ema_value == pytest.approx(0.1)

    def test_step_ema_uses_prior_episodes_only(self):
        est = BaselineEstimator(mode="step-ema", ema_decay=0.5)
        first, est = baseline_values(est, np.array([2.0, 4.0]))
        np.testing.assert_array_equal(first, 0.0)  # nothing seen yet
        second, est = baseline_values(est, np.array([6.0, 8.0]))
        np.testing.assert_array_equal(second, [2.0, 4.0])
        third, _ = baseline_values(est, np.array([0.0, 0.0]))
        np.testing.assert_allclose(third, [4.0, 6.0])

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            BaselineEstimator(mode="parametric")


class TestRunEpisode:
    def test_trajectory_length_equals_frame_count(self):
        clean, noisy = make_pair(seed=1)
        theta = small_policy()
        traj = run_episode(theta, clean, noisy, ParameterSet.defaults(),
                           np.random.default_rng(0))
        assert len(traj) == dsp.frame_count(len(clean), 512, 256)

    def test_total_return_is_reward_sum(self):
        clean, noisy = make_pair(seed=2)
        traj = run_episode(small_policy(), clean, noisy, ParameterSet.defaults(),
                           np.random.default_rng(1))
        assert traj.total_return == pytest.approx(traj.rewards.sum(), abs=1e-9)

    def test_seeded_rollouts_identical(self):
        clean, noisy = make_pair(seed=3)
        theta = small_policy()
        t1 = run_episode(theta, clean, noisy, ParameterSet.defaults(),
                         np.random.default_rng(7))
        t2 = run_episode(theta, clean, noisy, ParameterSet.defaults(),
                         np.random.default_rng(7))
        np.testing.assert_array_equal(t1.actions, t2.actions)
        np.testing.assert_array_equal(t1.rewards, t2.rewards)
        np.testing.assert_array_equal(t1.params_applied, t2.params_applied)

    def test_greedy_rollout_needs_no_rng(self):
        clean, noisy = make_pair(seed=4)
        theta = small_policy()
        t1 = trainer.run_episode(theta, clean, noisy, ParameterSet.defaults(),
                                 deterministic=True)
        t2 = trainer.run_episode(theta, clean, noisy, ParameterSet.defaults(),
                                 deterministic=True)
        np.testing.assert_array_equal(t1.actions, t2.actions)

    def test_clean_input_near_zero_rewards(self):
        """noisy == clean with near-unity gains: raw rewards stay within the
        gain-floor distortion bound."""
        clean = synth_clean(seed=5)
        theta = small_policy()
        # freeze every head on "hold" so the knobs stay at transparent values
        theta.head_b[:, 1] = 50.0
        transparent = ParameterSet(dd_alpha=0.8, gain_floor_db=-5.0)
        traj = run_episode(theta, clean, clean, transparent,
                           np.random.default_rng(2))
        clean_spec = dsp.stft(clean)
        frame_energy = np.sum(np.abs(clean_spec.frames[:, :256]) ** 2, axis=1)
        bound = frame_energy + 1e-9  # gains in [floor, 1] can at most zero a frame
        assert np.all(-traj.raw_rewards <= bound)
        speech = frame_energy > frame_energy.max() * 1e-3
        rel = -traj.raw_rewards[speech] / frame_energy[speech]
        assert np.median(rel) < 0.05

    def test_misaligned_signals_rejected(self):
        clean, noisy = make_pair(seed=6)
        short = dsp.AudioSignal(noisy.samples[:-100])
        with pytest.raises(ValueError):
            run_episode(small_policy(), clean, short, ParameterSet.defaults(),
                        np.random.default_rng(0))

    def test_reference_rewards_share_scale(self):
        clean, noisy = make_pair(seed=7)
        clean_spec, noisy_spec = dsp.stft(clean), dsp.stft(noisy)
        params = ParameterSet.defaults()
        ref = trainer.reference_frame_rewards(clean_spec, noisy_spec, params)
        traj = trainer.run_episode_spectra(
            small_policy(), clean_spec, noisy_spec, params,
            np.random.default_rng(3), reference_raw=ref,
        )
        assert traj.ref_rewards.shape == traj.rewards.shape
        assert np.all(traj.ref_rewards <= 0.0)
        assert np.all(traj.ref_rewards >= -1.0)


class TestTrain:
    def _sets(self):
        train_set = [Utterance(f"u{i}", *make_pair(seed=10 + i)) for i in range(3)]
        val_set = [Utterance("v0", *make_pair(seed=20))]
        return train_set, val_set

    def test_zero_learning_rate_keeps_weights(self):
        train_set, val_set = self._sets()
        theta = small_policy()
        before = policy.flatten_params(theta).copy()
        cfg = TrainerConfig(learning_rate=0.0, epochs=2, max_episodes=6, seed=3)
        result = train(theta, train_set, val_set, ParameterSet.defaults(), cfg)
        np.testing.assert_array_equal(policy.flatten_params(result.theta), before)
        assert result.episodes_run == 6

    def test_same_seed_same_log(self):
        train_set, val_set = self._sets()
        cfg = TrainerConfig(learning_rate=1e-3, epochs=1, max_episodes=3, seed=9)
        r1 = train(small_policy(), train_set, val_set, ParameterSet.defaults(), cfg)
        r2 = train(small_policy(), train_set, val_set, ParameterSet.defaults(), cfg)
        assert [vars(a) for a in r1.log] == [vars(b) for b in r2.log]
        np.testing.assert_array_equal(
            policy.flatten_params(r1.theta), policy.flatten_params(r2.theta)
        )

    def test_empty_train_set_rejected(self):
        with pytest.raises(ValueError):
            train(small_policy(), [], [], ParameterSet.defaults(), TrainerConfig())

    def test_selection_margin_keeps_initial_policy(self):
        """An absurd margin means training can never replace the untrained
        weights."""
        train_set, val_set = self._sets()
        theta = small_policy()
        before = policy.flatten_params(theta).copy()
        cfg = TrainerConfig(learning_rate=1e-3, epochs=1, max_episodes=3, seed=5,
                            selection_metric="snr", selection_margin=1e9)
        result = train(theta, train_set, val_set, ParameterSet.defaults(), cfg)
        assert result.best_epoch == -1
        np.testing.assert_array_equal(policy.flatten_params(result.theta), before)


class TestPolicyEnhance:
    def test_output_length_and_trace_shape(self):
        clean, noisy = make_pair(seed=30)
        theta = small_policy()
        out, trace = trainer.policy_enhance(theta, noisy, ParameterSet.defaults())
        assert len(out) == len(noisy)
        assert trace.shape == (dsp.frame_count(len(noisy), 512, 256), 6)
