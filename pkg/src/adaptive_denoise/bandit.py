"""Tiny synthetic bandit for sanity-checking the REINFORCE stack.

Episodes are a fixed number of frames with a constant feature input.
Each frame pays reward 1.0 when the first head picks "increase" and 0.0
otherwise, so the analytic optimum is to always increase knob 0; the other
heads contribute pure gradient-estimation noise.  Used both for the
convergence check and for comparing the baselined against the unbiased
gradient estimator.
"""

from dataclasses import dataclass

import numpy as np

from . import policy as policy_mod
from .trainer import BaselineEstimator, baseline_values

DEFAULT_FEATURE_DIM = 8
DEFAULT_HIDDEN = 16
DEFAULT_N_HEADS = 2
OPTIMAL_HEAD = 0
OPTIMAL_CHOICE = 1  # "increase"


def make_policy(
    seed: int = 0,
    feature_dim: int = DEFAULT_FEATURE_DIM,
    hidden_size: int = DEFAULT_HIDDEN,
    n_heads: int = DEFAULT_N_HEADS,
) -> policy_mod.PolicyParameters:
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7,)))
    return policy_mod.init_policy(feature_dim, hidden_size, n_heads, rng)


def fixed_input(feature_dim: int = DEFAULT_FEATURE_DIM) -> np.ndarray:
    return np.full(feature_dim, 0.5)


def step_reward(choices) -> float:
    return 1.0 if choices[OPTIMAL_HEAD] == OPTIMAL_CHOICE else 0.0


def rollout(theta: policy_mod.PolicyParameters, n_frames: int, rng):
    """One seeded episode; returns (inputs, actions, log_probs, rewards)."""
    x = fixed_input(theta.input_dim)
    state = policy_mod.zero_hidden(theta.hidden_size)
    inputs = np.tile(x, (n_frames, 1))
    actions = np.empty((n_frames, theta.n_heads), dtype=np.int64)
    log_probs = np.empty(n_frames)
    rewards = np.empty(n_frames)
    for t in range(n_frames):
        state = policy_mod.lstm_step(theta, x, state)
        dist = policy_mod.action_distribution(theta, state.h)
        action, log_prob = policy_mod.sample_action(dist, rng)
        actions[t] = action
        log_probs[t] = log_prob
        rewards[t] = step_reward(action)
    return inputs, actions, log_probs, rewards


def optimal_action_probability(theta: policy_mod.PolicyParameters) -> float:
    """P(increase on the rewarded head) at the first frame."""
    state = policy_mod.lstm_step(
        theta, fixed_input(theta.input_dim), policy_mod.zero_hidden(theta.hidden_size)
    )
    dist = policy_mod.action_distribution(theta, state.h)
    return float(dist[OPTIMAL_HEAD, OPTIMAL_CHOICE + 1])


@dataclass
class BanditResult:
    theta: policy_mod.PolicyParameters
    prob_history: np.ndarray  # P(optimal) once per episode
    episodes: int


def train_bandit(
    episodes: int = 2000,
    n_frames: int = 1,
    learning_rate: float = 0.05,
    seed: int = 0,
    baseline_mode: str = "none",
    target_prob: float | None = None,
) -> BanditResult:
    """Plain REINFORCE on the bandit; stops early once target_prob is hit."""
    theta = make_policy(seed)
    opt = policy_mod.init_adam(theta, learning_rate=learning_rate)
    est = BaselineEstimator(mode=baseline_mode)
    probs = []
    for episode in range(episodes):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(8, episode))
        )
        inputs, actions, log_probs, rewards = rollout(theta, n_frames, rng)
        returns = policy_mod.returns_to_go(rewards)
        base, est = baseline_values(est, returns)
        grad = policy_mod.reinforce_gradient(theta, inputs, actions, rewards, base)
        grad, _ = policy_mod.clip_global_norm(grad, 5.0)
        descent = policy_mod.PolicyParameters(
            -grad.w_x, -grad.w_h, -grad.b, -grad.head_w, -grad.head_b
        )
        theta, opt = policy_mod.adam_update(theta, descent, opt)
        probs.append(optimal_action_probability(theta))
        if target_prob is not None and probs[-1] > target_prob:
            break
    return BanditResult(theta=theta, prob_history=np.array(probs), episodes=len(probs))


def gradient_samples(
    theta: policy_mod.PolicyParameters,
    n_rollouts: int,
    n_frames: int,
    seed: int = 0,
    baseline_mode: str = "none",
) -> np.ndarray:
    """Per-rollout flattened gradient estimates for a frozen policy.

    Rollouts are seeded by index, so estimators with different baselines
    can be compared on identical action/reward draws.
    """
    est = BaselineEstimator(mode=baseline_mode)
    out = np.empty((n_rollouts, policy_mod.flatten_params(theta).size))
    for i in range(n_rollouts):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(9, i))
        )
        inputs, actions, log_probs, rewards = rollout(theta, n_frames, rng)
        returns = policy_mod.returns_to_go(rewards)
        base, est = baseline_values(est, returns)
        grad = policy_mod.reinforce_gradient(theta, inputs, actions, rewards, base)
        out[i] = policy_mod.flatten_params(grad)
    return out
