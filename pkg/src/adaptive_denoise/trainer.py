"""Episode orchestration: rolls the enhancer under policy control frame by
frame, computes and normalizes the negated-MSE reward, maintains the
variance-reduction baseline, and drives the REINFORCE training loop
(batch size 1, one utterance per update).
"""

from dataclasses import dataclass, replace

import numpy as np

from . import metrics as metrics_mod
from . import policy as policy_mod
from .dsp import (
    DEFAULT_FRAME_SIZE,
    DEFAULT_HOP,
    AudioSignal,
    Spectrogram,
    features,
    istft,
    stft,
)
from .enhancer import (
    DEFAULT_INIT_FRAMES,
    N_PARAMS,
    ParameterSet,
    enhance_spectrogram,
    init_state,
    process_frame,
)

REWARD_EPS = 1e-12
BASELINE_MODES = ("none", "episode-mean", "ema", "step-ema", "reference")
REWARD_DOMAINS = ("spectral", "time")
FEATURE_TRANSFORMS = ("log1p", "linear")


@dataclass
class RewardNormalizer:
    """Running max-absolute reward scaler; outputs always land in [-1, 1]."""

    running_max_abs: float = REWARD_EPS
    decay: float = 1.0


def frame_reward(clean_frame, enhanced_frame) -> float:
    """Negated squared error between two same-domain frames."""
    clean_frame = np.asarray(clean_frame, dtype=np.float64)
    enhanced_frame = np.asarray(enhanced_frame, dtype=np.float64)
    if clean_frame.shape != enhanced_frame.shape:
        raise ValueError(
            f"frame shapes differ: {clean_frame.shape} vs {enhanced_frame.shape}"
        )
    diff = clean_frame - enhanced_frame
    return float(-np.dot(diff, diff))


def normalize_reward(norm: RewardNormalizer, r: float):
    """Scale r by the running max-absolute value seen so far.

    Returns (normalized reward in [-1, 1], updated normalizer).
    """
    if not np.isfinite(r):
        raise FloatingPointError(f"non-finite reward {r}")
    running = max(norm.decay * norm.running_max_abs, abs(r), REWARD_EPS)
    out = float(np.clip(r / running, -1.0, 1.0))
    return out, RewardNormalizer(running_max_abs=running, decay=norm.decay)


@dataclass
class BaselineEstimator:
    """Variance-reduction baseline.

    Modes: "none" (unbiased estimator), "episode-mean" (the mean of the
    episode's own return-to-go values), "ema" (an exponential moving
    average of episode mean returns, broadcast as a scalar), "step-ema"
    (a per-timestep EMA of return-to-go across episodes, which also
    removes the systematic early-vs-late return ramp of long episodes;
    values from before the current episode only, so it leaves the
    estimator unbiased), and "reference" (handled by the training loop:
    the return-to-go the fixed initial parameters would have earned on the
    same utterance, a state-matched action-independent control variate).
    """

    mode: str = "episode-mean"
    ema_value: float = 0.0
    ema_decay: float = 0.9
    step_values: np.ndarray | None = None
    step_seen: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in BASELINE_MODES:
            raise ValueError(f"unknown baseline mode {self.mode!r}")


def baseline_values(est: BaselineEstimator, returns: np.ndarray):
    """Per-step baseline for an episode with the given return-to-go values.

    Returns (baseline array, updated estimator).
    """
    returns = np.asarray(returns, dtype=np.float64)
    if est.mode in ("none", "reference"):
        return np.zeros_like(returns), est
    if est.mode == "episode-mean":
        return np.full_like(returns, float(returns.mean())), est
    if est.mode == "ema":
        # broadcast the value from before this episode, then fold in
        values = np.full_like(returns, est.ema_value)
        new_ema = est.ema_decay * est.ema_value + (1.0 - est.ema_decay) * float(
            returns.mean()
        )
        return values, replace(est, ema_value=new_ema)
    # step-ema
    T = returns.shape[0]
    old_vals = est.step_values if est.step_values is not None else np.zeros(0)
    old_seen = est.step_seen if est.step_seen is not None else np.zeros(0, dtype=bool)
    if old_vals.shape[0] < T:
        old_vals = np.concatenate([old_vals, np.zeros(T - old_vals.shape[0])])
        old_seen = np.concatenate(
            [old_seen, np.zeros(T - old_seen.shape[0], dtype=bool)]
        )
    values = old_vals[:T].copy()
    new_vals = old_vals.copy()
    new_seen = old_seen.copy()
    first = ~old_seen[:T]
    new_vals[:T][first] = returns[first]  # adopt outright on first sight
    new_vals[:T][~first] = (
        est.ema_decay * old_vals[:T][~first] + (1.0 - est.ema_decay) * returns[~first]
    )
    new_seen[:T] = True
    return values, replace(est, step_values=new_vals, step_seen=new_seen)


@dataclass
class Trajectory:
    """One utterance rolled out frame by frame under the policy."""

    episode_id: str
    features: np.ndarray  # (T, 256) raw magnitude features of the noisy input
    inputs: np.ndarray  # (T, D_in) exact policy inputs (for BPTT replay)
    actions: np.ndarray  # (T, P) choices in {-1, 0, +1}
    log_probs: np.ndarray  # (T,)
    rewards: np.ndarray  # (T,) normalized rewards fed to the learner
    raw_rewards: np.ndarray  # (T,) unnormalized negated squared errors
    params_applied: np.ndarray  # (T, 6) parameter values in effect per frame
    total_return: float = 0.0
    enhanced: Spectrogram | None = None
    ref_rewards: np.ndarray | None = None  # reference rollout, same scale

    def __post_init__(self):
        T = self.rewards.shape[0]
        for name in ("features", "inputs", "actions", "log_probs", "params_applied"):
            if getattr(self, name).shape[0] != T:
                raise ValueError(f"trajectory field {name} has mismatched length")
        self.total_return = float(self.rewards.sum())

    def __len__(self):
        return self.rewards.shape[0]


def _transform_features(feats: np.ndarray, kind: str) -> np.ndarray:
    if kind == "log1p":
        return np.log1p(feats)
    if kind == "linear":
        return feats
    raise ValueError(f"unknown feature transform {kind!r}")


def build_policy_input(
    feats: np.ndarray,
    params: ParameterSet,
    prev_reward: float,
    feature_transform: str = "log1p",
) -> np.ndarray:
    """Policy input: transformed features + normalized knob values +
    previous normalized reward."""
    return np.concatenate(
        [
            _transform_features(feats, feature_transform),
            params.normalized(),
            [prev_reward],
        ]
    )


def run_episode_spectra(
    theta: policy_mod.PolicyParameters,
    clean_spec: Spectrogram,
    noisy_spec: Spectrogram,
    initial_params: ParameterSet,
    rng: np.random.Generator | None = None,
    *,
    init_frames: int = DEFAULT_INIT_FRAMES,
    normalizer_decay: float = 1.0,
    feature_transform: str = "log1p",
    reward_domain: str = "spectral",
    deterministic: bool = False,
    episode_id: str = "",
    reference_raw=None,
) -> Trajectory:
    """Policy-controlled enhancement of one utterance given its spectra.

    The clean signal enters only through the reward.  With
    deterministic=True the per-head argmax action is taken and rng is
    unused.  reference_raw, if given, is a (T,) array of raw per-frame
    rewards from a reference rollout (e.g. the fixed baseline); it is
    scaled with the same running normalizer as the episode's own rewards
    and recorded as Trajectory.ref_rewards.
    """
    if reward_domain not in REWARD_DOMAINS:
        raise ValueError(f"unknown reward domain {reward_domain!r}")
    if clean_spec.n_frames != noisy_spec.n_frames:
        raise ValueError("clean and noisy utterances are not aligned")
    if not deterministic and rng is None:
        raise ValueError("sampling an episode requires an rng")
    T = noisy_spec.n_frames
    P = theta.n_heads

    state = init_state(noisy_spec.frames[: max(1, min(init_frames, T))])
    hidden = policy_mod.zero_hidden(theta.hidden_size)
    params = initial_params
    norm = RewardNormalizer(decay=normalizer_decay)
    prev_reward = 0.0

    feats_all = np.empty((T, noisy_spec.n_bins - 1))
    inputs = np.empty((T, theta.input_dim))
    actions = np.empty((T, P), dtype=np.int64)
    log_probs = np.empty(T)
    rewards = np.empty(T)
    raw_rewards = np.empty(T)
    params_applied = np.empty((T, N_PARAMS))
    enhanced_frames = np.empty_like(noisy_spec.frames)
    if reference_raw is not None:
        reference_raw = np.asarray(reference_raw, dtype=np.float64)
        if reference_raw.shape != (T,):
            raise ValueError("reference_raw must have one value per frame")
        ref_rewards = np.empty(T)
    else:
        ref_rewards = None

    if reward_domain == "time":
        clean_time = np.fft.irfft(clean_spec.frames, n=clean_spec.frame_size, axis=1)

    for t in range(T):
        feats = features(noisy_spec.frames[t])
        feats_all[t] = feats
        x = build_policy_input(feats, params, prev_reward, feature_transform)
        inputs[t] = x
        hidden = policy_mod.lstm_step(theta, x, hidden)
        dist = policy_mod.action_distribution(theta, hidden.h)
        if deterministic:
            action = policy_mod.greedy_action(dist)
            log_prob = float(
                np.sum(np.log(dist[np.arange(P), action + 1]))
            )
        else:
            action, log_prob = policy_mod.sample_action(dist, rng)
        params = policy_mod.apply_action(params, action)
        frame, state = process_frame(state, noisy_spec.frames[t], params)
        enhanced_frames[t] = frame.enhanced_spectrum

        if reward_domain == "spectral":
            raw = frame_reward(
                features(clean_spec.frames[t]), features(frame.enhanced_spectrum)
            )
        else:
            enh_time = np.fft.irfft(frame.enhanced_spectrum, n=noisy_spec.frame_size)
            raw = frame_reward(clean_time[t], enh_time)
        reward, norm = normalize_reward(norm, raw)
        if ref_rewards is not None:
            ref_rewards[t] = float(
                np.clip(reference_raw[t] / norm.running_max_abs, -1.0, 1.0)
            )

        actions[t] = action
        log_probs[t] = log_prob
        rewards[t] = reward
        raw_rewards[t] = raw
        params_applied[t] = params.as_array()
        prev_reward = reward

    enhanced = Spectrogram(
        frames=enhanced_frames,
        frame_size=noisy_spec.frame_size,
        hop=noisy_spec.hop,
        sample_rate=noisy_spec.sample_rate,
    )
    return Trajectory(
        episode_id=episode_id,
        features=feats_all,
        inputs=inputs,
        actions=actions,
        log_probs=log_probs,
        rewards=rewards,
        raw_rewards=raw_rewards,
        params_applied=params_applied,
        enhanced=enhanced,
        ref_rewards=ref_rewards,
    )


def run_episode(
    theta: policy_mod.PolicyParameters,
    clean: AudioSignal,
    noisy: AudioSignal,
    initial_params: ParameterSet,
    rng: np.random.Generator | None = None,
    *,
    frame_size: int = DEFAULT_FRAME_SIZE,
    hop: int = DEFAULT_HOP,
    **kwargs,
) -> Trajectory:
    """Signal-level wrapper around run_episode_spectra."""
    if len(clean) != len(noisy):
        raise ValueError(
            f"clean ({len(clean)}) and noisy ({len(noisy)}) lengths differ"
        )
    clean_spec = stft(clean, frame_size=frame_size, hop=hop)
    noisy_spec = stft(noisy, frame_size=frame_size, hop=hop)
    return run_episode_spectra(
        theta, clean_spec, noisy_spec, initial_params, rng, **kwargs
    )


def reference_frame_rewards(
    clean_spec: Spectrogram,
    noisy_spec: Spectrogram,
    params: ParameterSet,
    *,
    init_frames: int = DEFAULT_INIT_FRAMES,
    reward_domain: str = "spectral",
) -> np.ndarray:
    """Raw per-frame rewards the fixed-parameter enhancer earns on an
    utterance; the control-variate side of the "reference" baseline."""
    enhanced = enhance_spectrogram(noisy_spec, params, init_frames=init_frames)
    if reward_domain == "spectral":
        diff = np.abs(clean_spec.frames[:, :-1]) - np.abs(enhanced.frames[:, :-1])
    else:
        diff = np.fft.irfft(clean_spec.frames, clean_spec.frame_size, axis=1) - (
            np.fft.irfft(enhanced.frames, enhanced.frame_size, axis=1)
        )
    return -np.sum(diff * diff, axis=1)


def policy_enhance(
    theta: policy_mod.PolicyParameters,
    noisy: AudioSignal,
    initial_params: ParameterSet,
    *,
    frame_size: int = DEFAULT_FRAME_SIZE,
    hop: int = DEFAULT_HOP,
    init_frames: int = DEFAULT_INIT_FRAMES,
    feature_transform: str = "log1p",
) -> tuple[AudioSignal, np.ndarray]:
    """Greedy policy-controlled enhancement without a clean reference.

    The reward slot of the policy input stays at zero (no feedback is
    available at inference).  Returns the enhanced signal and the (T, 6)
    per-frame parameter trace.
    """
    noisy_spec = stft(noisy, frame_size=frame_size, hop=hop)
    T = noisy_spec.n_frames
    state = init_state(noisy_spec.frames[: max(1, min(init_frames, T))])
    hidden = policy_mod.zero_hidden(theta.hidden_size)
    params = initial_params
    enhanced_frames = np.empty_like(noisy_spec.frames)
    trace = np.empty((T, N_PARAMS))
    for t in range(T):
        feats = features(noisy_spec.frames[t])
        x = build_policy_input(feats, params, 0.0, feature_transform)
        hidden = policy_mod.lstm_step(theta, x, hidden)
        dist = policy_mod.action_distribution(theta, hidden.h)
        params = policy_mod.apply_action(params, policy_mod.greedy_action(dist))
        frame, state = process_frame(state, noisy_spec.frames[t], params)
        enhanced_frames[t] = frame.enhanced_spectrum
        trace[t] = params.as_array()
    enhanced = Spectrogram(
        frames=enhanced_frames, frame_size=frame_size, hop=hop,
        sample_rate=noisy_spec.sample_rate,
    )
    return istft(enhanced, length=len(noisy)), trace


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


@dataclass
class TrainerConfig:
    learning_rate: float = 3e-3
    lr_epoch_decay: float = 1.0  # multiplies the Adam rate once per epoch
    epochs: int = 5
    max_episodes: int = 500
    baseline_mode: str = "episode-mean"
    ema_decay: float = 0.9
    baseline_warmup_episodes: int = 0  # rollouts that only feed the baseline
    discount: float = 1.0
    normalizer_decay: float = 1.0
    clip_norm: float = 5.0
    reward_domain: str = "spectral"
    feature_transform: str = "log1p"
    selection_metric: str = "raw-return"  # or "snr": rank checkpoints by val SNR
    selection_margin: float = 0.0  # trained weights must beat the untrained
    # policy on validation by this much before they replace it
    selection_require_mse: bool = False  # and must not worsen validation MSE
    frame_size: int = DEFAULT_FRAME_SIZE
    hop: int = DEFAULT_HOP
    init_frames: int = DEFAULT_INIT_FRAMES
    seed: int = 0


@dataclass
class Utterance:
    utterance_id: str
    clean: AudioSignal
    noisy: AudioSignal
    snr_bucket: float | None = None


@dataclass
class EpisodeRecord:
    episode_id: str
    seed: int
    total_return: float
    grad_norm: float


@dataclass
class TrainResult:
    theta: policy_mod.PolicyParameters  # best-by-validation weights
    opt: policy_mod.AdamState
    log: list
    best_val_return: float
    best_epoch: int
    val_history: list  # (epoch, mean val return, mean snr, mean lsd, mean mse)
    episodes_run: int


def _precompute(utterances, frame_size, hop):
    out = []
    for utt in utterances:
        out.append(
            (
                utt.utterance_id,
                stft(utt.clean, frame_size=frame_size, hop=hop),
                stft(utt.noisy, frame_size=frame_size, hop=hop),
                utt.clean,
                utt.noisy,
            )
        )
    return out


def validation_pass(theta, val_items, initial_params, cfg):
    """Greedy rollouts over the validation split.

    Returns (mean normalized return, mean raw return, mean snr_db,
    mean lsd, mean mse).  The raw return is the unnormalized negated
    squared error, so ranking checkpoints by it ranks them by the actual
    distortion rather than by the per-episode reward scaling.
    """
    returns, raw_returns, snrs, lsds, mses = [], [], [], [], []
    for utt_id, clean_spec, noisy_spec, clean_sig, noisy_sig in val_items:
        traj = run_episode_spectra(
            theta, clean_spec, noisy_spec, initial_params,
            init_frames=cfg.init_frames,
            normalizer_decay=cfg.normalizer_decay,
            feature_transform=cfg.feature_transform,
            reward_domain=cfg.reward_domain,
            deterministic=True,
            episode_id=utt_id,
        )
        returns.append(traj.total_return)
        raw_returns.append(float(traj.raw_rewards.sum()))
        enhanced_sig = istft(traj.enhanced, length=len(clean_sig))
        snrs.append(metrics_mod.snr_db(clean_sig, enhanced_sig))
        lsds.append(metrics_mod.lsd(clean_spec, traj.enhanced))
        mses.append(metrics_mod.mse_time(clean_sig, enhanced_sig))
    return (
        float(np.mean(returns)),
        float(np.mean(raw_returns)),
        float(np.mean(snrs)),
        float(np.mean(lsds)),
        float(np.mean(mses)),
    )


def train(
    theta: policy_mod.PolicyParameters,
    train_set,
    val_set,
    initial_params: ParameterSet,
    cfg: TrainerConfig,
    *,
    checkpoint_path=None,
    log_fh=None,
    progress=None,
) -> TrainResult:
    """REINFORCE training, one utterance per gradient update.

    Each epoch runs a seeded shuffle of the train split, then evaluates the
    greedy policy on the validation split; weights with the best mean
    validation return are kept and, if checkpoint_path is given, written
    there whenever they improve.  Raises on empty inputs and propagates
    FloatingPointError on non-finite gradients.
    """
    if not train_set:
        raise ValueError("empty training set")
    if cfg.baseline_mode not in BASELINE_MODES:
        raise ValueError(f"unknown baseline mode {cfg.baseline_mode!r}")

    train_items = _precompute(train_set, cfg.frame_size, cfg.hop)
    val_items = _precompute(val_set, cfg.frame_size, cfg.hop)

    reference = None
    if cfg.baseline_mode == "reference":
        reference = [
            reference_frame_rewards(
                clean_spec, noisy_spec, initial_params,
                init_frames=cfg.init_frames, reward_domain=cfg.reward_domain,
            )
            for _, clean_spec, noisy_spec, _, _ in train_items
        ]

    shuffle_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(0,))
    )

    opt = policy_mod.init_adam(theta, learning_rate=cfg.learning_rate)
    baseline_est = BaselineEstimator(mode=cfg.baseline_mode, ema_decay=cfg.ema_decay)

    log = []
    val_history = []
    best_epoch = -1
    best_theta = theta.copy()
    episodes = 0
    config_blob = {k: getattr(cfg, k) for k in vars(cfg)}

    def _checkpoint(th, op):
        if checkpoint_path is not None:
            policy_mod.save_checkpoint(checkpoint_path, th, op, config_blob)

    if cfg.selection_metric not in ("raw-return", "snr"):
        raise ValueError(f"unknown selection metric {cfg.selection_metric!r}")

    def _selection_value(raw_return, snr):
        return snr if cfg.selection_metric == "snr" else raw_return

    # the untrained policy is checkpoint candidate number one: training may
    # only replace it by beating it on validation
    if val_items:
        _, raw0, snr0, lsd0, mse0 = validation_pass(
            theta, val_items, initial_params, cfg
        )
        val_history.append((-1, raw0, snr0, lsd0, mse0))
        best_value = _selection_value(raw0, snr0)
        bar = best_value + cfg.selection_margin
        mse_bar = mse0
    else:
        best_value = -np.inf
        bar = -np.inf
        mse_bar = np.inf
    _checkpoint(best_theta, opt)

    for epoch in range(cfg.epochs):
        if episodes >= cfg.max_episodes:
            break
        if epoch > 0 and cfg.lr_epoch_decay != 1.0:
            opt = replace(
                opt, learning_rate=opt.learning_rate * cfg.lr_epoch_decay
            )
        order = shuffle_rng.permutation(len(train_items))
        for k in order:
            if episodes >= cfg.max_episodes:
                break
            utt_id, clean_spec, noisy_spec, _, _ = train_items[k]
            ep_ss = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(1, episodes))
            ep_seed = int(ep_ss.generate_state(1)[0])
            ep_rng = np.random.default_rng(ep_ss)
            traj = run_episode_spectra(
                theta, clean_spec, noisy_spec, initial_params, ep_rng,
                init_frames=cfg.init_frames,
                normalizer_decay=cfg.normalizer_decay,
                feature_transform=cfg.feature_transform,
                reward_domain=cfg.reward_domain,
                episode_id=utt_id,
                reference_raw=None if reference is None else reference[k],
            )
            if not np.isfinite(traj.total_return):
                raise FloatingPointError(
                    f"non-finite episode return on {utt_id}; aborting"
                )
            returns = policy_mod.returns_to_go(traj.rewards, cfg.discount)
            if cfg.baseline_mode == "reference":
                base = policy_mod.returns_to_go(traj.ref_rewards, cfg.discount)
            else:
                base, baseline_est = baseline_values(baseline_est, returns)
            if episodes < cfg.baseline_warmup_episodes:
                # feed the baseline estimator before the first policy update
                norm = 0.0
            else:
                grad = policy_mod.reinforce_gradient(
                    theta, traj.inputs, traj.actions, traj.rewards, base,
                    discount=cfg.discount,
                )
                grad, norm = policy_mod.clip_global_norm(grad, cfg.clip_norm)
                descent = policy_mod.PolicyParameters(
                    -grad.w_x, -grad.w_h, -grad.b, -grad.head_w, -grad.head_b
                )
                theta, opt = policy_mod.adam_update(theta, descent, opt)
            record = EpisodeRecord(utt_id, ep_seed, traj.total_return, norm)
            log.append(record)
            if log_fh is not None:
                log_fh.write(
                    f"{episodes},{record.episode_id},{record.seed},"
                    f"{record.total_return:.12g},{record.grad_norm:.12g}\n"
                )
            episodes += 1

        if val_items:
            _, val_raw, val_snr, val_lsd, val_mse = validation_pass(
                theta, val_items, initial_params, cfg
            )
            candidate = _selection_value(val_raw, val_snr)
        else:
            val_raw = float(np.mean([r.total_return for r in log[-len(train_items):]]))
            val_snr = val_lsd = val_mse = float("nan")
            candidate = val_raw
        val_history.append((epoch, val_raw, val_snr, val_lsd, val_mse))
        if progress is not None:
            progress(epoch, episodes, val_raw, val_snr)
        acceptable = candidate > bar
        if acceptable and cfg.selection_require_mse and val_items:
            acceptable = val_mse <= mse_bar
        if acceptable:
            bar = candidate
            best_value = candidate
            best_epoch = epoch
            best_theta = theta.copy()
            _checkpoint(best_theta, opt)

    return TrainResult(
        theta=best_theta,
        opt=opt,
        log=log,
        best_val_return=best_value,
        best_epoch=best_epoch,
        val_history=val_history,
        episodes_run=episodes,
    )


def select_learning_rate(
    theta0,
    train_set,
    val_set,
    initial_params,
    cfg: TrainerConfig,
    grid=(1e-2, 3e-3, 1e-3, 3e-4),
    probe_episodes: int = 60,
):
    """Short probe run per candidate rate; picks the best mean validation
    return (ties go to the smaller rate)."""
    best = None
    for lr in sorted(grid, reverse=True):
        probe_cfg = replace(
            cfg, learning_rate=lr, max_episodes=probe_episodes,
            epochs=max(1, -(-probe_episodes // max(1, len(train_set)))),
        )
        result = train(theta0.copy(), train_set, val_set, initial_params, probe_cfg)
        if best is None or result.best_val_return >= best[1]:
            best = (lr, result.best_val_return)
    return best[0]


def train_grid(
    theta0: policy_mod.PolicyParameters,
    train_set,
    val_set,
    initial_params: ParameterSet,
    cfg: TrainerConfig,
    variants,
    *,
    theta_factory=None,
    checkpoint_path=None,
    log_fh=None,
    progress=None,
) -> TrainResult:
    """Run one full training per variant and keep the run whose selected
    checkpoint scores best on validation.

    Each variant is a dict of TrainerConfig field overrides (for example
    {"learning_rate": 3e-3, "seed": 11}).  A variant may also carry a
    "policy_seed" entry: with theta_factory given, that run starts from
    theta_factory(policy_seed) instead of theta0.  This is the run-level
    counterpart of tuning the learning rate on the validation set; each
    individual run trains at most cfg.max_episodes episodes.
    """
    if not variants:
        raise ValueError("no training variants given")
    best = None
    for overrides in variants:
        overrides = dict(overrides)
        policy_seed = overrides.pop("policy_seed", None)
        if policy_seed is not None and theta_factory is not None:
            theta_start = theta_factory(policy_seed)
        else:
            theta_start = theta0.copy()
        run_cfg = replace(cfg, **overrides)
        result = train(
            theta_start, train_set, val_set, initial_params, run_cfg,
            log_fh=log_fh,
        )
        if progress is not None:
            progress(overrides, result.best_val_return)
        if best is None or result.best_val_return > best.best_val_return:
            best = result
    if checkpoint_path is not None:
        policy_mod.save_checkpoint(
            checkpoint_path, best.theta, best.opt,
            {k: getattr(cfg, k) for k in vars(cfg)},
        )
    return best
