"""Frame-level RL control of a classical spectral noise suppressor.

A noise suppressor built from the classical spectral-restoration recipe
(energy VAD, recursive noise tracking, decision-directed a priori SNR and
a floored Wiener gain) is treated as a black box with six bounded control
knobs.  A single-layer LSTM policy, trained with REINFORCE on a
negated-MSE reward against the clean reference, nudges each knob up, down
or not at all on every 16 ms frame.  The package also ships the simplex
(Nelder-Mead) tuner that produces the fixed-parameter baseline and the
SNR / LSD / MSE evaluation harness used to compare the two.
"""

from .dsp import AudioSignal, Spectrogram, features, hann_window, istft, stft
from .enhancer import (
    EnhancedFrame,
    EnhancerState,
    ParameterSet,
    enhance_utterance,
    init_state,
    process_frame,
)
from .policy import (
    AdamState,
    HiddenState,
    PolicyParameters,
    action_distribution,
    adam_update,
    apply_action,
    init_policy,
    load_checkpoint,
    lstm_step,
    reinforce_gradient,
    returns_to_go,
    sample_action,
    save_checkpoint,
)
from .trainer import (
    BaselineEstimator,
    RewardNormalizer,
    Trajectory,
    TrainerConfig,
    Utterance,
    baseline_values,
    frame_reward,
    normalize_reward,
    run_episode,
    train,
)
from .metrics import (
    MetricReport,
    evaluate,
    lsd,
    mse_time,
    nelder_mead,
    snr_db,
    tune_baseline,
)
from .data import (
    CorpusConfig,
    Manifest,
    build_manifest,
    convolve_rir,
    mix_at_snr,
    read_wav,
    synth_corpus,
    write_wav,
)

__version__ = "0.1.0"
