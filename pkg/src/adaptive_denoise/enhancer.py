"""Decision-directed spectral noise suppressor with an adjustable knob set.

Per frame, in order: energy VAD with hangover, recursive noise-PSD update
during non-speech, a posteriori SNR, decision-directed a priori SNR, a
floored Wiener gain, and gain application with the noisy phase preserved.
Every knob the controller can touch is declared in ParameterSet together
with its bounds and step size.
"""

from dataclasses import dataclass

import numpy as np

from .dsp import (
    DEFAULT_FRAME_SIZE,
    DEFAULT_HOP,
    N_BINS,
    AudioSignal,
    Spectrogram,
    istft,
    stft,
)

NOISE_PSD_FLOOR = 1e-10  # keeps the a posteriori SNR finite
DEFAULT_INIT_FRAMES = 6  # assumed speech-free lead-in per utterance


@dataclass(frozen=True)
class ParamSpec:
    name: str
    low: float
    high: float
    step: float
    default: float


PARAM_SPECS = (
    ParamSpec("dd_alpha", 0.8, 0.999, 0.005, 0.98),
    ParamSpec("noise_beta", 0.5, 0.999, 0.01, 0.95),
    ParamSpec("vad_threshold_db", 1.0, 15.0, 0.5, 5.0),
    ParamSpec("vad_hangover", 0.0, 20.0, 1.0, 8.0),
    ParamSpec("over_estimation", 0.5, 3.0, 0.1, 1.0),
    ParamSpec("gain_floor_db", -30.0, -5.0, 1.0, -18.0),
)

PARAM_NAMES = tuple(s.name for s in PARAM_SPECS)
PARAM_LOW = np.array([s.low for s in PARAM_SPECS])
PARAM_HIGH = np.array([s.high for s in PARAM_SPECS])
PARAM_STEP = np.array([s.step for s in PARAM_SPECS])
PARAM_DEFAULT = np.array([s.default for s in PARAM_SPECS])
N_PARAMS = len(PARAM_SPECS)


@dataclass(frozen=True)
class ParameterSet:
    """The suppressor's six control parameters, each bounded and stepped."""

    dd_alpha: float = 0.98
    noise_beta: float = 0.95
    vad_threshold_db: float = 5.0
    vad_hangover: float = 8.0
    over_estimation: float = 1.0
    gain_floor_db: float = -18.0

    def __post_init__(self):
        for spec in PARAM_SPECS:
            value = getattr(self, spec.name)
            if not np.isfinite(value):
                raise ValueError(f"{spec.name} must be finite, got {value}")
            if not (spec.low <= value <= spec.high):
                raise ValueError(
                    f"{spec.name}={value} outside bounds [{spec.low}, {spec.high}]"
                )

    @classmethod
    def defaults(cls) -> "ParameterSet":
        return cls()

    @classmethod
    def from_array(cls, values) -> "ParameterSet":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (N_PARAMS,):
            raise ValueError(f"expected {N_PARAMS} values, got shape {values.shape}")
        return cls(**dict(zip(PARAM_NAMES, values.tolist())))

    @classmethod
    def from_normalized(cls, unit) -> "ParameterSet":
        """Map a point of the unit cube to parameter space (clipping to it)."""
        unit = np.clip(np.asarray(unit, dtype=np.float64), 0.0, 1.0)
        return cls.from_array(PARAM_LOW + unit * (PARAM_HIGH - PARAM_LOW))

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in PARAM_NAMES])

    def normalized(self) -> np.ndarray:
        """Parameter values scaled to [0, 1] by their bounds."""
        return (self.as_array() - PARAM_LOW) / (PARAM_HIGH - PARAM_LOW)

    def gain_floor_linear(self) -> float:
        return 10.0 ** (self.gain_floor_db / 20.0)


@dataclass
class EnhancerState:
    """Single-stream suppressor state; never share one value across streams."""

    noise_psd: np.ndarray
    prev_gain: np.ndarray
    prev_posteriori: np.ndarray
    hangover_counter: int = 0
    frame_index: int = 0


@dataclass
class EnhancedFrame:
    enhanced_spectrum: np.ndarray
    gains: np.ndarray
    vad_decision: bool
    posteriori_snr: np.ndarray


def init_state(first_frames) -> EnhancerState:
    """Bootstrap the noise tracker from an assumed speech-free lead-in.

    noise_psd starts as the mean power spectrum of the given frames,
    floored at NOISE_PSD_FLOOR; gains start at unity.
    """
    frames = np.atleast_2d(np.asarray(first_frames, dtype=np.complex128))
    if frames.size == 0:
        raise ValueError("init_state needs at least one frame")
    if frames.shape[1] != N_BINS:
        raise ValueError(f"expected {N_BINS}-bin frames, got {frames.shape[1]}")
    noise_psd = np.maximum(np.mean(np.abs(frames) ** 2, axis=0), NOISE_PSD_FLOOR)
    return EnhancerState(
        noise_psd=noise_psd,
        prev_gain=np.ones(N_BINS),
        prev_posteriori=np.zeros(N_BINS),
        hangover_counter=0,
        frame_index=0,
    )


def process_frame(
    state: EnhancerState,
    noisy_spectrum: np.ndarray,
    params: ParameterSet,
) -> tuple[EnhancedFrame, EnhancerState]:
    """Run one frame through the suppression pipeline.

    Returns the enhanced frame and the updated state; the input state is
    left untouched so identical (state, frame, params) triples always give
    bitwise-identical results.
    """
    if not isinstance(state, EnhancerState):
        raise RuntimeError("enhancer state not initialized (call init_state first)")
    spectrum = np.asarray(noisy_spectrum, dtype=np.complex128)
    if spectrum.shape != (N_BINS,):
        raise ValueError(f"expected a {N_BINS}-bin spectrum, got {spectrum.shape}")
    if not np.all(np.isfinite(spectrum.view(np.float64))):
        raise ValueError("noisy spectrum contains NaN or Inf")

    power = np.abs(spectrum) ** 2

    # (1) frame-energy VAD with hangover
    frame_energy = power.sum()
    noise_energy = state.noise_psd.sum()
    if frame_energy > 0.0:
        snr_db = 10.0 * np.log10(frame_energy / noise_energy)
    else:
        snr_db = -np.inf
    raw_speech = snr_db > params.vad_threshold_db
    hangover = state.hangover_counter
    if raw_speech:
        speech = True
        hangover = int(round(params.vad_hangover))
    elif hangover > 0:
        speech = True
        hangover -= 1
    else:
        speech = False

    # (2) recursive noise-PSD update during non-speech
    if speech:
        noise_psd = state.noise_psd.copy()
    else:
        noise_psd = params.noise_beta * state.noise_psd + (1.0 - params.noise_beta) * power
    noise_psd = np.maximum(noise_psd, NOISE_PSD_FLOOR)

    # (3) a posteriori SNR and decision-directed a priori SNR
    posteriori = power / (params.over_estimation * noise_psd)
    prior = (
        params.dd_alpha * state.prev_gain**2 * state.prev_posteriori
        + (1.0 - params.dd_alpha) * np.maximum(posteriori - 1.0, 0.0)
    )

    # (4) Wiener gain, floored
    gains = np.clip(prior / (1.0 + prior), params.gain_floor_linear(), 1.0)

    # (5) apply gains; phase rides along with the noisy spectrum
    enhanced = gains * spectrum

    frame = EnhancedFrame(
        enhanced_spectrum=enhanced,
        gains=gains,
        vad_decision=speech,
        posteriori_snr=posteriori,
    )
    new_state = EnhancerState(
        noise_psd=noise_psd,
        prev_gain=gains,
        prev_posteriori=posteriori,
        hangover_counter=hangover,
        frame_index=state.frame_index + 1,
    )
    return frame, new_state


def enhance_spectrogram(
    noisy: Spectrogram,
    params,
    init_frames: int = DEFAULT_INIT_FRAMES,
) -> Spectrogram:
    """Enhance every frame of a spectrogram; params is one ParameterSet or
    one per frame."""
    n_frames = noisy.n_frames
    if isinstance(params, ParameterSet):
        per_frame = [params] * n_frames
    else:
        per_frame = list(params)
        if len(per_frame) != n_frames:
            raise ValueError(
                f"got {len(per_frame)} parameter sets for {n_frames} frames"
            )
    state = init_state(noisy.frames[: max(1, min(init_frames, n_frames))])
    out = np.empty_like(noisy.frames)
    for t in range(n_frames):
        frame, state = process_frame(state, noisy.frames[t], per_frame[t])
        out[t] = frame.enhanced_spectrum
    return Spectrogram(
        frames=out,
        frame_size=noisy.frame_size,
        hop=noisy.hop,
        sample_rate=noisy.sample_rate,
    )


def enhance_utterance(
    noisy: AudioSignal,
    params,
    frame_size: int = DEFAULT_FRAME_SIZE,
    hop: int = DEFAULT_HOP,
    init_frames: int = DEFAULT_INIT_FRAMES,
) -> AudioSignal:
    """Full pipeline: stft -> per-frame suppression -> istft.

    Deterministic given inputs; output has the input's length.
    """
    spec = stft(noisy, frame_size=frame_size, hop=hop)
    enhanced = enhance_spectrogram(spec, params, init_frames=init_frames)
    return istft(enhanced, length=len(noisy))
