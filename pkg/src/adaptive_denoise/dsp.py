"""STFT analysis/synthesis and spectral feature extraction.

Fixed geometry: 512-sample frames with a 256-sample hop (a new frame every
16 ms at 16 kHz), periodic Hann windows on both the analysis and synthesis
side.  Synthesis is weighted overlap-add normalized by the summed squared
window, which reconstructs every sample covered by at least one frame
exactly when the spectra are left untouched.
"""

from dataclasses import dataclass

import numpy as np

DEFAULT_SAMPLE_RATE = 16000
DEFAULT_FRAME_SIZE = 512
DEFAULT_HOP = 256
N_BINS = DEFAULT_FRAME_SIZE // 2 + 1  # 257 non-negative-frequency bins
FEATURE_DIM = 256  # policy features drop the Nyquist bin


@dataclass
class AudioSignal:
    """Mono time-domain signal, float64 samples nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioSignal is mono: expected a 1-D sample array")
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")

    def __len__(self):
        return self.samples.shape[0]


@dataclass
class Spectrogram:
    """Complex STFT frames, shape (n_frames, frame_size // 2 + 1)."""

    frames: np.ndarray
    frame_size: int = DEFAULT_FRAME_SIZE
    hop: int = DEFAULT_HOP
    window: str = "hann"
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.complex128)
        if self.frames.ndim != 2:
            raise ValueError("frames must be a 2-D array (n_frames, n_bins)")
        if self.frames.shape[1] != self.frame_size // 2 + 1:
            raise ValueError(
                f"each frame must have frame_size/2 + 1 = {self.frame_size // 2 + 1} "
                f"bins, got {self.frames.shape[1]}"
            )
        if self.hop != self.frame_size // 2:
            raise ValueError("hop must equal frame_size / 2 (50% overlap)")

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def n_bins(self):
        return self.frames.shape[1]


def hann_window(length: int) -> np.ndarray:
    """Periodic Hann window w[k] = 0.5 * (1 - cos(2 pi k / length)).

    The periodic (DFT-even) variant satisfies constant overlap-add at 50%
    overlap: w[k] + w[k + length/2] == 1.
    """
    if length < 2:
        raise ValueError(f"window length must be >= 2, got {length}")
    k = np.arange(length)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / length))


def frame_count(n_samples: int, frame_size: int, hop: int) -> int:
    """Number of full analysis frames for a signal of n_samples."""
    if n_samples < frame_size:
        return 0
    return (n_samples - frame_size) // hop + 1


def stft(
    signal: AudioSignal,
    frame_size: int = DEFAULT_FRAME_SIZE,
    hop: int = DEFAULT_HOP,
) -> Spectrogram:
    """Short-time Fourier transform with a periodic Hann analysis window.

    Frame t covers samples [t*hop, t*hop + frame_size).  Only full frames
    are taken; trailing samples that do not fill a frame are ignored by
    analysis (istft pads them back as zeros when asked for the original
    length).
    """
    if frame_size % 2 != 0:
        raise ValueError("frame_size must be even")
    if hop != frame_size // 2:
        raise ValueError("hop must equal frame_size / 2 (50% overlap)")
    x = signal.samples
    if len(x) < frame_size:
        raise ValueError(
            f"signal of {len(x)} samples is shorter than one frame ({frame_size})"
        )
    n_frames = frame_count(len(x), frame_size, hop)
    window = hann_window(frame_size)
    idx = hop * np.arange(n_frames)[:, None] + np.arange(frame_size)[None, :]
    frames = np.fft.rfft(x[idx] * window, axis=1)
    return Spectrogram(
        frames=frames,
        frame_size=frame_size,
        hop=hop,
        sample_rate=signal.sample_rate,
    )


WSUM_FLOOR = 0.05  # caps edge amplification where window coverage vanishes


def istft(spec: Spectrogram, length: int | None = None) -> AudioSignal:
    """Inverse STFT by weighted overlap-add.

    Uses the same Hann window on synthesis and divides by the summed
    squared window.  The divisor is floored at WSUM_FLOOR so spectral
    modifications cannot be amplified without bound in the first/last
    half-frame, where window coverage tends to zero (those edge samples
    are excluded from the exact-reconstruction guarantee anyway).  Samples
    not covered by any frame come back as zeros.
    """
    frames = spec.frames
    frame_size, hop = spec.frame_size, spec.hop
    n_frames = frames.shape[0]
    coverage = (n_frames - 1) * hop + frame_size if n_frames else 0
    if length is None:
        length = coverage
    window = hann_window(frame_size)
    out = np.zeros(max(length, coverage), dtype=np.float64)
    wsum = np.zeros_like(out)
    time_frames = np.fft.irfft(frames, n=frame_size, axis=1)
    for t in range(n_frames):
        start = t * hop
        out[start : start + frame_size] += time_frames[t] * window
        wsum[start : start + frame_size] += window * window
    out /= np.maximum(wsum, WSUM_FLOOR)
    return AudioSignal(out[:length], sample_rate=spec.sample_rate)


def features(frame: np.ndarray) -> np.ndarray:
    """Magnitudes of bins 0..255 of a 257-bin spectrum (Nyquist dropped)."""
    frame = np.asarray(frame)
    if frame.shape != (N_BINS,):
        raise ValueError(f"expected a {N_BINS}-bin spectrum, got shape {frame.shape}")
    return np.abs(frame[:FEATURE_DIM])
