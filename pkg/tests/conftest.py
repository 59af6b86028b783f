"""Shared test helpers."""

import numpy as np

from adaptive_denoise import dsp


def synth_clean(n=32000, sr=16000, seed=0):
    """Harmonic tone bursts with exact-silence lead-in/gaps; the silences
    keep the enhancer's VAD bootstrap honest."""
    rng = np.random.default_rng(seed)
    x = np.zeros(n)
    t = np.arange(n) / sr
    pos = int(0.3 * sr)
    while pos < n - int(0.5 * sr):
        dur = int(rng.uniform(0.15, 0.3) * sr)
        f0 = rng.uniform(120, 220)
        seg = np.zeros(dur)
        for k in range(1, 12):
            seg += np.sin(2 * np.pi * k * f0 * t[:dur] + rng.uniform(0, 2 * np.pi)) / k
        seg *= np.sin(np.pi * np.arange(dur) / dur) * 0.15
        x[pos : pos + dur] = seg
        pos += dur + int(rng.uniform(0.1, 0.25) * sr)
    return dsp.AudioSignal(x, sr)


def mix_white(clean, snr_db, seed=100):
    """Clean plus white noise at an exact SNR; returns the noisy signal."""
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=len(clean))
    k = np.sqrt(
        np.sum(clean.samples**2) / (np.sum(noise**2) * 10 ** (snr_db / 10.0))
    )
    return dsp.AudioSignal(clean.samples + k * noise, clean.sample_rate)
