"""Tests for the STFT analysis/synthesis stack."""

import numpy as np
import pytest

from adaptive_denoise import dsp


class TestHannWindow:
    def test_length_four_closed_form(self):
        """w[k] = 0.5*(1 - cos(2 pi k / N)) evaluated by hand for N=4."""
        np.testing.assert_allclose(dsp.hann_window(4), [0.0, 0.5, 1.0, 0.5])

    def test_first_coefficient_zero(self):
        for length in (2, 5, 64, 512):
            assert dsp.hann_window(length)[0] == 0.0

    def test_cola_at_half_overlap(self):
        """Periodic Hann satisfies w[k] + w[k+N/2] = 1 for all k."""
        w = dsp.hann_window(512)
        np.testing.assert_allclose(w[:256] + w[256:], 1.0, atol=1e-12)

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            dsp.hann_window(1)


class TestStft:
    def test_zero_signal_zero_frames(self):
        spec = dsp.stft(dsp.AudioSignal(np.zeros(1024)))
        assert spec.n_frames == 3
        np.testing.assert_array_equal(spec.frames, 0.0)

    def test_frame_count_formula(self):
        """floor((len - frame)/hop) + 1 frames; 1600 samples -> 5 frames."""
        spec = dsp.stft(dsp.AudioSignal(np.zeros(1600)))
        assert spec.n_frames == 5

    def test_bin_center_cosine_concentrates_energy(self):
        """A cosine at bin k0's center frequency puts >= 99% of the frame
        energy in bins k0 +- 1 (checked against a brute-force DFT)."""
        k0 = 32
        n = np.arange(2048)
        x = np.cos(2 * np.pi * k0 * n / 512)
        spec = dsp.stft(dsp.AudioSignal(x))
        window = dsp.hann_window(512)
        for t in (0, 3):
            frame = x[t * 256 : t * 256 + 512] * window
            brute = np.array(
                [np.sum(frame * np.exp(-2j * np.pi * k * np.arange(512) / 512))
                 for k in range(257)]
            )
            np.testing.assert_allclose(spec.frames[t], brute, atol=1e-9)
            energy = np.abs(spec.frames[t]) ** 2
            assert energy[k0 - 1 : k0 + 2].sum() / energy.sum() >= 0.99

    def test_shorter_than_frame_rejected(self):
        with pytest.raises(ValueError):
            dsp.stft(dsp.AudioSignal(np.zeros(511)))

    def test_bad_hop_rejected(self):
        with pytest.raises(ValueError):
            dsp.stft(dsp.AudioSignal(np.zeros(1024)), frame_size=512, hop=128)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=2048)
        y = rng.normal(size=2048)
        a, b = 1.7, -0.3
        lhs = dsp.stft(dsp.AudioSignal(a * x + b * y)).frames
        rhs = a * dsp.stft(dsp.AudioSignal(x)).frames + b * dsp.stft(
            dsp.AudioSignal(y)
        ).frames
        np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())

    def test_parseval_per_frame(self):
        """Spectral energy equals windowed time energy per frame (rfft
        double-counts interior bins)."""
        rng = np.random.default_rng(4)
        x = rng.normal(size=1536)
        spec = dsp.stft(dsp.AudioSignal(x))
        window = dsp.hann_window(512)
        for t in range(spec.n_frames):
            frame = x[t * 256 : t * 256 + 512] * window
            e_time = np.sum(frame**2)
            mag2 = np.abs(spec.frames[t]) ** 2
            e_spec = (mag2[0] + mag2[-1] + 2 * mag2[1:-1].sum()) / 512
            np.testing.assert_allclose(e_spec, e_time, rtol=1e-9)


class TestIstft:
    def test_round_trip_interior(self):
        """istft(stft(x)) reproduces the interior to relative RMS < 1e-10."""
        rng = np.random.default_rng(0)
        x = rng.uniform(-1, 1, 16000)
        spec = dsp.stft(dsp.AudioSignal(x))
        y = dsp.istft(spec, length=len(x)).samples
        lo, hi = 256, (spec.n_frames - 1) * 256
        err = np.sqrt(np.mean((y[lo:hi] - x[lo:hi]) ** 2))
        ref = np.sqrt(np.mean(x[lo:hi] ** 2))
        assert err / ref < 1e-10

    def test_zero_spectrogram_zero_signal(self):
        spec = dsp.Spectrogram(np.zeros((4, 257), dtype=complex))
        np.testing.assert_array_equal(dsp.istft(spec).samples, 0.0)

    def test_scaling_frames_scales_interior(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=4096)
        spec = dsp.stft(dsp.AudioSignal(x))
        spec2 = dsp.Spectrogram(2.0 * spec.frames)
        y = dsp.istft(spec2, length=len(x)).samples
        lo, hi = 256, (spec.n_frames - 1) * 256
        np.testing.assert_allclose(y[lo:hi], 2.0 * x[lo:hi], atol=1e-9)

    def test_requested_length_padded_with_zeros(self):
        spec = dsp.stft(dsp.AudioSignal(np.ones(1000)))
        y = dsp.istft(spec, length=1000)
        assert len(y) == 1000

    def test_wrong_bin_count_rejected(self):
        with pytest.raises(ValueError):
            dsp.Spectrogram(np.zeros((4, 256), dtype=complex))


class TestFeatures:
    def test_zero_spectrum(self):
        np.testing.assert_array_equal(
            dsp.features(np.zeros(257, dtype=complex)), np.zeros(256)
        )

    def test_magnitude_of_single_bin(self):
        """|3 + 4i| = 5."""
        spectrum = np.zeros(257, dtype=complex)
        spectrum[3] = 3 + 4j
        feats = dsp.features(spectrum)
        assert feats[3] == pytest.approx(5.0)
        assert feats.sum() == pytest.approx(5.0)

    def test_non_negative_and_256_dims(self):
        rng = np.random.default_rng(2)
        spectrum = rng.normal(size=257) + 1j * rng.normal(size=257)
        feats = dsp.features(spectrum)
        assert feats.shape == (256,)
        assert np.all(feats >= 0)

    def test_wrong_bin_count_rejected(self):
        with pytest.raises(ValueError):
            dsp.features(np.zeros(256, dtype=complex))


class TestAudioSignal:
    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            dsp.AudioSignal(np.array([0.0, np.nan]))

    def test_bad_sample_rate_rejected(self):
        with pytest.raises(ValueError):
            dsp.AudioSignal(np.zeros(10), sample_rate=0)
