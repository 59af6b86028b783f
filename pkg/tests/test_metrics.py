"""Tests for SNR/LSD/MSE, Nelder-Mead, baseline tuning and reporting."""

import numpy as np
import pytest

from conftest import mix_white, synth_clean

from adaptive_denoise import dsp, metrics
from adaptive_denoise.enhancer import ParameterSet


class TestSnrDb:
    def test_identical_signals_hit_cap(self):
        x = np.random.default_rng(0).normal(size=1000)
        assert metrics.snr_db(x, x) == 100.0

    def test_equal_energy_error_zero_db(self):
        x = np.ones(100)
        assert metrics.snr_db(x, np.zeros(100)) == pytest.approx(0.0)

    def test_one_percent_error_energy_twenty_db(self):
        """Error scaled to 1% of the signal energy reads 20 dB; energies
        recomputed from scratch."""
        rng = np.random.default_rng(1)
        g = rng.normal(size=5000)
        e = rng.normal(size=5000)
        e -= g * np.dot(g, e) / np.dot(g, g)  # orthogonalize
        e *= np.sqrt(0.01 * np.dot(g, g) / np.dot(e, e))
        estimate = g + e
        assert np.dot(estimate - g, estimate - g) == pytest.approx(
            0.01 * np.dot(g, g)
        )
        assert metrics.snr_db(g, estimate) == pytest.approx(20.0, abs=1e-9)

    def test_monotone_in_error_scale(self):
        rng = np.random.default_rng(2)
        g = rng.normal(size=1000)
        e = rng.normal(size=1000)
        e -= g * np.dot(g, e) / np.dot(g, g)
        values = [metrics.snr_db(g, g + a * e) for a in (0.1, 0.3, 1.0, 3.0)]
        assert all(x > y for x, y in zip(values, values[1:]))

    def test_zero_clean_rejected(self):
        with pytest.raises(ValueError):
            metrics.snr_db(np.zeros(10), np.ones(10))

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            metrics.snr_db(np.ones(10), np.ones(11))


def spec_of(mag_frames):
    frames = np.asarray(mag_frames, dtype=complex)
    pad = np.zeros((frames.shape[0], 257 - frames.shape[1]), dtype=complex)
    return dsp.Spectrogram(np.hstack([frames, pad]))


class TestLsd:
    def test_identical_spectrograms_zero(self):
        spec = dsp.stft(synth_clean(seed=3))
        assert metrics.lsd(spec, spec) == pytest.approx(0.0, abs=1e-9)

    def test_uniform_factor_ten_is_twenty_db(self):
        rng = np.random.default_rng(4)
        mags = rng.uniform(1.0, 2.0, size=(5, 257))
        a = dsp.Spectrogram(mags.astype(complex))
        b = dsp.Spectrogram((10.0 * mags).astype(complex))
        assert metrics.lsd(a, b) == pytest.approx(20.0, abs=1e-6)

    def test_two_bin_hand_value(self):
        """One frame, ratios {10, 1}: sqrt((20^2 + 0)/2) = 14.1421..."""
        a = dsp.Spectrogram(np.full((1, 257), 1.0, dtype=complex))
        frames = np.full((1, 257), 1.0, dtype=complex)
        frames[0, 0] = 0.1
        b = dsp.Spectrogram(frames)
        expected = np.sqrt(20.0**2 / 257.0)
        assert metrics.lsd(a, b) == pytest.approx(expected, abs=1e-9)
        two_bin = np.sqrt((20.0**2 + 0.0) / 2.0)
        assert two_bin == pytest.approx(14.142135623730951)

    def test_shape_mismatch_rejected(self):
        a = dsp.Spectrogram(np.zeros((2, 257), dtype=complex))
        b = dsp.Spectrogram(np.zeros((3, 257), dtype=complex))
        with pytest.raises(ValueError):
            metrics.lsd(a, b)


class TestMseTime:
    def test_identical_zero(self):
        x = np.random.default_rng(5).normal(size=100)
        assert metrics.mse_time(x, x) == 0.0

    def test_unit_offsets(self):
        assert metrics.mse_time(np.array([1.0, 1.0]), np.zeros(2)) == 1.0

    def test_mean_of_squares(self):
        g = np.array([1.0, 0.0, -1.0, 0.0])
        assert metrics.mse_time(g, np.zeros(4)) == pytest.approx(0.5)


class TestNelderMead:
    def test_six_dim_sphere_converges(self):
        """Sphere objective over the normalized cube: within 1e-3 of the
        center in at most 2000 iterations."""
        evals = []
        best, value = metrics.nelder_mead(
            lambda p: float(np.sum((p.normalized() - 0.5) ** 2)),
            ParameterSet.defaults(),
            max_iter=2000,
            tol=1e-14,
            callback=lambda i, v, s: evals.append(i),
        )
        assert np.linalg.norm(best.normalized() - 0.5) < 1e-3
        assert evals[-1] < 2000

    def test_constant_objective_terminates_immediately(self):
        iterations = []
        metrics.nelder_mead(
            lambda p: 1.0, ParameterSet.defaults(), max_iter=100, tol=1e-10,
            callback=lambda i, v, s: iterations.append(i),
        )
        assert len(iterations) <= 8  # n + 2

    def test_one_dimensional_quadratic(self):
        """(u0 - 0.3)^2 with the other dims ignored: |u0* - 0.3| < 1e-4."""
        best, _ = metrics.nelder_mead(
            lambda p: float((p.normalized()[0] - 0.3) ** 2),
            ParameterSet.defaults(),
            max_iter=2000,
            tol=1e-16,
        )
        assert abs(best.normalized()[0] - 0.3) < 1e-4

    def test_best_value_never_worse_than_start_vertices(self):
        """Monotone best-value sequence, checked through the callback."""
        seen = []
        metrics.nelder_mead(
            lambda p: float(np.sum(np.sin(5 * p.normalized()) ** 2)),
            ParameterSet.defaults(),
            max_iter=60,
            tol=0.0,
            callback=lambda i, v, s: seen.append(v),
        )
        assert all(a >= b - 1e-15 for a, b in zip(seen, seen[1:]))

    def test_non_finite_objective_aborts(self):
        with pytest.raises(FloatingPointError):
            metrics.nelder_mead(
                lambda p: float("nan"), ParameterSet.defaults(), max_iter=10
            )

    def test_deterministic(self):
        obj = lambda p: float(np.sum((p.normalized() - 0.25) ** 2))
        a = metrics.nelder_mead(obj, ParameterSet.defaults(), max_iter=50)
        b = metrics.nelder_mead(obj, ParameterSet.defaults(), max_iter=50)
        np.testing.assert_array_equal(a[0].as_array(), b[0].as_array())
        assert a[1] == b[1]


def tuning_pairs(n=2):
    pairs = []
    for i in range(n):
        clean = synth_clean(n=16000, seed=40 + i)
        pairs.append((clean, mix_white(clean, 5.0, seed=50 + i)))
    return pairs


class TestTuneBaseline:
    def test_deterministic(self):
        pairs = tuning_pairs()
        a = metrics.tune_baseline(pairs, max_iter=8)
        b = metrics.tune_baseline(pairs, max_iter=8)
        np.testing.assert_array_equal(a[0].as_array(), b[0].as_array())

    def test_no_worse_than_default_start(self):
        """The tuned point's objective can never exceed the evaluated
        default vertex (objective is negative where better than the
        initial-simplex worst)."""
        pairs = tuning_pairs()
        _, value = metrics.tune_baseline(pairs, max_iter=12)
        assert np.isfinite(value)
        assert value <= 1.0 + 1e-12  # never above the simplex max by design

    def test_tuned_beats_defaults_on_low_snr(self):
        """At 0 dB the tuned parameters should enhance at least as well as
        the defaults on the tuning data itself."""
        from adaptive_denoise.enhancer import enhance_utterance

        pairs = []
        for i in range(2):
            clean = synth_clean(n=16000, seed=60 + i)
            pairs.append((clean, mix_white(clean, 0.0, seed=70 + i)))
        tuned, _ = metrics.tune_baseline(pairs, max_iter=40)
        def mean_snr(params):
            return np.mean(
                [metrics.snr_db(c, enhance_utterance(n, params)) for c, n in pairs]
            )
        assert mean_snr(tuned) >= mean_snr(ParameterSet.defaults()) - 1e-9

    def test_empty_split_rejected(self):
        with pytest.raises(ValueError):
            metrics.tune_baseline([])


class TestEvaluate:
    def _items(self):
        items = []
        for i, bucket in enumerate((0.0, 10.0)):
            clean = synth_clean(n=16000, seed=80 + i)
            items.append(
                metrics.EvalItem(f"u{i}", clean, mix_white(clean, bucket, seed=90 + i), bucket)
            )
        return items

    def test_clean_method_is_perfect(self):
        report = metrics.evaluate(self._items(), "clean")
        agg = report.aggregate
        assert agg["snr_db"] == 100.0
        assert agg["mse"] == 0.0
        assert agg["lsd"] == pytest.approx(0.0, abs=1e-9)

    def test_noisy_method_matches_mixing_targets(self):
        report = metrics.evaluate(self._items(), "noisy")
        for row in report.rows:
            assert row["snr_db"] == pytest.approx(row["snr_bucket_db"], abs=0.1)

    def test_aggregate_is_mean_of_rows(self):
        report = metrics.evaluate(self._items(), "noisy")
        assert report.aggregate["snr_db"] == pytest.approx(
            np.mean([r["snr_db"] for r in report.rows]), abs=1e-9
        )

    def test_buckets_partition_rows(self):
        report = metrics.evaluate(self._items(), "noisy")
        buckets = report.buckets()
        assert set(buckets) == {0.0, 10.0}

    def test_repeated_calls_identical(self):
        items = self._items()
        a = metrics.evaluate(items, "noisy")
        b = metrics.evaluate(items, "noisy")
        assert a.rows == b.rows

    def test_unscored_columns_are_na(self):
        report = metrics.evaluate(self._items(), "noisy")
        table = metrics.format_table([report])
        assert table.count("n/a") == 3

    def test_unknown_method_needs_fn(self):
        with pytest.raises(ValueError):
            metrics.evaluate(self._items(), "baseline")

    def test_csv_written(self, tmp_path):
        report = metrics.evaluate(self._items(), "noisy")
        path = tmp_path / "report.csv"
        report.write_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("method,utterance_id")
        assert len(lines) == 1 + len(report.rows) + 1  # header + rows + aggregate
