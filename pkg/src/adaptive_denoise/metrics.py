"""Evaluation metrics (SNR, LSD, time-domain MSE), dataset-level reports,
and the derivative-free simplex optimizer used to tune the fixed-parameter
baseline.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .dsp import AudioSignal, Spectrogram, stft
from .enhancer import ParameterSet, enhance_utterance

SNR_CAP_DB = 100.0
LSD_EPS = 1e-10


def _samples(x) -> np.ndarray:
    if isinstance(x, AudioSignal):
        return x.samples
    return np.asarray(x, dtype=np.float64)


def snr_db(clean, estimate) -> float:
    """10*log10(signal energy / error energy), capped at +100 dB."""
    g = _samples(clean)
    g_hat = _samples(estimate)
    if g.shape != g_hat.shape:
        raise ValueError(f"length mismatch: {g.shape} vs {g_hat.shape}")
    sig = float(np.dot(g, g))
    if sig == 0.0:
        raise ValueError("clean signal has zero energy")
    err = float(np.dot(g - g_hat, g - g_hat))
    if err < 1e-20 * sig:
        return SNR_CAP_DB
    return float(10.0 * np.log10(sig / err))


def lsd(clean_spec: Spectrogram, est_spec: Spectrogram) -> float:
    """Log-spectral distance in dB: per-frame RMS of the per-bin log-magnitude
    ratio, averaged over frames."""
    if clean_spec.frames.shape != est_spec.frames.shape:
        raise ValueError(
            f"spectrogram shapes differ: {clean_spec.frames.shape} vs "
            f"{est_spec.frames.shape}"
        )
    ratio = 20.0 * np.log10(
        (np.abs(clean_spec.frames) + LSD_EPS) / (np.abs(est_spec.frames) + LSD_EPS)
    )
    return float(np.mean(np.sqrt(np.mean(ratio**2, axis=1))))


def mse_time(clean, estimate) -> float:
    """Mean squared sample error."""
    g = _samples(clean)
    g_hat = _samples(estimate)
    if g.shape != g_hat.shape:
        raise ValueError(f"length mismatch: {g.shape} vs {g_hat.shape}")
    return float(np.mean((g - g_hat) ** 2))


# ---------------------------------------------------------------------------
# Nelder-Mead over the normalized parameter cube
# ---------------------------------------------------------------------------

NM_REFLECTION = 1.0
NM_EXPANSION = 2.0
NM_CONTRACTION = 0.5
NM_SHRINK = 0.5


@dataclass
class SimplexState:
    vertices: np.ndarray  # (n+1, n) points in the unit cube
    values: np.ndarray  # (n+1,)
    iteration: int = 0


def initial_simplex(unit0: np.ndarray, offset: float = 0.2) -> np.ndarray:
    """The start point plus one vertex per axis, nudged inside the cube."""
    n = unit0.shape[0]
    vertices = np.tile(unit0, (n + 1, 1))
    for i in range(n):
        step = offset if unit0[i] + offset <= 1.0 else -offset
        vertices[i + 1, i] = np.clip(unit0[i] + step, 0.0, 1.0)
    return vertices


def nelder_mead(
    objective,
    initial: ParameterSet,
    max_iter: int = 500,
    tol: float = 1e-10,
    callback=None,
):
    """Derivative-free simplex minimization of a ParameterSet objective.

    Works in the normalized unit cube with projection onto the bounds,
    standard reflect/expand/contract/shrink coefficients, and terminates
    when the simplex value spread drops below tol or after max_iter
    iterations.  Deterministic; never returns a point worse than the best
    evaluated vertex.
    """

    def f(unit):
        value = float(objective(ParameterSet.from_normalized(unit)))
        if not np.isfinite(value):
            raise FloatingPointError(
                f"objective returned non-finite value {value} at {unit}"
            )
        return value

    unit0 = initial.normalized()
    vertices = initial_simplex(unit0)
    values = np.array([f(v) for v in vertices])
    state = SimplexState(vertices=vertices, values=values)
    n = unit0.shape[0]

    for iteration in range(max_iter):
        order = np.argsort(state.values, kind="stable")
        state.vertices = state.vertices[order]
        state.values = state.values[order]
        state.iteration = iteration
        spread = float(state.values[-1] - state.values[0])
        if callback is not None:
            callback(iteration, float(state.values[0]), spread)
        if spread < tol:
            break

        centroid = state.vertices[:-1].mean(axis=0)
        worst = state.vertices[-1]
        reflected = np.clip(centroid + NM_REFLECTION * (centroid - worst), 0.0, 1.0)
        fr = f(reflected)
        if state.values[0] <= fr < state.values[-2]:
            state.vertices[-1], state.values[-1] = reflected, fr
            continue
        if fr < state.values[0]:
            expanded = np.clip(centroid + NM_EXPANSION * (centroid - worst), 0.0, 1.0)
            fe = f(expanded)
            if fe < fr:
                state.vertices[-1], state.values[-1] = expanded, fe
            else:
                state.vertices[-1], state.values[-1] = reflected, fr
            continue
        contracted = np.clip(centroid + NM_CONTRACTION * (worst - centroid), 0.0, 1.0)
        fc = f(contracted)
        if fc < state.values[-1]:
            state.vertices[-1], state.values[-1] = contracted, fc
            continue
        best = state.vertices[0]
        for i in range(1, n + 1):
            state.vertices[i] = np.clip(
                best + NM_SHRINK * (state.vertices[i] - best), 0.0, 1.0
            )
            state.values[i] = f(state.vertices[i])

    order = np.argsort(state.values, kind="stable")
    best_unit = state.vertices[order[0]]
    return ParameterSet.from_normalized(best_unit), float(state.values[order[0]])


# ---------------------------------------------------------------------------
# offline baseline tuning
# ---------------------------------------------------------------------------


def tune_baseline(
    pairs,
    *,
    weights=(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
    initial: ParameterSet | None = None,
    max_iter: int = 120,
    tol: float = 1e-8,
    frame_size: int = 512,
    hop: int = 256,
    init_frames: int = 6,
    max_utterances: int | None = None,
    callback=None,
) -> tuple[ParameterSet, float]:
    """Simplex-tune one fixed ParameterSet over (clean, noisy) pairs.

    The objective equally weights -SNR, LSD and MSE, each min-max
    normalized over the initial simplex's evaluations so the weighting is
    scale-free.  Deterministic given the same pairs.
    """
    if not pairs:
        raise ValueError("empty tuning split")
    if max_utterances is not None:
        pairs = pairs[:max_utterances]
    if initial is None:
        initial = ParameterSet.defaults()
    clean_specs = [stft(c, frame_size=frame_size, hop=hop) for c, _ in pairs]

    cache = {}

    def raw_metrics(params: ParameterSet) -> np.ndarray:
        key = tuple(np.round(params.as_array(), 12))
        if key not in cache:
            snrs, lsds, mses = [], [], []
            for (clean, noisy), cspec in zip(pairs, clean_specs):
                enhanced = enhance_utterance(
                    noisy, params, frame_size=frame_size, hop=hop,
                    init_frames=init_frames,
                )
                snrs.append(snr_db(clean, enhanced))
                lsds.append(lsd(cspec, stft(enhanced, frame_size=frame_size, hop=hop)))
                mses.append(mse_time(clean, enhanced))
            cache[key] = np.array([np.mean(snrs), np.mean(lsds), np.mean(mses)])
        return cache[key]

    # normalizers from the initial simplex evaluations
    simplex0 = initial_simplex(initial.normalized())
    table = np.array(
        [raw_metrics(ParameterSet.from_normalized(u)) for u in simplex0]
    )
    lo = table.min(axis=0)
    span = np.maximum(table.max(axis=0) - lo, 1e-12)

    def objective(params: ParameterSet) -> float:
        snr, lsd_val, mse = raw_metrics(params)
        terms = (
            -weights[0] * (snr - lo[0]) / span[0]
            + weights[1] * (lsd_val - lo[1]) / span[1]
            + weights[2] * (mse - lo[2]) / span[2]
        )
        return float(terms)

    return nelder_mead(
        objective, initial, max_iter=max_iter, tol=tol, callback=callback
    )


# ---------------------------------------------------------------------------
# dataset-level reporting
# ---------------------------------------------------------------------------

REPORT_COLUMNS = ("utterance_id", "snr_bucket_db", "snr_db", "lsd", "mse")
UNSCORED = "n/a"  # WER / SER / PESQ are out of scope, reported unscored


@dataclass
class MetricReport:
    """Per-utterance and aggregate metrics for one processing method."""

    method: str
    rows: list = field(default_factory=list)  # dicts with REPORT_COLUMNS keys

    @property
    def aggregate(self) -> dict:
        return {
            key: float(np.mean([row[key] for row in self.rows]))
            for key in ("snr_db", "lsd", "mse")
        }

    def buckets(self) -> dict:
        out = {}
        for row in self.rows:
            out.setdefault(row["snr_bucket_db"], []).append(row)
        return {
            bucket: {
                key: float(np.mean([row[key] for row in rows]))
                for key in ("snr_db", "lsd", "mse")
            }
            for bucket, rows in sorted(out.items(), key=lambda kv: (kv[0] is None, kv[0]))
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("method",) + REPORT_COLUMNS)
            for row in self.rows:
                writer.writerow(
                    (self.method,)
                    + tuple(row[c] for c in REPORT_COLUMNS[:2])
                    + tuple(f"{row[c]:.6f}" for c in REPORT_COLUMNS[2:])
                )
            agg = self.aggregate
            writer.writerow(
                (self.method, "aggregate", "",
                 f"{agg['snr_db']:.6f}", f"{agg['lsd']:.6f}", f"{agg['mse']:.6f}")
            )

    def to_json(self) -> str:
        return json.dumps(
            {
                "method": self.method,
                "aggregate": self.aggregate,
                "buckets": {str(k): v for k, v in self.buckets().items()},
                "rows": self.rows,
                "unscored": {"wer": UNSCORED, "ser": UNSCORED, "pesq": UNSCORED},
            },
            sort_keys=True,
            indent=2,
        )


@dataclass
class EvalItem:
    utterance_id: str
    clean: AudioSignal
    noisy: AudioSignal
    snr_bucket_db: float | None = None


def evaluate(
    items,
    method: str,
    enhance_fn=None,
    *,
    frame_size: int = 512,
    hop: int = 256,
) -> MetricReport:
    """Score one method over a split.

    method "noisy" scores the unprocessed input, "clean" the clean-vs-clean
    control; anything else requires enhance_fn(clean, noisy) -> AudioSignal
    (fixed parameters ignore the clean argument; a policy uses it for its
    reward feedback).
    """
    if not items:
        raise ValueError("empty evaluation split")
    if method not in ("noisy", "clean") and enhance_fn is None:
        raise ValueError(f"method {method!r} needs an enhance_fn")
    report = MetricReport(method=method)
    for item in items:
        if method == "noisy":
            estimate = item.noisy
        elif method == "clean":
            estimate = item.clean
        else:
            estimate = enhance_fn(item.clean, item.noisy)
        clean_spec = stft(item.clean, frame_size=frame_size, hop=hop)
        est_spec = stft(estimate, frame_size=frame_size, hop=hop)
        report.rows.append(
            {
                "utterance_id": item.utterance_id,
                "snr_bucket_db": item.snr_bucket_db,
                "snr_db": snr_db(item.clean, estimate),
                "lsd": lsd(clean_spec, est_spec),
                "mse": mse_time(item.clean, estimate),
            }
        )
    return report


def format_table(reports) -> str:
    """Fixed-width summary in the shape of the paper-style results table;
    WER/SER/PESQ columns are reported as n/a."""
    lines = [
        f"{'Method':<28}{'SNR(dB)':>10}{'LSD':>10}{'MSE':>12}"
        f"{'WER':>8}{'SER':>8}{'PESQ':>8}"
    ]
    for report in reports:
        agg = report.aggregate
        lines.append(
            f"{report.method:<28}{agg['snr_db']:>10.2f}{agg['lsd']:>10.2f}"
            f"{agg['mse']:>12.5f}{UNSCORED:>8}{UNSCORED:>8}{UNSCORED:>8}"
        )
    return "\n".join(lines)
