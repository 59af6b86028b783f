"""Corpus construction: WAV file I/O, clean/noise mixing at exact target
SNRs, room-impulse-response convolution, manifest management, and a seeded
synthetic corpus generator (speech-like harmonic complexes plus white,
pink and babble-like noise) standing in for a real recording set.
"""

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dsp import AudioSignal

MANIFEST_SCHEMA_VERSION = 1
SPLITS = ("train", "val", "test")

_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_IEEE_FLOAT = 3
_PCM16_SCALE = 32768.0


class WavParseError(Exception):
    """Malformed or truncated RIFF/WAVE file."""


class UnsupportedWavFormat(Exception):
    """Well-formed WAV we deliberately do not handle."""


# ---------------------------------------------------------------------------
# WAV reader / writer (RIFF PCM16 and IEEE float32, mono)
# ---------------------------------------------------------------------------


def read_wav(path) -> AudioSignal:
    """Read a mono PCM-16 or float-32 WAV; 16-bit samples scale by 1/32768."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise WavParseError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    data = None
    pos = 12
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", raw, pos + 4)
        body_start = pos + 8
        if chunk_id == b"fmt ":
            if chunk_size < 16 or body_start + 16 > len(raw):
                raise WavParseError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", raw, body_start)
        elif chunk_id == b"data":
            if body_start + chunk_size > len(raw):
                raise WavParseError(f"{path}: data chunk truncated")
            data = raw[body_start : body_start + chunk_size]
        pos = body_start + chunk_size + (chunk_size & 1)
    if fmt is None or data is None:
        raise WavParseError(f"{path}: missing fmt or data chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if channels != 1:
        raise UnsupportedWavFormat(f"{path}: {channels} channels (mono only)")
    if audio_format == _WAVE_FORMAT_PCM and bits == 16:
        samples = np.frombuffer(data, dtype="<i2").astype(np.float64) / _PCM16_SCALE
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
    else:
        raise UnsupportedWavFormat(
            f"{path}: format {audio_format} / {bits}-bit not supported"
        )
    return AudioSignal(samples, sample_rate=sample_rate)


def write_wav(path, signal: AudioSignal, fmt: str = "float32") -> None:
    """Write mono WAV as 'float32' (IEEE) or 'pcm16'.

    PCM-16 writing inverts read_wav bit-exactly for in-range samples that
    are integer multiples of 1/32768.
    """
    if fmt == "pcm16":
        clipped = np.clip(signal.samples, -1.0, 32767.0 / _PCM16_SCALE)
        payload = np.round(clipped * _PCM16_SCALE).astype("<i2").tobytes()
        audio_format, bits = _WAVE_FORMAT_PCM, 16
    elif fmt == "float32":
        payload = signal.samples.astype("<f4").tobytes()
        audio_format, bits = _WAVE_FORMAT_IEEE_FLOAT, 32
    else:
        raise ValueError(f"unknown wav format {fmt!r} (use 'pcm16' or 'float32')")
    block_align = bits // 8
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(payload), b"WAVE",
        b"fmt ", 16, audio_format, 1, signal.sample_rate,
        signal.sample_rate * block_align, block_align, bits,
        b"data", len(payload),
    )
    Path(path).write_bytes(header + payload)


# ---------------------------------------------------------------------------
# mixing and reverberation
# ---------------------------------------------------------------------------


def mix_at_snr(
    clean: AudioSignal,
    noise: AudioSignal,
    target_snr_db: float,
    rng: np.random.Generator | None = None,
) -> AudioSignal:
    """clean + k*noise with k chosen so the mixture hits the target SNR
    exactly (powers measured over the overlapped region).

    Noise shorter than the clean signal is tiled; the noise segment starts
    at a seeded random offset (offset 0 without an rng).
    """
    x = clean.samples
    n = noise.samples
    if len(n) == 0 or len(x) == 0:
        raise ValueError("empty signal")
    if len(n) < len(x):
        n = np.tile(n, math.ceil(2 * len(x) / len(n)))
    offset = int(rng.integers(0, len(n) - len(x) + 1)) if rng is not None else 0
    segment = n[offset : offset + len(x)]
    p_clean = float(np.dot(x, x)) / len(x)
    p_noise = float(np.dot(segment, segment)) / len(x)
    if p_clean == 0.0:
        raise ValueError("clean signal has zero power")
    if p_noise == 0.0:
        raise ValueError("noise segment has zero power")
    k = math.sqrt(p_clean / (p_noise * 10.0 ** (target_snr_db / 10.0)))
    return AudioSignal(x + k * segment, sample_rate=clean.sample_rate)


def _next_pow2(n: int) -> int:
    return 1 << (n - 1).bit_length()


def convolve_rir(signal: AudioSignal, rir: AudioSignal) -> AudioSignal:
    """Full linear convolution truncated to the input length.

    Direct convolution for short impulse responses, FFT-based fast
    convolution beyond 128 taps.
    """
    x = signal.samples
    h = rir.samples
    if len(h) == 0:
        raise ValueError("empty impulse response")
    if len(h) <= 128:
        out = np.convolve(x, h)
    else:
        size = _next_pow2(len(x) + len(h) - 1)
        out = np.fft.irfft(np.fft.rfft(x, size) * np.fft.rfft(h, size), size)
    return AudioSignal(out[: len(x)], sample_rate=signal.sample_rate)


# ---------------------------------------------------------------------------
# manifests
# ---------------------------------------------------------------------------


@dataclass
class ManifestEntry:
    utterance_id: str
    clean_path: str
    noise_path: str
    target_snr_db: float
    split: str
    rir_path: str | None = None
    mix_seed: int = 0
    noisy_path: str | None = None


@dataclass
class Manifest:
    entries: list = field(default_factory=list)
    sample_rate: int = 16000
    ratios: tuple = (75, 15, 15)
    schema_version: int = MANIFEST_SCHEMA_VERSION

    def split(self, name: str) -> list:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return [e for e in self.entries if e.split == name]

    def save(self, path) -> None:
        doc = {
            "schema_version": self.schema_version,
            "sample_rate": self.sample_rate,
            "ratios": list(self.ratios),
            "entries": [vars(e) for e in self.entries],
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path) -> "Manifest":
        doc = json.loads(Path(path).read_text())
        if doc.get("schema_version") != MANIFEST_SCHEMA_VERSION:
            raise ValueError(
                f"{path}: unsupported manifest schema {doc.get('schema_version')}"
            )
        return cls(
            entries=[ManifestEntry(**e) for e in doc["entries"]],
            sample_rate=doc["sample_rate"],
            ratios=tuple(doc["ratios"]),
        )


def largest_remainder_split(total: int, ratios) -> list:
    """Integer split sizes proportional to ratios, largest remainder first."""
    ratios = np.asarray(ratios, dtype=np.float64)
    quotas = total * ratios / ratios.sum()
    counts = np.floor(quotas).astype(int)
    remainder = total - counts.sum()
    order = np.argsort(-(quotas - counts), kind="stable")
    counts[order[:remainder]] += 1
    return counts.tolist()


def build_manifest(
    clean_dir,
    noise_dir,
    rir_dir=None,
    snr_grid=(0.0, 10.0, 20.0, 30.0),
    ratios=(75, 15, 15),
    seed: int = 0,
    sample_rate: int = 16000,
) -> Manifest:
    """Deterministic seeded pairing of clean files with noise, SNR targets
    (round-robin within each split so every bucket is populated) and
    optional RIRs; splits are disjoint by utterance."""
    clean_files = sorted(str(p) for p in Path(clean_dir).glob("*.wav"))
    noise_files = sorted(str(p) for p in Path(noise_dir).glob("*.wav"))
    if not clean_files:
        raise ValueError(f"no clean wav files under {clean_dir}")
    if not noise_files:
        raise ValueError(f"no noise wav files under {noise_dir}")
    rir_files = []
    if rir_dir is not None:
        rir_files = sorted(str(p) for p in Path(rir_dir).glob("*.wav"))
        if not rir_files:
            raise ValueError(f"no rir wav files under {rir_dir}")

    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(10,)))
    order = rng.permutation(len(clean_files))
    counts = largest_remainder_split(len(clean_files), ratios)
    snr_grid = [float(s) for s in snr_grid]

    entries = []
    cursor = 0
    for split_name, count in zip(SPLITS, counts):
        for j in range(count):
            idx = order[cursor]
            clean_path = clean_files[idx]
            noise_path = noise_files[int(rng.integers(0, len(noise_files)))]
            rir_path = (
                rir_files[int(rng.integers(0, len(rir_files)))] if rir_files else None
            )
            entries.append(
                ManifestEntry(
                    utterance_id=Path(clean_path).stem,
                    clean_path=clean_path,
                    noise_path=noise_path,
                    target_snr_db=snr_grid[j % len(snr_grid)],
                    split=split_name,
                    rir_path=rir_path,
                    mix_seed=int(rng.integers(0, 2**31)),
                )
            )
            cursor += 1
    return Manifest(entries=entries, sample_rate=sample_rate, ratios=tuple(ratios))


def mix_manifest(manifest: Manifest, out_dir) -> Manifest:
    """Produce the noisy file for every entry; returns the manifest with
    noisy paths filled in."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for entry in manifest.entries:
        clean = read_wav(entry.clean_path)
        noise = read_wav(entry.noise_path)
        if clean.sample_rate != noise.sample_rate:
            raise ValueError(
                f"{entry.utterance_id}: sample-rate mismatch "
                f"{clean.sample_rate} vs {noise.sample_rate}"
            )
        rng = np.random.default_rng(entry.mix_seed)
        noisy = mix_at_snr(clean, noise, entry.target_snr_db, rng)
        if entry.rir_path is not None:
            noisy = convolve_rir(noisy, read_wav(entry.rir_path))
        noisy_path = out_dir / f"{entry.utterance_id}_noisy.wav"
        write_wav(noisy_path, noisy, fmt="float32")
        entry.noisy_path = str(noisy_path)
    return manifest


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------


@dataclass
class CorpusConfig:
    n_clean: int = 140
    n_noise: int = 12
    n_rir: int = 6
    duration_s: float = 4.0
    noise_duration_s: float = 5.0
    sample_rate: int = 16000
    f0_low_hz: float = 90.0
    f0_high_hz: float = 230.0
    lead_silence_s: float = 0.3
    tail_silence_s: float = 0.25
    rt60_low_s: float = 0.15
    rt60_high_s: float = 0.4

    def __post_init__(self):
        if self.n_clean <= 0 or self.n_noise <= 0:
            raise ValueError("corpus counts must be positive")
        if self.duration_s <= 0 or self.sample_rate <= 0:
            raise ValueError("duration and sample rate must be positive")


def synth_speech_like(cfg: CorpusConfig, rng: np.random.Generator) -> AudioSignal:
    """Harmonic-complex utterance: pitch-drifting voiced bursts with formant
    coloring and amplitude modulation, separated by exact-silence gaps."""
    sr = cfg.sample_rate
    n = int(round(cfg.duration_s * sr))
    x = np.zeros(n)
    t_end = n - int(cfg.tail_silence_s * sr)
    pos = int(cfg.lead_silence_s * sr)
    formants = rng.uniform([300.0, 1000.0], [900.0, 2600.0])
    while pos < t_end - int(0.12 * sr):
        dur = int(rng.uniform(0.12, 0.35) * sr)
        dur = min(dur, t_end - pos)
        tt = np.arange(dur) / sr
        f0 = rng.uniform(cfg.f0_low_hz, cfg.f0_high_hz)
        drift = rng.uniform(-25.0, 25.0)
        inst_f0 = f0 + drift * tt / max(tt[-1], 1e-9)
        phase0 = np.cumsum(inst_f0) / sr
        seg = np.zeros(dur)
        k_max = int((sr / 2 - 200.0) // f0)
        for k in range(1, min(k_max, 24) + 1):
            f_k = k * f0
            formant_gain = sum(
                np.exp(-0.5 * ((f_k - fc) / 250.0) ** 2) for fc in formants
            )
            amp = (0.25 + formant_gain) / k
            seg += amp * np.sin(2.0 * np.pi * k * phase0 + rng.uniform(0, 2 * np.pi))
        envelope = np.sin(np.pi * np.arange(dur) / dur) ** 0.5
        am = 1.0 + 0.3 * np.sin(2.0 * np.pi * rng.uniform(2.5, 5.0) * tt)
        seg *= envelope * am * rng.uniform(0.5, 1.0)
        x[pos : pos + dur] += seg
        pos += dur + int(rng.uniform(0.06, 0.3) * sr)
    voiced = x[np.abs(x) > 0]
    if voiced.size:
        x *= 0.08 / max(np.sqrt(np.mean(voiced**2)), 1e-9)
    peak = np.max(np.abs(x))
    if peak > 0.9:
        x *= 0.9 / peak
    return AudioSignal(x, sample_rate=sr)


def synth_white_noise(n: int, sr: int, rng) -> AudioSignal:
    return AudioSignal(rng.normal(0.0, 0.05, size=n), sample_rate=sr)


def synth_pink_noise(n: int, sr: int, rng) -> AudioSignal:
    """1/f-power noise via spectral shaping (about -3 dB per octave)."""
    spec = np.fft.rfft(rng.normal(0.0, 1.0, size=n))
    freqs = np.fft.rfftfreq(n, d=1.0 / sr)
    shape = np.zeros_like(freqs)
    shape[1:] = 1.0 / np.sqrt(freqs[1:])
    x = np.fft.irfft(spec * shape, n)
    x *= 0.05 / np.sqrt(np.mean(x**2))
    return AudioSignal(x, sample_rate=sr)


def synth_babble_noise(n: int, sr: int, rng) -> AudioSignal:
    """Speech-band shaped noise with syllable-rate amplitude modulation."""
    spec = np.fft.rfft(rng.normal(0.0, 1.0, size=n))
    freqs = np.fft.rfftfreq(n, d=1.0 / sr)
    band = np.exp(-0.5 * ((freqs - 900.0) / 700.0) ** 2)
    x = np.fft.irfft(spec * band, n)
    tt = np.arange(n) / sr
    am = (1.0 + 0.35 * np.sin(2 * np.pi * rng.uniform(2.0, 5.0) * tt
                              + rng.uniform(0, 2 * np.pi))) * (
        1.0 + 0.15 * np.sin(2 * np.pi * rng.uniform(5.0, 8.0) * tt
                            + rng.uniform(0, 2 * np.pi))
    )
    x *= am
    x *= 0.05 / np.sqrt(np.mean(x**2))
    return AudioSignal(x, sample_rate=sr)


def synth_rir(cfg: CorpusConfig, rng: np.random.Generator) -> AudioSignal:
    """Direct path plus an exponentially decaying diffuse tail."""
    sr = cfg.sample_rate
    rt60 = rng.uniform(cfg.rt60_low_s, cfg.rt60_high_s)
    n = int(rt60 * sr)
    h = np.zeros(n)
    h[0] = 1.0
    tail_start = int(0.002 * sr)
    tt = np.arange(n - tail_start) / sr
    h[tail_start:] = 0.25 * rng.normal(size=n - tail_start) * np.exp(
        -6.9078 * tt / rt60
    )
    return AudioSignal(h, sample_rate=sr)


_NOISE_KINDS = ("white", "pink", "babble")


def synth_corpus(cfg: CorpusConfig, out_dir, seed: int = 0) -> dict:
    """Generate clean/, noise/ and rir/ directories; fully seeded, so the
    same seed reproduces a bit-identical corpus."""
    out_dir = Path(out_dir)
    clean_dir = out_dir / "clean"
    noise_dir = out_dir / "noise"
    rir_dir = out_dir / "rir"
    for d in (clean_dir, noise_dir, rir_dir):
        d.mkdir(parents=True, exist_ok=True)

    sr = cfg.sample_rate
    n_noise_samples = int(cfg.noise_duration_s * sr)
    for i in range(cfg.n_clean):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(0, i))
        )
        write_wav(clean_dir / f"utt_{i:04d}.wav", synth_speech_like(cfg, rng))
    for i in range(cfg.n_noise):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(1, i))
        )
        kind = _NOISE_KINDS[i % len(_NOISE_KINDS)]
        gen = {
            "white": synth_white_noise,
            "pink": synth_pink_noise,
            "babble": synth_babble_noise,
        }[kind]
        write_wav(noise_dir / f"{kind}_{i:03d}.wav", gen(n_noise_samples, sr, rng))
    for i in range(cfg.n_rir):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(2, i))
        )
        write_wav(rir_dir / f"rir_{i:03d}.wav", synth_rir(cfg, rng))
    return {"clean": str(clean_dir), "noise": str(noise_dir), "rir": str(rir_dir)}
