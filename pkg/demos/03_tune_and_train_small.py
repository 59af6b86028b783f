"""A desk-scale end-to-end run: synthesize a small corpus, simplex-tune the
fixed baseline, train the RL controller briefly, and compare.

Uses a deliberately tiny corpus and episode budget so it finishes in about
two minutes; the full-size analog lives in tests/test_acceptance.py.

Run:  python demos/03_tune_and_train_small.py
"""

import tempfile
import time
from pathlib import Path

import numpy as np

from adaptive_denoise import data, dsp, enhancer, metrics, policy, trainer

t0 = time.time()
workdir = Path(tempfile.mkdtemp(prefix="adaptive_denoise_demo_"))
print(f"working in {workdir}")

# 1. corpus: 24 clean utterances, mixed over the 0-30 dB grid
corpus_cfg = data.CorpusConfig(n_clean=24, n_noise=6, n_rir=2, duration_s=3.0)
dirs = data.synth_corpus(corpus_cfg, workdir, seed=42)
manifest = data.build_manifest(dirs["clean"], dirs["noise"],
                               snr_grid=(0, 10, 20, 30), seed=42)
manifest = data.mix_manifest(manifest, workdir / "noisy")
splits = {
    name: [
        trainer.Utterance(e.utterance_id, data.read_wav(e.clean_path),
                          data.read_wav(e.noisy_path), e.target_snr_db)
        for e in manifest.split(name)
    ]
    for name in ("train", "val", "test")
}
print(f"corpus ready ({time.time() - t0:.0f}s): "
      f"{len(splits['train'])}/{len(splits['val'])}/{len(splits['test'])} utterances")

# 2. offline simplex tuning of the fixed baseline
pairs = [(u.clean, u.noisy) for u in splits["train"]]
tuned, _ = metrics.tune_baseline(pairs, max_iter=30)
print(f"tuned baseline ({time.time() - t0:.0f}s):")
for name, value in zip(enhancer.PARAM_NAMES, tuned.as_array()):
    print(f"  {name:18} {value:8.3f}")

# 3. short RL training from the tuned operating point
theta0 = policy.init_policy(dsp.FEATURE_DIM + 6 + 1, hidden_size=32, n_heads=6,
                            rng=np.random.default_rng(0), hold_bias=1.5)
cfg = trainer.TrainerConfig(
    learning_rate=3e-3, epochs=5, max_episodes=100,
    baseline_mode="reference", discount=0.0, clip_norm=1.0,
    selection_metric="snr", selection_require_mse=True,
)
result = trainer.train(theta0, splits["train"], splits["val"], tuned, cfg)
print(f"trained {result.episodes_run} episodes ({time.time() - t0:.0f}s), "
      f"best epoch {result.best_epoch}")

# 4. compare on the test split
items = [metrics.EvalItem(u.utterance_id, u.clean, u.noisy, u.snr_bucket)
         for u in splits["test"]]

def policy_enhance(clean, noisy):
    traj = trainer.run_episode_spectra(
        result.theta, dsp.stft(clean), dsp.stft(noisy), tuned, deterministic=True
    )
    return dsp.istft(traj.enhanced, length=len(clean))

reports = [
    metrics.evaluate(items, "noisy"),
    metrics.evaluate(items, "baseline",
                     lambda c, n: enhancer.enhance_utterance(n, tuned)),
    metrics.evaluate(items, "rl-baselined", policy_enhance),
    metrics.evaluate(items, "clean"),
]
print()
print(metrics.format_table(reports))
print(f"\ntotal {time.time() - t0:.0f}s")
