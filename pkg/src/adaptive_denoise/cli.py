"""Command-line entry point: corpus synthesis, mixing, baseline tuning,
policy training, enhancement and evaluation.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric
abort.  Diagnostics go to stderr; stdout carries only data and paths.
"""

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import data as data_mod
from . import metrics as metrics_mod
from . import policy as policy_mod
from . import trainer as trainer_mod
from .config import Config, ConfigError, load_config
from .data import Manifest, WavParseError, UnsupportedWavFormat
from .dsp import FEATURE_DIM, stft, istft
from .enhancer import N_PARAMS, PARAM_NAMES, ParameterSet, enhance_utterance

PARAMS_SCHEMA_VERSION = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def write_params_file(path, params: ParameterSet, objective_value=None) -> None:
    doc = {
        "schema_version": PARAMS_SCHEMA_VERSION,
        "params": {name: getattr(params, name) for name in PARAM_NAMES},
    }
    if objective_value is not None:
        doc["objective_value"] = objective_value
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def read_params_file(path) -> ParameterSet:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema_version") != PARAMS_SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported params schema {doc.get('schema_version')}")
    return ParameterSet(**doc["params"])


def _load_split(manifest: Manifest, split: str):
    utts = []
    for entry in manifest.split(split):
        if entry.noisy_path is None:
            raise FileNotFoundError(
                f"{entry.utterance_id}: no noisy file recorded; run 'mix' first"
            )
        utts.append(
            trainer_mod.Utterance(
                entry.utterance_id,
                data_mod.read_wav(entry.clean_path),
                data_mod.read_wav(entry.noisy_path),
                entry.target_snr_db,
            )
        )
    return utts


def _trainer_config(cfg: Config) -> trainer_mod.TrainerConfig:
    t = cfg.trainer
    return trainer_mod.TrainerConfig(
        learning_rate=t.learning_rate,
        lr_epoch_decay=t.lr_epoch_decay,
        epochs=t.epochs,
        max_episodes=t.max_episodes,
        baseline_mode=t.baseline_mode,
        ema_decay=t.ema_decay,
        baseline_warmup_episodes=t.baseline_warmup_episodes,
        discount=t.discount,
        normalizer_decay=t.normalizer_decay,
        clip_norm=t.clip_norm,
        reward_domain=t.reward_domain,
        feature_transform=cfg.policy.feature_transform,
        selection_metric=t.selection_metric,
        selection_margin=t.selection_margin,
        selection_require_mse=t.selection_require_mse,
        frame_size=cfg.dsp.frame_size,
        hop=cfg.dsp.hop,
        init_frames=cfg.enhancer.init_frames,
        seed=cfg.seed,
    )


def _init_policy(cfg: Config) -> policy_mod.PolicyParameters:
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(100,))
    )
    return policy_mod.init_policy(
        input_dim=FEATURE_DIM + N_PARAMS + 1,
        hidden_size=cfg.policy.hidden_size,
        n_heads=N_PARAMS,
        rng=rng,
        init_scale=cfg.policy.init_scale,
        forget_bias=cfg.policy.forget_bias,
        hold_bias=cfg.policy.hold_bias,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    d = cfg.data
    corpus_cfg = data_mod.CorpusConfig(
        n_clean=d.n_clean, n_noise=d.n_noise, n_rir=d.n_rir,
        duration_s=d.duration_s, noise_duration_s=d.noise_duration_s,
        sample_rate=cfg.dsp.sample_rate,
    )
    dirs = data_mod.synth_corpus(corpus_cfg, args.out, seed=cfg.seed)
    for name in ("clean", "noise", "rir"):
        print(dirs[name])
    return 0


def cmd_mix(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    snr_grid = cfg.data.snr_grid
    if args.snr_grid:
        snr_grid = [float(s) for s in args.snr_grid.split(",")]
    manifest = data_mod.build_manifest(
        args.clean_dir,
        args.noise_dir,
        rir_dir=args.rir_dir,
        snr_grid=snr_grid,
        ratios=tuple(cfg.data.ratios),
        seed=cfg.seed,
        sample_rate=cfg.dsp.sample_rate,
    )
    manifest = data_mod.mix_manifest(manifest, args.out)
    manifest.save(args.manifest_out)
    print(args.manifest_out)
    return 0


def cmd_tune(args) -> int:
    cfg = load_config(args.config)
    manifest = Manifest.load(args.manifest)
    train_utts = _load_split(manifest, "train")
    pairs = [(u.clean, u.noisy) for u in train_utts]
    trace_rows = []

    def trace_cb(iteration, best_value, spread):
        trace_rows.append((iteration, best_value, spread))

    params, value = metrics_mod.tune_baseline(
        pairs,
        max_iter=args.max_iter,
        frame_size=cfg.dsp.frame_size,
        hop=cfg.dsp.hop,
        init_frames=cfg.enhancer.init_frames,
        max_utterances=args.max_utterances,
        callback=trace_cb,
    )
    write_params_file(args.out, params, objective_value=value)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("iteration", "best_value", "spread"))
            writer.writerows(
                (i, f"{v:.12g}", f"{s:.12g}") for i, v, s in trace_rows
            )
    print(args.out)
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.baseline_mode is not None:
        cfg.trainer.baseline_mode = args.baseline_mode
    manifest = Manifest.load(args.manifest)
    train_utts = _load_split(manifest, "train")
    val_utts = _load_split(manifest, "val")
    initial_params = (
        read_params_file(args.baseline_params)
        if args.baseline_params
        else ParameterSet.defaults()
    )
    theta0 = _init_policy(cfg)
    tcfg = _trainer_config(cfg)
    t0 = time.time()
    log_fh = open(args.log, "w", newline="") if args.log else None
    try:
        if log_fh is not None:
            log_fh.write("episode,episode_id,seed,return,grad_norm\n")
        variants = [
            v if isinstance(v, dict) else {"learning_rate": v[0], "seed": int(v[1])}
            for v in cfg.trainer.train_variants
        ]
        if variants:

            def theta_factory(policy_seed):
                rng = np.random.default_rng(
                    np.random.SeedSequence(entropy=policy_seed, spawn_key=(100,))
                )
                return policy_mod.init_policy(
                    input_dim=FEATURE_DIM + N_PARAMS + 1,
                    hidden_size=cfg.policy.hidden_size,
                    n_heads=N_PARAMS,
                    rng=rng,
                    init_scale=cfg.policy.init_scale,
                    forget_bias=cfg.policy.forget_bias,
                    hold_bias=cfg.policy.hold_bias,
                )

            result = trainer_mod.train_grid(
                theta0, train_utts, val_utts, initial_params, tcfg, variants,
                theta_factory=theta_factory,
                checkpoint_path=args.checkpoint, log_fh=log_fh,
                progress=lambda ov, v: print(
                    f"variant {ov}: val {v:.4f}", file=sys.stderr
                ),
            )
        else:
            result = trainer_mod.train(
                theta0, train_utts, val_utts, initial_params, tcfg,
                checkpoint_path=args.checkpoint, log_fh=log_fh,
                progress=lambda e, n, r, s: print(
                    f"epoch {e}: episodes {n} val_return {r:.4f} val_snr {s:.2f}",
                    file=sys.stderr,
                ),
            )
    finally:
        if log_fh is not None:
            log_fh.close()
    print(
        f"trained {result.episodes_run} episodes in {time.time() - t0:.1f}s; "
        f"best epoch {result.best_epoch}",
        file=sys.stderr,
    )
    print(args.checkpoint)
    return 0


def cmd_enhance(args) -> int:
    cfg = load_config(args.config)
    noisy = data_mod.read_wav(args.in_wav)
    trace = None
    if args.params:
        params = read_params_file(args.params)
        enhanced = enhance_utterance(
            noisy, params, frame_size=cfg.dsp.frame_size, hop=cfg.dsp.hop,
            init_frames=cfg.enhancer.init_frames,
        )
        if args.trace:
            n_frames = stft(noisy, cfg.dsp.frame_size, cfg.dsp.hop).n_frames
            trace = np.tile(params.as_array(), (n_frames, 1))
    else:
        theta, _, ckpt_cfg = policy_mod.load_checkpoint(args.checkpoint)
        initial_params = (
            read_params_file(args.baseline_params)
            if args.baseline_params
            else ParameterSet.defaults()
        )
        enhanced, trace = trainer_mod.policy_enhance(
            theta, noisy, initial_params,
            frame_size=cfg.dsp.frame_size, hop=cfg.dsp.hop,
            init_frames=cfg.enhancer.init_frames,
            feature_transform=cfg.policy.feature_transform,
        )
    data_mod.write_wav(args.out_wav, enhanced, fmt=args.format)
    if args.trace and trace is not None:
        with open(args.trace, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("frame",) + PARAM_NAMES)
            for t in range(trace.shape[0]):
                writer.writerow((t,) + tuple(f"{v:.6g}" for v in trace[t]))
    print(args.out_wav)
    return 0


def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    manifest = Manifest.load(args.manifest)
    utts = _load_split(manifest, args.split)
    items = [
        metrics_mod.EvalItem(u.utterance_id, u.clean, u.noisy, u.snr_bucket)
        for u in utts
    ]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fs, hop = cfg.dsp.frame_size, cfg.dsp.hop

    def policy_fn(checkpoint, initial_params):
        theta, _, _ = policy_mod.load_checkpoint(checkpoint)

        def enhance(clean, noisy):
            traj = trainer_mod.run_episode_spectra(
                theta, stft(clean, fs, hop), stft(noisy, fs, hop),
                initial_params, deterministic=True,
                init_frames=cfg.enhancer.init_frames,
                feature_transform=cfg.policy.feature_transform,
                reward_domain=cfg.trainer.reward_domain,
                normalizer_decay=cfg.trainer.normalizer_decay,
            )
            return istft(traj.enhanced, length=len(clean))

        return enhance

    methods = []
    if args.noisy:
        methods.append(("noisy", None))
    if args.baseline:
        params = read_params_file(args.baseline)
        methods.append(
            (
                "baseline",
                lambda clean, noisy, p=params: enhance_utterance(
                    noisy, p, frame_size=fs, hop=hop,
                    init_frames=cfg.enhancer.init_frames,
                ),
            )
        )
    rl_initial = (
        read_params_file(args.baseline) if args.baseline else ParameterSet.defaults()
    )
    if args.rl_unbiased:
        methods.append(("rl-unbiased", policy_fn(args.rl_unbiased, rl_initial)))
    if args.rl_baselined:
        methods.append(("rl-baselined", policy_fn(args.rl_baselined, rl_initial)))
    if args.clean:
        methods.append(("clean", None))
    if not methods:
        raise UsageError("select at least one method to evaluate")

    reports = []
    for name, fn in methods:
        report = metrics_mod.evaluate(items, name, fn, frame_size=fs, hop=hop)
        report.write_csv(out_dir / f"report_{name}.csv")
        (out_dir / f"report_{name}.json").write_text(report.to_json())
        reports.append(report)

    with open(out_dir / "buckets.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("method", "snr_bucket_db", "snr_db", "lsd", "mse"))
        for report in reports:
            for bucket, agg in report.buckets().items():
                writer.writerow(
                    (report.method, bucket, f"{agg['snr_db']:.6f}",
                     f"{agg['lsd']:.6f}", f"{agg['mse']:.6f}")
                )
    table = metrics_mod.format_table(reports)
    (out_dir / "summary.txt").write_text(table + "\n")
    print(table)
    return 0


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="adaptive-denoise", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override config seed")

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    common(p)
    p.add_argument("--out", required=True, help="corpus output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mix", help="build a manifest and mix noisy files")
    common(p)
    p.add_argument("--clean-dir", required=True)
    p.add_argument("--noise-dir", required=True)
    p.add_argument("--rir-dir", default=None)
    p.add_argument("--snr-grid", default=None, help="comma-separated dB targets")
    p.add_argument("--out", required=True, help="directory for noisy wavs")
    p.add_argument("--manifest-out", required=True)
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("tune", help="simplex-tune the fixed parameter baseline")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output parameter document")
    p.add_argument("--max-iter", type=int, default=120)
    p.add_argument("--max-utterances", type=int, default=None)
    p.add_argument("--trace", default=None, help="iteration/value CSV")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("train", help="train the RL controller")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--baseline-params", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--log", default=None, help="per-episode CSV log")
    p.add_argument(
        "--baseline-mode", default=None,
        choices=("none", "episode-mean", "ema", "step-ema"),
    )
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="enhance one wav file")
    common(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--params", default=None, help="fixed parameter document")
    group.add_argument("--checkpoint", default=None, help="policy checkpoint")
    p.add_argument("--baseline-params", default=None,
                   help="initial knob values for the policy")
    p.add_argument("--in", dest="in_wav", required=True)
    p.add_argument("--out", dest="out_wav", required=True)
    p.add_argument("--format", default="float32", choices=("float32", "pcm16"))
    p.add_argument("--trace", default=None, help="per-frame parameter CSV")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("eval", help="evaluate methods over a manifest split")
    common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--noisy", action="store_true")
    p.add_argument("--clean", action="store_true")
    p.add_argument("--baseline", default=None, help="fixed parameter document")
    p.add_argument("--rl-unbiased", default=None, help="policy checkpoint")
    p.add_argument("--rl-baselined", default=None, help="policy checkpoint")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (WavParseError, UnsupportedWavFormat, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (json.JSONDecodeError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
