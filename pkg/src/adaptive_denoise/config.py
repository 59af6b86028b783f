"""Strictly parsed JSON configuration shared by the CLI subcommands.

Unknown keys are rejected by name so a typo cannot silently fall back to a
default and alter an experiment.
"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


class ConfigError(Exception):
    """Bad configuration document (unknown key, wrong type, bad value)."""


@dataclass
class DspConfig:
    frame_size: int = 512
    hop: int = 256
    sample_rate: int = 16000


@dataclass
class EnhancerConfig:
    init_frames: int = 6


@dataclass
class PolicyConfig:
    hidden_size: int = 196
    init_scale: float = 0.08
    forget_bias: float = 1.0
    hold_bias: float = 0.0
    feature_transform: str = "log1p"


@dataclass
class TrainerSection:
    learning_rate: float = 3e-3
    lr_epoch_decay: float = 1.0
    epochs: int = 5
    max_episodes: int = 500
    baseline_mode: str = "episode-mean"
    ema_decay: float = 0.9
    baseline_warmup_episodes: int = 0
    discount: float = 1.0
    normalizer_decay: float = 1.0
    clip_norm: float = 5.0
    reward_domain: str = "spectral"
    selection_metric: str = "raw-return"
    selection_margin: float = 0.0
    selection_require_mse: bool = False
    train_variants: list = field(default_factory=list)  # [[lr, seed], ...]


@dataclass
class DataSection:
    snr_grid: list = field(default_factory=lambda: [0.0, 10.0, 20.0, 30.0])
    ratios: list = field(default_factory=lambda: [75, 15, 15])
    n_clean: int = 140
    n_noise: int = 12
    n_rir: int = 6
    duration_s: float = 4.0
    noise_duration_s: float = 5.0


@dataclass
class Config:
    seed: int = 0
    dsp: DspConfig = field(default_factory=DspConfig)
    enhancer: EnhancerConfig = field(default_factory=EnhancerConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    trainer: TrainerSection = field(default_factory=TrainerSection)
    data: DataSection = field(default_factory=DataSection)


_SECTIONS = {
    "dsp": DspConfig,
    "enhancer": EnhancerConfig,
    "policy": PolicyConfig,
    "trainer": TrainerSection,
    "data": DataSection,
}


def _fill(cls, doc: dict, path: str):
    known = {f.name: f.type for f in fields(cls)}
    obj = cls()
    for key, value in doc.items():
        where = f"{path}.{key}" if path else key
        if key not in known:
            raise ConfigError(f"unknown config key {where!r}")
        default = getattr(obj, key)
        if isinstance(default, bool) and not isinstance(value, bool):
            raise ConfigError(f"config key {where!r} expects a boolean")
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {where!r} expects a number")
            value = int(value)
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {where!r} expects a number")
            value = float(value)
        elif isinstance(default, str) and not isinstance(value, str):
            raise ConfigError(f"config key {where!r} expects a string")
        elif isinstance(default, list) and not isinstance(value, list):
            raise ConfigError(f"config key {where!r} expects a list")
        setattr(obj, key, value)
    return obj


def config_from_dict(doc: dict) -> Config:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    cfg = Config()
    for key, value in doc.items():
        if key == "seed":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError("config key 'seed' expects an integer")
            cfg.seed = value
        elif key in _SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            setattr(cfg, key, _fill(_SECTIONS[key], value, key))
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return cfg


def load_config(path=None) -> Config:
    """Read a config file, or return all defaults when path is None."""
    if path is None:
        return Config()
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})")
    return config_from_dict(doc)


def dump_config(cfg: Config) -> str:
    return json.dumps(asdict(cfg), indent=2, sort_keys=True)
