"""Experiment configuration: a versioned JSON document with named presets."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from deepscs.channel import ChannelKind
from deepscs.classic.pcm import PcmLaw
from deepscs.model.transceiver import TransceiverConfig, multimedia_config, telephone_config

CONFIG_VERSION = 1
SCENARIOS = {"telephone": 8000, "multimedia": 44100}
SYSTEMS = ("deepsc-s", "cnn-only", "classic", "semi-traditional")
DEFAULT_SNR_GRID = tuple(float(s) for s in range(-2, 13, 2))
DEFAULT_EVAL_CHANNELS = ("awgn", "rayleigh", "rician")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str = "telephone"
    system: str = "deepsc-s"
    train_channel: str = "rician"
    train_snr_db: float = 8.0
    eval_channels: list[str] = field(default_factory=lambda: list(DEFAULT_EVAL_CHANNELS))
    snr_grid: list[float] = field(default_factory=lambda: list(DEFAULT_SNR_GRID))
    seed: int = 0
    manifest: str | None = None
    n_train: int = 64
    n_test: int = 16
    sequence_length: int = 16384
    frames: int = 128
    frame_length: int = 128
    n_se_blocks: int = 6
    epochs: int = 30
    batch_size: int = 16
    micro_batch: int = 4
    learning_rate: float = 1e-3
    momentum: float = 0.0
    early_stop: bool = True
    pcm_law: str = "alaw8"
    audio_samples: int = 1
    version: int = CONFIG_VERSION

    def __post_init__(self):
        self.validate()

    @property
    def rate(self) -> int:
        return SCENARIOS[self.scenario]

    def validate(self) -> None:
        if self.version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {self.version}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {sorted(SCENARIOS)}, got {self.scenario!r}")
        if self.system not in SYSTEMS:
            raise ConfigError(f"system must be one of {SYSTEMS}, got {self.system!r}")
        if not self.snr_grid or any(not math.isfinite(s) for s in self.snr_grid):
            raise ConfigError("snr_grid must be a non-empty list of finite values")
        if list(self.snr_grid) != sorted(self.snr_grid) or len(set(self.snr_grid)) != len(self.snr_grid):
            raise ConfigError("snr_grid must be strictly increasing")
        if not self.eval_channels:
            raise ConfigError("eval_channels is empty")
        for c in [self.train_channel, *self.eval_channels]:
            ChannelKind.parse(c)
        if self.frames * self.frame_length != self.sequence_length:
            raise ConfigError("frames * frame_length must equal sequence_length")
        for name in ("n_train", "n_test", "epochs", "batch_size", "micro_batch", "n_se_blocks"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.learning_rate < 0 or not 0 <= self.momentum < 1:
            raise ConfigError("learning_rate must be >= 0 and momentum in [0, 1)")
        try:
            PcmLaw(self.pcm_law)
        except ValueError as exc:
            raise ConfigError(f"unknown pcm_law {self.pcm_law!r}") from exc

    def model_config(self, system: str | None = None) -> TransceiverConfig:
        """Architecture for a neural system; the scenario fixes the channel-coder width."""
        system = system or self.system
        variant = {"deepsc-s": "deepsc-s", "cnn-only": "cnn-only", "semi-traditional": "feature-codec"}.get(system)
        if variant is None:
            raise ConfigError(f"system {system!r} has no neural model")
        make = telephone_config if self.scenario == "telephone" else multimedia_config
        return make(variant, frames=self.frames, frame_length=self.frame_length, n_se_blocks=self.n_se_blocks)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        return cls.from_dict(d)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


def robust_preset(**overrides) -> ExperimentConfig:
    """Train once on Rician at 8 dB, evaluate on every channel kind."""
    return ExperimentConfig(train_channel="rician", train_snr_db=8.0, **overrides)


def desk_preset(**overrides) -> ExperimentConfig:
    """Reduced-depth robust preset sized for a single CPU core."""
    base = dict(n_se_blocks=2, learning_rate=1e-2, early_stop=False, seed=42)
    base.update(overrides)
    return robust_preset(**base)
