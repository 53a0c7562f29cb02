"""The neural transceivers: DeepSC-S, its CNN-only ablation, and the feature codec.

Parameter names are prefixed by the trainable group they belong to:
``alpha`` (semantic encoder), ``beta`` (channel encoder), ``chi`` (channel
decoder) and ``delta`` (semantic decoder).
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from deepscs.channel import (
    DEGENERATE_GAIN,
    ChannelKind,
    DegenerateChannelError,
    make_rng,
    sample_channel,
    snr_to_noise_variance,
)
from deepscs.model.layers import Conv, Module, SeResNetBlock, SeResNetConfig
from deepscs.nn import ops
from deepscs.nn.tensor import Tensor

VARIANTS = ("deepsc-s", "cnn-only", "feature-codec")


@dataclass(frozen=True)
class TransceiverConfig:
    variant: str = "deepsc-s"
    frames: int = 128
    frame_length: int = 128
    n_se_blocks: int = 6
    coder_filters: int = 8
    kernel_size: int = 5
    feature_filters: int = 32
    se: SeResNetConfig = field(default_factory=SeResNetConfig)
    init: str = "variance_scaling_fan_in"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if (self.frames * self.frame_length * self.coder_filters) % 2:
            raise ValueError("F*L*filters must be even to form complex symbols")

    @property
    def samples_per_sequence(self) -> int:
        return self.frames * self.frame_length

    @property
    def symbols_per_sequence(self) -> int:
        return self.frames * self.frame_length * self.coder_filters // 2

    @property
    def feature_depth(self) -> int:
        return self.se.out_channels if self.variant == "deepsc-s" else self.feature_filters

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TransceiverConfig":
        d = dict(d)
        if "se" in d and isinstance(d["se"], dict):
            d["se"] = SeResNetConfig(**d["se"])
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def telephone_config(variant: str = "deepsc-s", **overrides) -> TransceiverConfig:
    return TransceiverConfig(variant=variant, coder_filters=8, **overrides)


def multimedia_config(variant: str = "deepsc-s", **overrides) -> TransceiverConfig:
    return TransceiverConfig(variant=variant, coder_filters=16, **overrides)


class _Stack(Module):
    def __init__(self, layers: list):
        self.layers = layers

    def __call__(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x

    def conv_shapes(self):
        return [s for layer in self.layers for s in layer.conv_shapes()]

    def extra_conv_shapes(self):
        return [s for layer in self.layers if hasattr(layer, "extra_conv_shapes") for s in layer.extra_conv_shapes()]

    def dense_shapes(self):
        return [s for layer in self.layers if hasattr(layer, "dense_shapes") for s in layer.dense_shapes()]


@dataclass
class ChannelState:
    """Gains and noise used for one pass through the channel layer."""

    h: np.ndarray  # complex, one per batch item
    noise: np.ndarray  # real pairs, same shape as the transmitted tensor
    noise_variance: float


class Transceiver(Module):
    """DeepSC-S (SE-ResNet semantic coder) or the CNN-only ablation."""

    def __init__(self, cfg: TransceiverConfig, seed: int = 0, dtype=np.float32):
        if cfg.variant == "feature-codec":
            raise ValueError("use FeatureCodec for the feature-codec variant")
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        rng = make_rng(seed, 0xA11CE)
        k, c = cfg.kernel_size, cfg.coder_filters
        d = cfg.feature_depth
        if cfg.variant == "deepsc-s":
            self.alpha = _Stack([SeResNetBlock(cfg.se, 1 if i == 0 else d, rng, dtype) for i in range(cfg.n_se_blocks)])
        else:
            self.alpha = _Stack([Conv(1 if i == 0 else d, d, k, "relu", rng, dtype) for i in range(cfg.n_se_blocks)])
        self.beta = Conv(d, c, k, None, rng, dtype)
        self.chi = Conv(c, c, k, "relu", rng, dtype)
        if cfg.variant == "deepsc-s":
            blocks = [SeResNetBlock(cfg.se, c if i == 0 else d, rng, dtype) for i in range(cfg.n_se_blocks)]
        else:
            blocks = [Conv(c if i == 0 else d, d, k, "relu", rng, dtype) for i in range(cfg.n_se_blocks)]
        self.delta = _Stack(blocks + [Conv(d, 1, k, None, rng, dtype)])

    # -- transmitter -------------------------------------------------------
    def semantic_encode(self, m: Tensor) -> Tensor:
        b, f, l = m.shape
        return self.alpha(ops.reshape(m, (b, f, l, 1)))

    def channel_encode(self, features: Tensor) -> Tensor:
        """Features -> unit-power complex symbols as (B, F*N, 2) real pairs."""
        u = self.beta(features)
        x = ops.reshape(u, (u.shape[0], -1, 2))
        return ops.power_normalize(x)

    # -- channel -----------------------------------------------------------
    def draw_channel(self, batch: int, kind: ChannelKind, snr_db: float | None,
                     rng: np.random.Generator) -> ChannelState:
        """Block fading: one gain per sequence. ``snr_db=None`` means noiseless."""
        h = np.atleast_1d(sample_channel(kind, rng, size=batch)).astype(complex)
        n_sym = self.cfg.symbols_per_sequence
        if snr_db is None:
            var = 0.0
            noise = np.zeros((batch, n_sym, 2), dtype=self.dtype)
        else:
            var = snr_to_noise_variance(snr_db)
            noise = rng.normal(0.0, np.sqrt(var / 2.0), (batch, n_sym, 2)).astype(self.dtype)
        return ChannelState(h, noise, var)

    def channel_layer(self, x: Tensor, state: ChannelState, equalize: bool = True) -> Tensor:
        y = ops.complex_gain(x, state.h, state.noise)
        if not equalize:
            return y
        if np.any(np.abs(state.h) < DEGENERATE_GAIN):
            raise DegenerateChannelError("channel gain too small to equalize")
        return ops.complex_gain(y, 1.0 / state.h)

    # -- receiver ----------------------------------------------------------
    def channel_decode(self, y: Tensor) -> Tensor:
        cfg = self.cfg
        v = ops.reshape(y, (y.shape[0], cfg.frames, cfg.frame_length, cfg.coder_filters))
        return self.chi(v)

    def semantic_decode(self, b_hat: Tensor) -> Tensor:
        out = self.delta(b_hat)
        b, f, l, _ = out.shape
        return ops.reshape(out, (b, f, l))

    def forward(self, m: Tensor, state: ChannelState, equalize: bool = True) -> Tensor:
        x = self.channel_encode(self.semantic_encode(m))
        y = self.channel_layer(x, state, equalize)
        return self.semantic_decode(self.channel_decode(y))

    __call__ = forward

    # -- complexity accounting ---------------------------------------------
    def transmitter_convs(self):
        return self.alpha.conv_shapes() + self.beta.conv_shapes()

    def receiver_convs(self):
        return self.chi.conv_shapes() + self.delta.conv_shapes()

    def extra_convs(self):
        return self.alpha.extra_conv_shapes() + self.delta.extra_conv_shapes()

    def dense_layers(self):
        return self.alpha.dense_shapes() + self.delta.dense_shapes()


class FeatureCodec(Module):
    """Back-to-back CNN feature encoder/decoder used around the classic chain."""

    def __init__(self, cfg: TransceiverConfig, seed: int = 0, dtype=np.float32, n_hidden: int = 4):
        if cfg.variant != "feature-codec":
            cfg = dataclasses.replace(cfg, variant="feature-codec")
        self.cfg = cfg
        self.dtype = np.dtype(dtype)
        rng = make_rng(seed, 0xC0DEC)
        k, c, d = cfg.kernel_size, cfg.coder_filters, cfg.feature_filters
        self.encoder = _Stack([Conv(1 if i == 0 else d, d, k, "relu", rng, dtype) for i in range(n_hidden)]
                              + [Conv(d, c, k, None, rng, dtype)])
        self.decoder = _Stack([Conv(c, c, k, "relu", rng, dtype)]
                              + [Conv(c if i == 0 else d, d, k, "relu", rng, dtype) for i in range(n_hidden)]
                              + [Conv(d, 1, k, None, rng, dtype)])

    def encode(self, m: Tensor) -> Tensor:
        b, f, l = m.shape
        return self.encoder(ops.reshape(m, (b, f, l, 1)))

    def decode(self, features: Tensor) -> Tensor:
        out = self.decoder(features)
        b, f, l, _ = out.shape
        return ops.reshape(out, (b, f, l))

    def forward(self, m: Tensor, state=None, equalize: bool = True) -> Tensor:
        return self.decode(self.encode(m))

    __call__ = forward

    def transmitter_convs(self):
        return self.encoder.conv_shapes()

    def receiver_convs(self):
        return self.decoder.conv_shapes()

    def extra_convs(self):
        return []

    def dense_layers(self):
        return []


def build_model(cfg: TransceiverConfig, seed: int = 0, dtype=np.float32):
    if cfg.variant == "feature-codec":
        return FeatureCodec(cfg, seed, dtype)
    return Transceiver(cfg, seed, dtype)


def build_se_resnet_block(cfg: SeResNetConfig, in_channels: int, seed: int = 0, dtype=np.float32) -> SeResNetBlock:
    if in_channels not in (1, 8, 16, 32):
        raise ValueError(f"unsupported block input channel count {in_channels}")
    return SeResNetBlock(cfg, in_channels, make_rng(seed, 0xB10C), dtype)


def build_cnn_only(cfg: TransceiverConfig, seed: int = 0, dtype=np.float32) -> Transceiver:
    return Transceiver(dataclasses.replace(cfg, variant="cnn-only"), seed, dtype)


def build_feature_codec(cfg: TransceiverConfig, seed: int = 0, dtype=np.float32) -> FeatureCodec:
    return FeatureCodec(cfg, seed, dtype)
