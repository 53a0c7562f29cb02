"""The traditional baseline: PCM -> turbo -> 64-QAM -> channel -> back."""

from __future__ import annotations

import numpy as np
from scipy.special import erfc

from deepscs.channel import ChannelKind, ChannelRealization, equalize, make_rng, realize, transmit
from deepscs.classic.pcm import PcmLaw, pcm_decode_samples, pcm_encode
from deepscs.classic.qam import qam64_hard_demod, qam64_modulate, qam64_soft_demod
from deepscs.classic.turbo import LLR_CLAMP, TurboConfig, turbo_decode_blocks, turbo_encode
from deepscs.signal import SampleSequence

# stands in for sigma^2 = 0 when scaling LLRs; they saturate at the clamp anyway
NOISELESS_VARIANCE = 1e-12


def channel_encode_bits(bits: np.ndarray, cfg: TurboConfig) -> tuple[np.ndarray, int]:
    """Turbo-encode a bitstream block by block; the last block is zero-padded."""
    k = cfg.block_length
    n_blocks = max(1, -(-bits.size // k))
    padded = np.zeros(n_blocks * k, dtype=np.uint8)
    padded[: bits.size] = bits
    coded = np.concatenate([turbo_encode(b, cfg) for b in padded.reshape(n_blocks, k)])
    return coded, n_blocks


def transmit_bits(bits: np.ndarray, kind: ChannelKind, snr_db: float | None, rng: np.random.Generator,
                  cfg: TurboConfig | None = None, soft: bool = True) -> np.ndarray:
    """Send a bitstream through turbo + 64-QAM + one block-fading channel use."""
    cfg = cfg or TurboConfig()
    coded, n_blocks = channel_encode_bits(bits, cfg)
    x = qam64_modulate(coded)
    if snr_db is None:
        real = realize(kind, 0.0, rng)
        real = ChannelRealization(real.h, float("inf"), 0.0)
    else:
        real = realize(kind, snr_db, rng)
    y = equalize(transmit(x, real, rng), real)
    eff_var = max(real.noise_variance, NOISELESS_VARIANCE) / abs(real.h) ** 2
    if soft:
        llrs = qam64_soft_demod(y, eff_var)
    else:
        llrs = LLR_CLAMP * (1.0 - 2.0 * qam64_hard_demod(y).astype(np.float64))
    decoded = turbo_decode_blocks(llrs.reshape(n_blocks, cfg.coded_length), cfg)
    return decoded.ravel()[: bits.size]


def classic_pipeline(seq: SampleSequence, law: PcmLaw, kind: ChannelKind, snr_db: float | None,
                     seed: int | np.random.Generator = 0, cfg: TurboConfig | None = None,
                     soft: bool = True) -> SampleSequence:
    """Recover ``seq`` after PCM, turbo coding, 64-QAM and the channel. ``snr_db=None`` is noiseless."""
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, 0xC1A55)
    bits = pcm_encode(seq, law)
    rx_bits = transmit_bits(bits, kind, snr_db, rng, cfg, soft)
    return SampleSequence(pcm_decode_samples(rx_bits, law), seq.rate)


def uncoded_bpsk_ber(ebn0_db: float) -> float:
    """Q(sqrt(2 Eb/N0))."""
    ebn0 = 10.0 ** (ebn0_db / 10.0)
    return float(0.5 * erfc(np.sqrt(ebn0)))


def turbo_ber_awgn(ebn0_db: float, n_blocks: int, seed: int = 0, cfg: TurboConfig | None = None) -> float:
    """Monte-Carlo BER of the turbo code with BPSK over AWGN (random info bits)."""
    cfg = cfg or TurboConfig()
    rng = make_rng(seed, 0xBE4, int(round(ebn0_db * 1000)) & 0xFFFF)
    info = rng.integers(0, 2, (n_blocks, cfg.block_length), dtype=np.uint8)
    coded = np.stack([turbo_encode(b, cfg) for b in info])
    esn0 = cfg.rate * 10.0 ** (ebn0_db / 10.0)
    sigma2 = 1.0 / (2.0 * esn0)  # per real dimension, unit-energy BPSK
    y = (1.0 - 2.0 * coded) + rng.normal(0.0, np.sqrt(sigma2), coded.shape)
    llrs = 2.0 * y / sigma2
    decoded = turbo_decode_blocks(llrs, cfg)
    return float(np.mean(decoded != info))
