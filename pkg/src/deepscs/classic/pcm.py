"""PCM source coding: G.711 A-law (8 bits/sample) and 16-bit uniform PCM.

Bitstreams are uint8 arrays of 0/1, most significant bit of each codeword
first.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from deepscs.signal import SampleSequence

# upper bound of each A-law segment in 13-bit magnitude units
_SEG_END = np.array([0x1F, 0x3F, 0x7F, 0xFF, 0x1FF, 0x3FF, 0x7FF, 0xFFF])


class PcmLaw(Enum):
    ALAW8 = "alaw8"
    UNIFORM16 = "uniform16"

    @property
    def bits(self) -> int:
        return 8 if self is PcmLaw.ALAW8 else 16


def _to_int16(samples: np.ndarray) -> np.ndarray:
    return np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32768.0), -32768, 32767).astype(np.int64)


def linear_to_alaw(pcm16: np.ndarray) -> np.ndarray:
    """G.711 A-law octets (even bits inverted) from 16-bit linear samples."""
    pcm = np.asarray(pcm16, dtype=np.int64) >> 3
    positive = pcm >= 0
    mask = np.where(positive, 0xD5, 0x55)
    mag = np.where(positive, pcm, -pcm - 1)
    seg = np.searchsorted(_SEG_END, mag)  # first segment whose end >= mag
    shift = np.where(seg < 2, 1, seg)
    aval = (np.minimum(seg, 7) << 4) | ((mag >> shift) & 0x0F)
    aval = np.where(seg >= 8, 0x7F, aval)
    return (aval ^ mask).astype(np.uint8)


def alaw_to_linear(octets: np.ndarray) -> np.ndarray:
    """16-bit linear reconstruction level of each A-law octet."""
    a = np.asarray(octets, dtype=np.int64) ^ 0x55
    t = (a & 0x0F) << 4
    seg = (a & 0x70) >> 4
    t = np.where(seg == 0, t + 8, t + 0x108)
    t = np.where(seg > 1, t << np.maximum(seg - 1, 0), t)
    return np.where(a & 0x80, t, -t)


def _words_to_bits(words: np.ndarray, nbits: int) -> np.ndarray:
    words = np.asarray(words, dtype=np.int64) & ((1 << nbits) - 1)
    shifts = np.arange(nbits - 1, -1, -1)
    return ((words[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def _bits_to_words(bits: np.ndarray, nbits: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % nbits:
        raise ValueError(f"{bits.size} bits is not a whole number of {nbits}-bit samples")
    weights = 1 << np.arange(nbits - 1, -1, -1)
    return bits.reshape(-1, nbits) @ weights


def pcm_encode(seq: SampleSequence | np.ndarray, law: PcmLaw) -> np.ndarray:
    samples = seq.samples if isinstance(seq, SampleSequence) else np.asarray(seq)
    pcm16 = _to_int16(samples)
    if law is PcmLaw.ALAW8:
        return _words_to_bits(linear_to_alaw(pcm16), 8)
    return _words_to_bits(pcm16, 16)


def pcm_decode_samples(bits: np.ndarray, law: PcmLaw) -> np.ndarray:
    words = _bits_to_words(bits, law.bits)
    if law is PcmLaw.ALAW8:
        linear = alaw_to_linear(words)
    else:
        linear = np.where(words >= 32768, words - 65536, words)
    return linear.astype(np.float64) / 32768.0


def pcm_decode(bits: np.ndarray, law: PcmLaw, rate: int = 8000) -> SampleSequence:
    return SampleSequence(pcm_decode_samples(bits, law), rate)


def pcm_quantize(samples: np.ndarray, law: PcmLaw) -> np.ndarray:
    """What an error-free PCM link delivers: decode(encode(x))."""
    return pcm_decode_samples(pcm_encode(samples, law), law)
