import warnings

import numpy as np
import pytest

from deepscs.classic.pcm import (PcmLaw, alaw_to_linear, linear_to_alaw, pcm_decode, pcm_decode_samples,
                                 pcm_encode, pcm_quantize)
from deepscs.signal import SampleSequence

with warnings.catch_warnings():
    warnings.simplefilter("ignore", DeprecationWarning)
    audioop = pytest.importorskip("audioop")


def test_alaw_decode_all_256_codewords_against_reference_codec():
    codes = np.arange(256, dtype=np.uint8)
    ref = np.frombuffer(audioop.alaw2lin(codes.tobytes(), 2), dtype="<i2")
    np.testing.assert_array_equal(alaw_to_linear(codes), ref)


def test_alaw_table_landmarks():
    # smallest positive/negative levels and the two extremes
    assert list(alaw_to_linear(np.array([0xD5, 0x55, 0xAA, 0x2A]))) == [8, -8, 32256, -32256]
    assert linear_to_alaw(np.array([0]))[0] == 0xD5


def test_alaw_encode_matches_reference_on_every_int16():
    pcm = np.arange(-32768, 32768, dtype=np.int16)
    ref = np.frombuffer(audioop.lin2alaw(pcm.tobytes(), 2), dtype=np.uint8)
    np.testing.assert_array_equal(linear_to_alaw(pcm), ref)


def test_alaw_decode_encode_is_identity_on_codewords():
    codes = np.arange(256)
    np.testing.assert_array_equal(linear_to_alaw(alaw_to_linear(codes)), codes)


def test_bit_layout_msb_first():
    bits = pcm_encode(np.array([0.0]), PcmLaw.ALAW8)
    np.testing.assert_array_equal(bits, [1, 1, 0, 1, 0, 1, 0, 1])  # 0xD5
    bits16 = pcm_encode(np.array([-1.0, 0.5]), PcmLaw.UNIFORM16)
    assert bits16.size == 32
    np.testing.assert_array_equal(bits16[:16], [1] + [0] * 15)  # -32768
    np.testing.assert_array_equal(bits16[16:], [0, 1] + [0] * 14)  # 16384


def test_uniform16_quantizer_is_idempotent(rng):
    x = rng.uniform(-1, 1, 5000)
    q = pcm_quantize(x, PcmLaw.UNIFORM16)
    assert np.max(np.abs(q - x)) <= 0.5 / 32768 + 1e-15
    np.testing.assert_array_equal(pcm_quantize(q, PcmLaw.UNIFORM16), q)
    assert pcm_quantize(np.array([1.0]), PcmLaw.UNIFORM16)[0] == 32767 / 32768


def test_alaw_quantizer_is_idempotent(rng):
    q = pcm_quantize(rng.uniform(-1, 1, 5000), PcmLaw.ALAW8)
    np.testing.assert_array_equal(pcm_quantize(q, PcmLaw.ALAW8), q)


def test_alaw_sqnr_of_full_scale_sine():
    t = np.arange(80000)
    x = 0.9 * np.sin(2 * np.pi * 1013 * t / 8000)
    q = pcm_quantize(x, PcmLaw.ALAW8)
    sqnr = 10 * np.log10(np.sum(x ** 2) / np.sum((x - q) ** 2))
    assert 36.0 < sqnr < 40.0


def test_alaw_sqnr_is_flat_over_level():
    # companding keeps SQNR roughly constant across a 30 dB input range
    t = np.arange(80000)
    vals = []
    for amp in (0.9, 0.09, 0.03):
        x = amp * np.sin(2 * np.pi * 1013 * t / 8000)
        q = pcm_quantize(x, PcmLaw.ALAW8)
        vals.append(10 * np.log10(np.sum(x ** 2) / np.sum((x - q) ** 2)))
    assert max(vals) - min(vals) < 3.0


def test_decode_sequence_and_errors():
    seq = SampleSequence(np.array([0.25, -0.5]), 8000)
    out = pcm_decode(pcm_encode(seq, PcmLaw.UNIFORM16), PcmLaw.UNIFORM16, 8000)
    np.testing.assert_array_equal(out.samples, [0.25, -0.5])
    with pytest.raises(ValueError):
        pcm_decode_samples(np.zeros(7, dtype=np.uint8), PcmLaw.ALAW8)


def test_uniform16_full_scale_and_zero():
    np.testing.assert_array_equal(pcm_encode(np.array([1.0]), PcmLaw.UNIFORM16), [0] + [1] * 15)  # 0x7FFF
    assert not pcm_encode(np.array([0.0]), PcmLaw.UNIFORM16).any()
    assert pcm_decode_samples(np.array([0] + [1] * 15), PcmLaw.UNIFORM16)[0] == pytest.approx(0.99997, abs=1e-5)


def test_codeword_level_idempotence(rng):
    for law in PcmLaw:
        bits = rng.integers(0, 2, law.bits * 500).astype(np.uint8)
        np.testing.assert_array_equal(pcm_encode(pcm_decode_samples(bits, law), law), bits)
