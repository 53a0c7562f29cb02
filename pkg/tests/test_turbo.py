import numpy as np
import pytest

from deepscs.classic.pipeline import turbo_ber_awgn, uncoded_bpsk_ber
from deepscs.classic.turbo import (LLR_CLAMP, NEXT_STATE, TurboConfig, load_interleaver, make_interleaver,
                                   rsc_encode, turbo_decode, turbo_decode_blocks, turbo_encode)

CFG = TurboConfig()


def _gf2_impulse(n):
    """Series expansion of (1 + D + D^3) / (1 + D^2 + D^3) over GF(2)."""
    num = [1, 1, 0, 1]
    den = [1, 0, 1, 1]
    rem = num + [0] * n
    out = []
    for i in range(n):
        c = rem[i]
        out.append(c)
        if c:
            for j, d in enumerate(den):
                rem[i + j] ^= d
    return np.array(out, dtype=np.uint8)


def _shift_register_parity(bits):
    """Direct shift-register model of the RSC, independent of the trellis tables."""
    r = [0, 0, 0]
    out = []
    for u in bits:
        a = u ^ r[1] ^ r[2]
        out.append(a ^ r[0] ^ r[2])
        r = [a, r[0], r[1]]
    return np.array(out, dtype=np.uint8), r


def test_coded_length_and_rate():
    assert CFG.coded_length == 3 * 512 + 12 == 1548
    assert CFG.rate == pytest.approx(512 / 1548)


def test_rsc_impulse_response_matches_polynomial_division():
    n = 40
    impulse = np.zeros(n, dtype=np.uint8)
    impulse[0] = 1
    parity, _, _ = rsc_encode(impulse)
    np.testing.assert_array_equal(parity, _gf2_impulse(n))


def test_rsc_matches_shift_register_and_terminates(rng):
    bits = rng.integers(0, 2, 300).astype(np.uint8)
    parity, tail_u, tail_p = rsc_encode(bits)
    ref, _ = _shift_register_parity(bits)
    np.testing.assert_array_equal(parity, ref)
    full, reg = _shift_register_parity(np.concatenate([bits, tail_u]))
    np.testing.assert_array_equal(full[-3:], tail_p)
    assert reg == [0, 0, 0]


def test_turbo_code_is_linear(rng):
    a = rng.integers(0, 2, 512).astype(np.uint8)
    b = rng.integers(0, 2, 512).astype(np.uint8)
    np.testing.assert_array_equal(turbo_encode(a ^ b), turbo_encode(a) ^ turbo_encode(b))
    assert not turbo_encode(np.zeros(512, dtype=np.uint8)).any()


def test_codeword_layout(rng):
    info = rng.integers(0, 2, 512).astype(np.uint8)
    cw = turbo_encode(info)
    np.testing.assert_array_equal(cw[:512], info)
    p2, _, _ = rsc_encode(info[CFG.interleaver])
    np.testing.assert_array_equal(cw[1024:1536], p2)


def test_shipped_interleaver_is_the_seeded_permutation():
    perm = load_interleaver(512)
    np.testing.assert_array_equal(perm, make_interleaver(512))
    np.testing.assert_array_equal(np.sort(perm), np.arange(512))
    with pytest.raises(ValueError):
        TurboConfig(block_length=4, interleaver=np.array([0, 0, 1, 2]))


def test_trellis_is_a_bijection_per_input():
    for u in (0, 1):
        assert sorted(NEXT_STATE[:, u]) == list(range(8))


def test_noiseless_decoding(rng):
    info = rng.integers(0, 2, (3, 512)).astype(np.uint8)
    llr = np.stack([10.0 * (1.0 - 2.0 * turbo_encode(b)) for b in info])
    np.testing.assert_array_equal(turbo_decode_blocks(llr), info)
    np.testing.assert_array_equal(turbo_decode(llr[0]), info[0])


def test_corrects_isolated_errors(rng):
    info = rng.integers(0, 2, 512).astype(np.uint8)
    llr = 4.0 * (1.0 - 2.0 * turbo_encode(info))
    flips = rng.choice(1548, 12, replace=False)
    llr[flips] *= -1
    np.testing.assert_array_equal(turbo_decode(llr), info)


def test_recovers_erased_systematic_bits(rng):
    info = rng.integers(0, 2, 512).astype(np.uint8)
    llr = 6.0 * (1.0 - 2.0 * turbo_encode(info))
    llr[rng.choice(512, 100, replace=False)] = 0.0
    np.testing.assert_array_equal(turbo_decode(llr), info)


def test_llr_clamp_and_nan_handling(rng):
    info = rng.integers(0, 2, 512).astype(np.uint8)
    llr = 1e9 * (1.0 - 2.0 * turbo_encode(info))
    llr[5] = np.nan
    np.testing.assert_array_equal(turbo_decode(llr), info)
    assert LLR_CLAMP == 50.0
    with pytest.raises(ValueError):
        turbo_decode(np.zeros(100))


def test_coding_gain_at_two_db():
    ber = turbo_ber_awgn(2.0, 100, seed=1)
    assert ber < 0.2 * uncoded_bpsk_ber(2.0)


def test_uncoded_reference():
    assert uncoded_bpsk_ber(0.0) == pytest.approx(0.0786496, rel=1e-5)
    assert uncoded_bpsk_ber(9.6) == pytest.approx(1.0e-5, rel=0.05)


def test_single_flipped_systematic_bit_is_corrected(rng):
    info = rng.integers(0, 2, 512).astype(np.uint8)
    llr = 50.0 * (1.0 - 2.0 * turbo_encode(info))
    llr[200] = -llr[200] / 10
    np.testing.assert_array_equal(turbo_decode(llr), info)


def test_all_zero_codeword_beats_uncoded_at_3_db():
    cfg = CFG
    rng = np.random.default_rng(3)
    esn0 = cfg.rate * 10 ** 0.3
    sigma2 = 1 / (2 * esn0)
    y = 1.0 + rng.normal(0, np.sqrt(sigma2), (200, cfg.coded_length))
    ber = np.mean(turbo_decode_blocks(2 * y / sigma2))
    assert ber < uncoded_bpsk_ber(3.0)


def test_coded_ber_monotone_and_below_uncoded():
    bers = [turbo_ber_awgn(e, 60, seed=2) for e in (1.0, 2.0, 3.0)]
    assert bers[0] >= bers[1] >= bers[2]
    assert all(b <= uncoded_bpsk_ber(e) for b, e in zip(bers, (1.0, 2.0, 3.0)))
