import numpy as np
import pytest

from deepscs.channel import AWGN, RAYLEIGH, RICIAN
from deepscs.classic.pcm import PcmLaw, pcm_quantize
from deepscs.classic.pipeline import classic_pipeline, transmit_bits
from deepscs.experiment.dataset import synth_corpus
from deepscs.metrics import sdr
from deepscs.signal import SampleSequence


@pytest.fixture(scope="module")
def seq():
    return synth_corpus(1, length=4000, seed=3)[0]


@pytest.mark.parametrize("law", list(PcmLaw))
@pytest.mark.parametrize("kind", [AWGN, RAYLEIGH, RICIAN])
def test_noiseless_link_is_transparent_above_pcm(seq, law, kind):
    out = classic_pipeline(seq, law, kind, None, seed=0)
    np.testing.assert_array_equal(out.samples, pcm_quantize(seq.samples, law))


def test_hard_decision_noiseless(seq):
    out = classic_pipeline(seq, PcmLaw.ALAW8, AWGN, None, seed=0, soft=False)
    np.testing.assert_array_equal(out.samples, pcm_quantize(seq.samples, PcmLaw.ALAW8))


def test_high_snr_reaches_quantization_limit(seq):
    out = classic_pipeline(seq, PcmLaw.ALAW8, AWGN, 25.0, seed=1)
    q = SampleSequence(pcm_quantize(seq.samples, PcmLaw.ALAW8), seq.rate)
    assert sdr(seq, out) == pytest.approx(sdr(seq, q), abs=1e-9)


def test_low_snr_degrades(seq):
    out = classic_pipeline(seq, PcmLaw.ALAW8, AWGN, 2.0, seed=1)
    assert sdr(seq, out) < 10.0


def test_pipeline_is_deterministic(seq):
    a = classic_pipeline(seq, PcmLaw.ALAW8, RAYLEIGH, 14.0, seed=9)
    b = classic_pipeline(seq, PcmLaw.ALAW8, RAYLEIGH, 14.0, seed=9)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_partial_block_padding(rng):
    bits = rng.integers(0, 2, 700).astype(np.uint8)
    np.testing.assert_array_equal(transmit_bits(bits, AWGN, None, rng), bits)
