import math

import numpy as np
import pytest

from include.vlsf.channels import (
    LOG4,
    BiAwgnForward,
    MetricKind,
    NoiselessBinaryForward,
    RayleighForward,
    alphabet_exp_average,
    biawgn_mutual_information,
    ml_channel_estimate,
    sample_biawgn_increment,
    sample_independent_increment,
    sample_rayleigh_round,
)
from include.vlsf.helpers import LOG2
from include.vlsf.montecarlo import substream


def test_biawgn_increment_shape_and_kind():
    """A bi-AWGN round yields one true-codeword increment per requested round."""
    sample = sample_biawgn_increment(BiAwgnForward(rho=1.0, n=16), substream(1), size=50)
    assert sample.value.shape == (50,)
    assert sample.kind == MetricKind.TRUE_CODEWORD


def test_biawgn_increment_mean_matches_mutual_information():
    """The average true increment per symbol equals the bi-AWGN mutual information."""
    sample = sample_biawgn_increment(BiAwgnForward(rho=1.0, n=1), substream(2), size=200_000)
    assert sample.value.mean() == pytest.approx(biawgn_mutual_information(1.0), abs=0.01)


def test_mutual_information_known_values():
    """0 dB gives about 0.486 bits; high SNR saturates at log 2."""
    assert biawgn_mutual_information(1.0) / LOG2 == pytest.approx(0.486, abs=0.005)
    assert biawgn_mutual_information(100.0) == pytest.approx(LOG2, abs=1e-3)
    assert biawgn_mutual_information(0.5) < biawgn_mutual_information(1.0) < LOG2


def test_biawgn_increment_never_exceeds_log2_per_symbol():
    """Each symbol contributes at most log 2 nats."""
    sample = sample_biawgn_increment(BiAwgnForward(rho=4.0, n=8), substream(3), size=1000)
    assert (sample.value <= 8 * LOG2 + 1e-12).all()


def test_alphabet_exp_average_is_one():
    """For every output, exp(increment) averages to 1 over the input alphabet."""
    _, awgn_state = BiAwgnForward(rho=1.0, n=4).sample_round(substream(4), size=20)
    _, rayleigh_state = RayleighForward(rho=10.0, n=8, n_p=2).sample_round(substream(5), size=20)
    np.testing.assert_allclose(alphabet_exp_average(awgn_state), 1.0, rtol=1e-12)
    np.testing.assert_allclose(alphabet_exp_average(rayleigh_state), 1.0, rtol=1e-12)


def test_rayleigh_round_shapes():
    """The Rayleigh round holds one estimate per round and n - n_p data outputs."""
    channel = RayleighForward(rho=10.0, n=12, n_p=4)
    sample, state = sample_rayleigh_round(channel, substream(6), size=30)
    assert channel.n_d == 8
    assert sample.value.shape == (30,)
    assert state.h_hat.shape == (30,)
    assert state.y_data.shape == (30, 8)


def test_rayleigh_true_increment_has_positive_mean():
    """At 10 dB the true-codeword metric drifts upward."""
    sample, _ = RayleighForward(rho=10.0, n=50, n_p=5).sample_round(substream(7), size=20_000)
    assert sample.value.mean() > 0.0


def test_independent_increment_has_negative_mean():
    """An independently drawn codeword scores negatively on average."""
    _, state = BiAwgnForward(rho=1.0, n=16).sample_round(substream(8), size=50_000)
    sample = sample_independent_increment(state, substream(9))
    assert sample.kind == MetricKind.INDEPENDENT_CODEWORD
    assert sample.value.shape == (50_000,)
    assert sample.value.mean() < 0.0


def test_independent_increment_with_draws():
    """Several independent codewords per output come back as a (draws, size) array."""
    _, state = RayleighForward(rho=10.0, n=6, n_p=2).sample_round(substream(10), size=7)
    sample = sample_independent_increment(state, substream(11), draws=5, tilted=True)
    assert sample.value.shape == (5, 7)


def test_ml_channel_estimate_noiseless():
    """Without pilot noise the estimate recovers the fading coefficient."""
    rho = 2.0
    pilots = np.full(3, math.sqrt(rho), dtype=complex)
    h = np.array([0.5 + 0.2j, -1.0 + 0.0j])
    np.testing.assert_allclose(ml_channel_estimate(pilots, h[:, None] * pilots, rho), h)


def test_noiseless_channel_scores_only_the_sent_codeword():
    """The stub channel gives n log 2 to the sent codeword and -inf to the rest."""
    channel = NoiselessBinaryForward(n=32)
    codewords = channel.draw_codewords(substream(12), 8)
    scores = channel.score_round(codewords, 3, substream(13))
    assert scores[3] == pytest.approx(32 * LOG2)
    assert np.isneginf(np.delete(scores, 3)).all()


def test_rayleigh_requires_data_symbols():
    """A Rayleigh round needs more channel uses than pilots."""
    with pytest.raises(ValueError, match="n_p must be smaller than n"):
        RayleighForward(rho=10.0, n=4, n_p=4)


def test_biawgn_rejects_nonpositive_snr():
    """The bi-AWGN channel needs a positive SNR."""
    with pytest.raises(ValueError, match="rho must be a finite positive number"):
        BiAwgnForward(rho=0.0, n=4)


def test_rayleigh_increment_never_exceeds_log4_per_symbol():
    """Each QPSK data symbol contributes at most log 4 nats, whatever the estimate."""
    channel = RayleighForward(rho=10.0, n=20, n_p=2)
    sample, state = sample_rayleigh_round(channel, substream(8), size=2_000)
    assert (state.alphabet_increments() <= LOG4 + 1e-12).all()
    assert (sample.value <= channel.n_d * LOG4 + 1e-9).all()


@pytest.mark.parametrize("low, high", [(0.5, 1.0), (1.0, 2.0)])
def test_biawgn_increment_grows_with_snr(low, high):
    """Mutual information and the sampled drift both increase with the SNR."""
    assert biawgn_mutual_information(low) < biawgn_mutual_information(high)
    weak = sample_biawgn_increment(BiAwgnForward(rho=low, n=1), substream(9), size=100_000)
    strong = sample_biawgn_increment(BiAwgnForward(rho=high, n=1), substream(9), size=100_000)
    assert weak.value.mean() < strong.value.mean()


def test_rayleigh_drift_grows_with_snr():
    """Higher SNR gives a larger average Rayleigh metric increment."""
    means = [RayleighForward(rho=rho, n=10, n_p=2).sample_round(substream(10), size=20_000)[0].value.mean()
             for rho in (0.5, 1.0, 2.0)]
    assert means[0] < means[1] < means[2]


def test_same_seed_gives_identical_rounds():
    """A round is a pure function of the generator state."""
    for channel in (BiAwgnForward(rho=1.0, n=16), RayleighForward(rho=10.0, n=12, n_p=2)):
        first, _ = channel.sample_round(substream(11, 3), size=100)
        second, _ = channel.sample_round(substream(11, 3), size=100)
        np.testing.assert_array_equal(first.value, second.value)


def test_increments_saturate_at_high_snr():
    """At 20 dB a bi-AWGN symbol carries log 2 nats and a QPSK symbol nearly log 4."""
    awgn = sample_biawgn_increment(BiAwgnForward(rho=100.0, n=1), substream(12), size=10_000)
    assert awgn.value.mean() == pytest.approx(LOG2, abs=1e-3)
    rayleigh, _ = RayleighForward(rho=100.0, n=10, n_p=4).sample_round(substream(13), size=20_000)
    per_symbol = rayleigh.value.mean() / 6
    assert 1.2 < per_symbol <= LOG4
