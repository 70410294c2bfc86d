"""
Forward channels and their per-round decoding-metric increments.

Two channel families are supported: the binary-input AWGN channel with antipodal inputs,
scored with the exact information density, and the pilot-assisted Rayleigh block-fading
channel with QPSK data, scored with the scaled nearest-neighbour metric that treats the
pilot-based estimate as perfect. All logarithms are natural.

Every round sampler returns the metric increment of the transmitted codeword together with
a round state holding the channel output, so that increments of an independent codeword can
be drawn against the same output.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from include.vlsf.helpers import LOG2, validate_positive, validate_positive_int

logger = logging.getLogger(__name__)

LOG4 = math.log(4.0)


class MetricKind(str, Enum):
    TRUE_CODEWORD = "true-codeword"
    INDEPENDENT_CODEWORD = "independent-codeword"


@dataclass(frozen=True)
class MetricIncrementSample:
    """
    Per-round metric increments in nats. `value` has shape (size,) or (draws, size).
    """
    value: np.ndarray
    kind: MetricKind


def _pick_alphabet_points(increments: np.ndarray, rng: np.random.Generator,
                          draws: Optional[int], tilted: bool) -> np.ndarray:
    """
    Sum per-symbol increments over independently chosen alphabet points.

    increments has shape (size, symbols, A). Points are uniform, or drawn with probability
    exp(increment) / A when tilted (a valid law because the alphabet average of exp is 1).
    """
    size, symbols, alphabet = increments.shape
    shape = (size, symbols) if draws is None else (draws, size, symbols)
    if tilted:
        cumulative = np.cumsum(np.exp(increments) / alphabet, axis=-1)[..., :-1]
        u = rng.random(shape)
        index = (u[..., None] > cumulative).sum(axis=-1)
    else:
        index = rng.integers(0, alphabet, size=shape)
    source = increments if draws is None else np.broadcast_to(increments, (draws,) + increments.shape)
    chosen = np.take_along_axis(source, index[..., None], axis=-1)[..., 0]
    return chosen.sum(axis=-1)


@dataclass(frozen=True)
class BiAwgnRoundState:
    """
    Output of a bi-AWGN round, stored as z = x * y for the transmitted symbol x.
    """
    z: np.ndarray

    def subset(self, index) -> "BiAwgnRoundState":
        return BiAwgnRoundState(self.z[index])

    def alphabet_increments(self) -> np.ndarray:
        # point 0 repeats the transmitted symbol, point 1 is its negation
        same = LOG2 - np.logaddexp(0.0, -2.0 * self.z)
        flipped = LOG2 - np.logaddexp(0.0, 2.0 * self.z)
        return np.stack([same, flipped], axis=-1)


@dataclass(frozen=True)
class RayleighRoundState:
    """
    Output of a pilot-assisted Rayleigh round: channel estimate and data outputs.
    """
    h_hat: np.ndarray
    y_data: np.ndarray
    rho: float

    def subset(self, index) -> "RayleighRoundState":
        return RayleighRoundState(self.h_hat[index], self.y_data[index], self.rho)

    def alphabet_increments(self) -> np.ndarray:
        constellation = qpsk_constellation(self.rho)
        distance = np.abs(self.y_data[..., None] - self.h_hat[:, None, None] * constellation) ** 2
        return -distance - (logsumexp(-distance, axis=-1, keepdims=True) - LOG4)


RoundState = Union[BiAwgnRoundState, RayleighRoundState]


def qpsk_constellation(rho: float) -> np.ndarray:
    """
    The 4-point QPSK alphabet of radius sqrt(rho).
    """
    return math.sqrt(rho) * np.exp(0.5j * np.pi * np.arange(4))


def complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """
    Circularly-symmetric complex Gaussian samples with unit variance.
    """
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def ml_channel_estimate(pilots: np.ndarray, y_pilot: np.ndarray, rho: float) -> np.ndarray:
    """
    ML estimate of the fading coefficient: pilots^H y_pilot / (n_p * rho), over the last axis.
    """
    n_p = pilots.shape[-1]
    return (y_pilot @ np.conj(pilots)) / (n_p * rho)


@dataclass(frozen=True)
class BiAwgnForward:
    """
    Real AWGN channel with inputs uniform over {-sqrt(rho), +sqrt(rho)} and unit noise variance.
    """
    rho: float
    n: int

    alphabet_size = 2

    def __post_init__(self):
        validate_positive(self.rho, "rho", "bi-AWGN channel")
        validate_positive_int(self.n, "n", "bi-AWGN channel")

    @property
    def symbols_per_round(self) -> int:
        return self.n

    def sample_round(self, rng: np.random.Generator, size: int = 1) -> Tuple[MetricIncrementSample, BiAwgnRoundState]:
        z = self.rho + math.sqrt(self.rho) * rng.standard_normal((size, self.n))
        value = (LOG2 - np.logaddexp(0.0, -2.0 * z)).sum(axis=-1)
        return MetricIncrementSample(value, MetricKind.TRUE_CODEWORD), BiAwgnRoundState(z)

    def draw_codewords(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.integers(0, 2, size=(m, self.n), dtype=np.int8)

    def score_round(self, codewords: np.ndarray, transmitted: int, rng: np.random.Generator) -> np.ndarray:
        """
        Send row `transmitted` of the codeword segments and return the increment of every row.
        """
        signs = 1.0 - 2.0 * codewords
        y = math.sqrt(self.rho) * signs[transmitted] + rng.standard_normal(self.n)
        return (LOG2 - np.logaddexp(0.0, -2.0 * math.sqrt(self.rho) * signs * y)).sum(axis=-1)


@dataclass(frozen=True)
class RayleighForward:
    """
    Block-fading Rayleigh channel, one fading draw per round, n_p pilots followed by
    n - n_p QPSK data symbols.
    """
    rho: float
    n: int
    n_p: int

    alphabet_size = 4

    def __post_init__(self):
        validate_positive(self.rho, "rho", "Rayleigh channel")
        validate_positive_int(self.n, "n", "Rayleigh channel")
        validate_positive_int(self.n_p, "n_p", "Rayleigh channel")
        if self.n_p >= self.n:
            logger.error(f"Rayleigh channel needs n_p < n, got n_p={self.n_p}, n={self.n}")
            raise ValueError(f"n_p must be smaller than n, got n_p={self.n_p}, n={self.n}")

    @property
    def n_d(self) -> int:
        return self.n - self.n_p

    @property
    def symbols_per_round(self) -> int:
        return self.n_d

    @property
    def pilots(self) -> np.ndarray:
        return np.full(self.n_p, math.sqrt(self.rho), dtype=complex)

    def _observe(self, rng: np.random.Generator, data_index: np.ndarray) -> RayleighRoundState:
        size = data_index.shape[0]
        h = complex_gaussian(rng, size)
        y_pilot = h[:, None] * self.pilots + complex_gaussian(rng, (size, self.n_p))
        h_hat = ml_channel_estimate(self.pilots, y_pilot, self.rho)
        x_data = qpsk_constellation(self.rho)[data_index]
        y_data = h[:, None] * x_data + complex_gaussian(rng, (size, self.n_d))
        return RayleighRoundState(h_hat=h_hat, y_data=y_data, rho=self.rho)

    def sample_round(self, rng: np.random.Generator, size: int = 1) -> Tuple[MetricIncrementSample, RayleighRoundState]:
        data_index = rng.integers(0, 4, size=(size, self.n_d))
        state = self._observe(rng, data_index)
        increments = state.alphabet_increments()
        value = np.take_along_axis(increments, data_index[..., None], axis=-1)[..., 0].sum(axis=-1)
        return MetricIncrementSample(value, MetricKind.TRUE_CODEWORD), state

    def draw_codewords(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.integers(0, 4, size=(m, self.n_d), dtype=np.int8)

    def score_round(self, codewords: np.ndarray, transmitted: int, rng: np.random.Generator) -> np.ndarray:
        state = self._observe(rng, codewords[transmitted][None, :].astype(np.intp))
        increments = state.alphabet_increments()[0]
        return increments[np.arange(self.n_d), codewords].sum(axis=-1)


@dataclass(frozen=True)
class NoiselessBinaryForward:
    """
    Noiseless binary channel with uniform inputs, used as a deterministic stub by the
    protocol simulator. A codeword scores n * log 2 if it matches the output, -inf otherwise.
    """
    n: int

    alphabet_size = 2

    def __post_init__(self):
        validate_positive_int(self.n, "n", "noiseless binary channel")

    @property
    def symbols_per_round(self) -> int:
        return self.n

    def draw_codewords(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return rng.integers(0, 2, size=(m, self.n), dtype=np.int8)

    def score_round(self, codewords: np.ndarray, transmitted: int, rng: np.random.Generator) -> np.ndarray:
        match = np.all(codewords == codewords[transmitted], axis=-1)
        return np.where(match, self.n * LOG2, -np.inf)


ChannelSpec = Union[BiAwgnForward, RayleighForward]


def sample_biawgn_increment(ch: BiAwgnForward, rng: np.random.Generator, size: int = 1) -> MetricIncrementSample:
    """
    Increment sum_i [log 2 - log(1 + exp(-2 Z_i))] with Z_i ~ N(rho, rho), for `size` rounds.
    """
    sample, _ = ch.sample_round(rng, size)
    return sample


def sample_rayleigh_round(ch: RayleighForward, rng: np.random.Generator,
                          size: int = 1) -> Tuple[MetricIncrementSample, RayleighRoundState]:
    """
    One Rayleigh round per entry: fading draw, pilot-based ML estimate, QPSK data and the
    mismatched metric of the transmitted data.
    """
    return ch.sample_round(rng, size)


def sample_independent_increment(round_state: RoundState, rng: np.random.Generator,
                                 draws: Optional[int] = None, tilted: bool = False) -> MetricIncrementSample:
    """
    Metric increment of a codeword drawn independently of the stored output.

    With tilted=True the symbols are drawn from the output-tilted law exp(increment) / |alphabet|
    instead; averaging exp(-value) * f(value) under that law equals averaging f(value) under
    the independent law.
    """
    value = _pick_alphabet_points(round_state.alphabet_increments(), rng, draws, tilted)
    return MetricIncrementSample(value, MetricKind.INDEPENDENT_CODEWORD)


def alphabet_exp_average(round_state: RoundState) -> np.ndarray:
    """
    Per-symbol average of exp(increment) over the input alphabet. Equals 1 for every output.
    """
    return np.exp(round_state.alphabet_increments()).mean(axis=-1)


def biawgn_mutual_information(rho: float, order: int = 80) -> float:
    """
    Per-symbol bi-AWGN mutual information in nats by Gauss-Hermite quadrature.
    """
    validate_positive(rho, "rho", "bi-AWGN mutual information")
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    z = rho + math.sqrt(rho) * nodes
    values = LOG2 - np.logaddexp(0.0, -2.0 * z)
    return float(np.dot(weights, values) / math.sqrt(2.0 * math.pi))
