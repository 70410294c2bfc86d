"""
Operating points of the stop-feedback link.

The receiver sends one bit per round, s (stop) or c (continue), with a repetition code of
n_f symbols; the transmitter decides with a Neyman-Pearson test at threshold gamma_f.
eps_s2c is the probability of hearing c when s was sent, eps_c2s the probability of hearing
s when c was sent. Closed forms are provided for antipodal signalling over AWGN and for
on-off keying over Rayleigh fading with a noncoherent detector; randomized tests are
represented as explicit mixtures of two deterministic tests.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.special import erfc, ndtri

from include.vlsf.channels import complex_gaussian
from include.vlsf.helpers import log_frame_info, validate_positive, validate_positive_int, validate_probability
from include.validations.feedback_frontier_schema import validate_output_feedback_frontier_schema

logger = logging.getLogger(__name__)

STOP = "s"
CONTINUE = "c"


class FeedbackScheme(str, Enum):
    AWGN_ANTIPODAL = "awgn-antipodal"
    RAYLEIGH_OOK = "rayleigh-ook"
    NOISELESS = "noiseless"


@dataclass(frozen=True)
class FeedbackOperatingPoint:
    n_f: int
    gamma_f: float
    eps_s2c: float
    eps_c2s: float
    scheme: FeedbackScheme
    snr: float = math.inf

    def __post_init__(self):
        validate_positive_int(self.n_f, "n_f", "feedback operating point")
        validate_probability(self.eps_s2c, "eps_s2c", "feedback operating point")
        validate_probability(self.eps_c2s, "eps_c2s", "feedback operating point")

    @property
    def feasible(self) -> bool:
        """
        Whether the pair can be used in the error bound (eps_s2c + eps_c2s <= 1).
        """
        return self.eps_s2c + self.eps_c2s <= 1.0 + 1e-12


@dataclass(frozen=True)
class RandomizedOperatingPoint:
    """
    Randomized test: `first` is used with probability `weight`, `second` otherwise.
    """
    first: FeedbackOperatingPoint
    second: FeedbackOperatingPoint
    weight: float

    def __post_init__(self):
        validate_probability(self.weight, "weight", "randomized operating point")
        if self.first.n_f != self.second.n_f or self.first.scheme != self.second.scheme:
            raise ValueError("Mixed operating points must share n_f and scheme")

    @property
    def n_f(self) -> int:
        return self.first.n_f

    @property
    def scheme(self) -> FeedbackScheme:
        return self.first.scheme

    @property
    def snr(self) -> float:
        return self.first.snr

    @property
    def gamma_f(self) -> float:
        return math.nan

    @property
    def eps_s2c(self) -> float:
        return self.weight * self.first.eps_s2c + (1.0 - self.weight) * self.second.eps_s2c

    @property
    def eps_c2s(self) -> float:
        return self.weight * self.first.eps_c2s + (1.0 - self.weight) * self.second.eps_c2s

    @property
    def feasible(self) -> bool:
        return self.eps_s2c + self.eps_c2s <= 1.0 + 1e-12


OperatingPoint = Union[FeedbackOperatingPoint, RandomizedOperatingPoint]


def gaussian_tail(x: float) -> float:
    """
    Q(x) through the complementary error function, accurate deep into the tail.
    """
    return float(0.5 * erfc(x / math.sqrt(2.0)))


def awgn_feedback_point(n_f: int, rho_f: float, gamma_f: float) -> FeedbackOperatingPoint:
    """
    Antipodal repetition signalling over real AWGN: s -> +sqrt(rho_f), c -> -sqrt(rho_f).
    """
    validate_positive_int(n_f, "n_f", "AWGN feedback point")
    validate_positive(rho_f, "rho_f", "AWGN feedback point")
    if math.isnan(gamma_f):
        logger.error("AWGN feedback point requested with gamma_f = NaN")
        raise ValueError("gamma_f must not be NaN")

    amplitude = math.sqrt(n_f * rho_f)
    return FeedbackOperatingPoint(
        n_f=n_f,
        gamma_f=float(gamma_f),
        eps_s2c=gaussian_tail(amplitude + gamma_f),
        eps_c2s=gaussian_tail(amplitude - gamma_f),
        scheme=FeedbackScheme.AWGN_ANTIPODAL,
        snr=rho_f,
    )


def rayleigh_feedback_point(n_f: int, rho: float, gamma_f: float) -> FeedbackOperatingPoint:
    """
    On-off keying over Rayleigh fading (c -> zeros, s -> sqrt(rho) ones) with the
    noncoherent test |sum_i y_i|^2 > gamma_f deciding s.
    """
    validate_positive_int(n_f, "n_f", "Rayleigh feedback point")
    validate_positive(rho, "rho", "Rayleigh feedback point")
    if math.isnan(gamma_f) or gamma_f < 0:
        logger.error(f"Rayleigh feedback point requires gamma_f >= 0, got {gamma_f}")
        raise ValueError(f"gamma_f must be nonnegative, got {gamma_f}")

    if math.isinf(gamma_f):
        eps_s2c, eps_c2s = 1.0, 0.0
    else:
        eps_s2c = float(-math.expm1(-gamma_f / (n_f * (n_f * rho + 1.0))))
        eps_c2s = float(math.exp(-gamma_f / n_f))
    return FeedbackOperatingPoint(
        n_f=n_f,
        gamma_f=float(gamma_f),
        eps_s2c=eps_s2c,
        eps_c2s=eps_c2s,
        scheme=FeedbackScheme.RAYLEIGH_OOK,
        snr=rho,
    )


def noiseless_feedback_point(n_f: int = 1) -> FeedbackOperatingPoint:
    return FeedbackOperatingPoint(n_f=n_f, gamma_f=math.nan, eps_s2c=0.0, eps_c2s=0.0,
                                  scheme=FeedbackScheme.NOISELESS)


def feedback_point(scheme: FeedbackScheme, n_f: int, snr: float, gamma_f: float) -> FeedbackOperatingPoint:
    scheme = FeedbackScheme(scheme)
    if scheme == FeedbackScheme.AWGN_ANTIPODAL:
        return awgn_feedback_point(n_f, snr, gamma_f)
    if scheme == FeedbackScheme.RAYLEIGH_OOK:
        return rayleigh_feedback_point(n_f, snr, gamma_f)
    return noiseless_feedback_point(n_f)


def mix_operating_points(first: FeedbackOperatingPoint, second: FeedbackOperatingPoint,
                         weight: float) -> RandomizedOperatingPoint:
    return RandomizedOperatingPoint(first=first, second=second, weight=weight)


def frontier(scheme: FeedbackScheme, n_f: int, snr: float, grid: Sequence[float],
             hull_points: int = 0) -> List[OperatingPoint]:
    """
    Deterministic-test points for every threshold in the grid, sorted by increasing eps_s2c
    (so eps_c2s is non-increasing). With hull_points > 0, that many equally weighted
    mixtures are inserted between each pair of adjacent points.
    """
    if len(grid) == 0:
        logger.error("Feedback frontier requested with an empty threshold grid")
        raise ValueError("grid must not be empty")

    points = [feedback_point(scheme, n_f, snr, g) for g in sorted(set(float(g) for g in grid))]
    points.sort(key=lambda p: (p.eps_s2c, -p.eps_c2s))

    if hull_points <= 0:
        return points

    curve: List[OperatingPoint] = [points[0]]
    for left, right in zip(points[:-1], points[1:]):
        for k in range(1, hull_points + 1):
            weight = 1.0 - k / (hull_points + 1)
            curve.append(mix_operating_points(left, right, weight))
        curve.append(right)
    return curve


def gamma_f_grid(scheme: FeedbackScheme, n_f: int, snr: float,
                 eps_low: float = 1e-3, eps_high: float = 0.3, points: int = 60) -> np.ndarray:
    """
    Thresholds whose eps_s2c is log-spaced over [eps_low, eps_high].
    """
    scheme = FeedbackScheme(scheme)
    targets = np.logspace(math.log10(eps_low), math.log10(eps_high), points)
    if scheme == FeedbackScheme.AWGN_ANTIPODAL:
        # eps_s2c = Q(sqrt(n_f snr) + gamma)  =>  gamma = Q^{-1}(eps_s2c) - sqrt(n_f snr)
        return -ndtri(targets) - math.sqrt(n_f * snr)
    if scheme == FeedbackScheme.RAYLEIGH_OOK:
        return -n_f * (n_f * snr + 1.0) * np.log1p(-targets)
    return np.array([math.nan])


def transmit_feedback_bit(point: OperatingPoint, bit: str, rng: np.random.Generator) -> str:
    """
    Send one feedback bit through the physical feedback channel and return the decision.

    Randomized points pick their component test per use. The noiseless scheme is exact.
    """
    if isinstance(point, RandomizedOperatingPoint):
        chosen = point.first if rng.random() < point.weight else point.second
        return transmit_feedback_bit(chosen, bit, rng)

    if point.scheme == FeedbackScheme.NOISELESS:
        return bit

    if point.scheme == FeedbackScheme.AWGN_ANTIPODAL:
        sign = 1.0 if bit == STOP else -1.0
        y = sign * math.sqrt(point.snr) + rng.standard_normal(point.n_f)
        statistic = y.sum() / math.sqrt(point.n_f)
        return STOP if statistic >= -point.gamma_f else CONTINUE

    amplitude = math.sqrt(point.snr) if bit == STOP else 0.0
    h = complex_gaussian(rng, 1)[0]
    y = h * amplitude + complex_gaussian(rng, point.n_f)
    return STOP if abs(y.sum()) ** 2 > point.gamma_f else CONTINUE


def flip_feedback_bit(point: OperatingPoint, bit: str, rng: np.random.Generator) -> str:
    """
    Binary asymmetric channel abstraction of the feedback link.
    """
    if bit == STOP:
        return CONTINUE if rng.random() < point.eps_s2c else STOP
    return STOP if rng.random() < point.eps_c2s else CONTINUE


def lr_test_point(sample_stat_s: Callable[[np.random.Generator, int], np.ndarray],
                  sample_stat_c: Callable[[np.random.Generator, int], np.ndarray],
                  gamma_f: float, trials: int, rng: np.random.Generator,
                  n_f: int = 1, scheme: FeedbackScheme = FeedbackScheme.AWGN_ANTIPODAL,
                  snr: Optional[float] = None) -> FeedbackOperatingPoint:
    """
    Monte Carlo operating point of the test that decides c when the log-likelihood ratio
    log dP^(c)/dP^(s) exceeds gamma_f. The samplers return the statistic under s and under c.
    """
    validate_positive_int(trials, "trials", "likelihood-ratio test point")
    under_s = np.asarray(sample_stat_s(rng, trials))
    under_c = np.asarray(sample_stat_c(rng, trials))
    return FeedbackOperatingPoint(
        n_f=n_f,
        gamma_f=float(gamma_f),
        eps_s2c=float(np.mean(under_s > gamma_f)),
        eps_c2s=float(np.mean(under_c <= gamma_f)),
        scheme=scheme,
        snr=math.inf if snr is None else snr,
    )


def frontier_frame(points: Sequence[OperatingPoint]) -> pd.DataFrame:
    """
    Tabulate frontier points; deterministic tests carry weight 1.
    """
    rows = []
    for point in points:
        randomized = isinstance(point, RandomizedOperatingPoint)
        rows.append({
            "scheme": point.scheme.value,
            "n_f": int(point.n_f),
            "snr": float(point.snr),
            "gamma_f": math.nan if randomized else float(point.gamma_f),
            "weight": float(point.weight) if randomized else 1.0,
            "eps_s2c": float(point.eps_s2c),
            "eps_c2s": float(point.eps_c2s),
        })
    frontier_df = pd.DataFrame(rows, columns=["scheme", "n_f", "snr", "gamma_f", "weight", "eps_s2c", "eps_c2s"])
    log_frame_info(frontier_df, "Feedback frontier")
    return validate_output_feedback_frontier_schema(frontier_df)
