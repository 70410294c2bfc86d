"""
Achievability bound for variable-length stop-feedback (VLSF) codes with a noisy feedback link.

The average service time and the average error probability of the scheme are bounded in
terms of the stopping time tau of the true-codeword metric random walk, the false-crossing
probabilities of independent codewords, and the feedback operating point (eps_s2c, eps_c2s):

    ell_a <= sum_{nu=0}^{n_max-1} (G_{nu+1} - G_nu) P{tau > nu}
    eps   <= sum_{nu=1}^{n_max} xi_nu (alpha_nu P{tau > nu} + (M - 1) P{tau >= nu, tau~ = nu})

The stopping tails are estimated by Monte Carlo with one pass per forward channel for a whole
ladder of decoding thresholds; everything else is closed form.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from include.vlsf.artifacts import provenance_record
from include.vlsf.channels import ChannelSpec, RayleighForward, sample_independent_increment
from include.vlsf.feedback import OperatingPoint
from include.vlsf.helpers import (
    log_frame_info,
    log_m_minus_one,
    mean_interval,
    validate_feedback_pair,
    validate_positive_int,
    validate_probability,
    wilson_interval,
)
from include.vlsf.montecarlo import DEFAULT_CHUNK_SIZE, DEFAULT_Z, plan_chunks, run_chunks, substream, validate_seed
from include.validations.sweep_schema import validate_output_sweep_schema

logger = logging.getLogger(__name__)

BOUND_SCHEMA_VERSION = 1


class NonPositiveDriftError(ValueError):
    """
    The true-codeword metric has a non-positive mean increment, so the walk need not cross.
    """


@dataclass(frozen=True)
class SchemeConfig:
    channel: ChannelSpec
    feedback: OperatingPoint
    n_max: int
    m_log2: float
    gamma_dec: float

    def __post_init__(self):
        validate_positive_int(self.n_max, "n_max", "scheme configuration")
        if not (self.m_log2 > 0 and math.isfinite(self.m_log2)):
            logger.error(f"Invalid m_log2 for scheme configuration: {self.m_log2!r}")
            raise ValueError(f"m_log2 must be a finite positive number, got {self.m_log2!r}")
        if math.isnan(self.gamma_dec):
            raise ValueError("gamma_dec must not be NaN")
        validate_feedback_pair(self.feedback.eps_s2c, self.feedback.eps_c2s, "scheme configuration")

    @property
    def n_tot(self) -> int:
        return self.channel.n + self.feedback.n_f

    @property
    def latency_budget_cu(self) -> int:
        return self.n_max * self.n_tot

    def describe(self) -> Dict[str, object]:
        """
        Flat, JSON-friendly description used for provenance echoes.
        """
        record = {
            "channel": type(self.channel).__name__,
            "rho": getattr(self.channel, "rho", None),
            "n": self.channel.n,
            "n_p": getattr(self.channel, "n_p", None),
            "n_f": self.feedback.n_f,
            "feedback_scheme": self.feedback.scheme.value,
            "feedback_snr": None if math.isinf(self.feedback.snr) else self.feedback.snr,
            "gamma_f": None if math.isnan(self.feedback.gamma_f) else self.feedback.gamma_f,
            "eps_s2c": self.feedback.eps_s2c,
            "eps_c2s": self.feedback.eps_c2s,
            "n_max": self.n_max,
            "n_tot": self.n_tot,
            "m_log2": self.m_log2,
            "gamma_dec": self.gamma_dec,
        }
        return record


@dataclass(frozen=True)
class StoppingTailEstimate:
    """
    tail[nu] estimates P{tau > nu} for nu = 0..n_max; ue_terms[nu - 1] estimates the
    undetected-error term at round nu = 1..n_max.
    """
    gamma_dec: float
    tail: np.ndarray
    tail_lower: np.ndarray
    tail_upper: np.ndarray
    ue_terms: np.ndarray
    ue_upper: np.ndarray
    trials: int
    seed: int
    drift: float = math.nan
    ue_exact: bool = False

    @property
    def n_max(self) -> int:
        return len(self.tail) - 1

    @property
    def tail_ci(self) -> np.ndarray:
        return 0.5 * (self.tail_upper - self.tail_lower)

    @property
    def ue_ci(self) -> np.ndarray:
        return self.ue_upper - self.ue_terms


class BoundResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: int = BOUND_SCHEMA_VERSION
    ell_a_rounds: float
    ell_a_cu: float
    eps_bound: float = Field(ge=0.0, le=1.0)
    eps_ci: float = Field(ge=0.0, le=1.0)
    latency_rx_rounds: float
    config: Dict[str, object] = Field(default_factory=dict)
    provenance: Dict[str, object] = Field(default_factory=dict)


def _validate_pair_and_horizon(eps_s2c: float, eps_c2s: float, n_max: int, operation_name: str) -> None:
    validate_feedback_pair(eps_s2c, eps_c2s, operation_name)
    validate_positive_int(n_max, "n_max", operation_name)


def xi_coefficients(eps_c2s: float, n_max: int) -> np.ndarray:
    """
    xi_nu = (1 - eps_c2s)^(nu - 1) for nu = 1..n_max (probability of no c->s flip before nu).
    """
    validate_probability(eps_c2s, "eps_c2s", "xi coefficients")
    validate_positive_int(n_max, "n_max", "xi coefficients")
    return np.power(1.0 - eps_c2s, np.arange(n_max, dtype=float))


def alpha_coefficients(eps_c2s: float, n_max: int) -> np.ndarray:
    """
    alpha_nu = eps_c2s for nu < n_max and 1 at the deadline.
    """
    validate_probability(eps_c2s, "eps_c2s", "alpha coefficients")
    validate_positive_int(n_max, "n_max", "alpha coefficients")
    alpha = np.full(n_max, float(eps_c2s))
    alpha[-1] = 1.0
    return alpha


def g_coefficients(eps_s2c: float, eps_c2s: float, n_max: int) -> np.ndarray:
    """
    Conditional service times G_nu = E[tau_tx | tau_dec = nu] for nu = 0..n_max, G_0 = 0.

    Computed from the direct double sum, with 0**0 = 1.
    """
    _validate_pair_and_horizon(eps_s2c, eps_c2s, n_max, "G coefficients")
    a, b = float(eps_s2c), float(eps_c2s)
    xi = xi_coefficients(b, n_max)
    k = np.arange(1, n_max + 1, dtype=float)

    # transmitter heard s by mistake while the receiver was still undecided
    early = np.concatenate(([0.0], np.cumsum(k[:-1] * xi[:-1] * b)))

    g = np.zeros(n_max + 1)
    for nu in range(1, n_max + 1):
        ks = np.arange(nu, n_max, dtype=float)
        resend = np.sum(ks * np.power(a, ks - nu) * (1.0 - a))
        deadline = n_max * a ** (n_max - nu)
        g[nu] = early[nu - 1] + xi[nu - 1] * (resend + deadline)
    return g


def g_increments(eps_s2c: float, eps_c2s: float, n_max: int) -> np.ndarray:
    """
    Closed form of G_{nu+1} - G_nu for nu = 1..n_max-1:
    (1 - eps_s2c - eps_c2s) (1 - eps_c2s)^(nu-1) (1 - eps_s2c^(n_max-nu)) / (1 - eps_s2c).
    """
    _validate_pair_and_horizon(eps_s2c, eps_c2s, n_max, "G increments")
    a, b = float(eps_s2c), float(eps_c2s)
    nu = np.arange(1, n_max, dtype=float)
    remaining = n_max - nu
    if a == 1.0:
        geometric = remaining
    else:
        geometric = (1.0 - np.power(a, remaining)) / (1.0 - a)
    return (1.0 - a - b) * np.power(1.0 - b, nu - 1) * geometric


def v_coefficients(eps_c2s: float, n_max: int) -> np.ndarray:
    """
    Receiver-latency coefficients V_nu = E[tau_rx | tau_dec = nu] ignoring the deadline cap,
    for nu = 0..n_max: V_0 = 0, V_1 = 1, V_{nu+1} - V_nu = (1 - eps_c2s)^(nu-1).
    """
    validate_probability(eps_c2s, "eps_c2s", "V coefficients")
    validate_positive_int(n_max, "n_max", "V coefficients")
    b = float(eps_c2s)
    v = np.zeros(n_max + 1)
    for nu in range(1, n_max + 1):
        # the receiver stops at k < nu after a c->s flip in round k - 1, else at nu
        k = np.arange(2, nu + 1, dtype=float)
        v[nu] = np.sum(k * np.power(1.0 - b, k - 2) * b) + nu * (1.0 - b) ** (nu - 1)
    return v


@dataclass
class _TailChunkStats:
    alive: np.ndarray
    ue_sum: np.ndarray
    ue_sq: np.ndarray
    drift_sum: float
    trials: int


def _metric_walk(channel: ChannelSpec, n_max: int, rng: np.random.Generator, size: int) -> np.ndarray:
    """
    Accumulated true-codeword metric, shape (size, n_max).
    """
    increments = np.empty((size, n_max))
    for nu in range(n_max):
        sample, _ = channel.sample_round(rng, size)
        increments[:, nu] = sample.value
    return np.cumsum(increments, axis=1)


def _tail_chunk(task: Tuple[ChannelSpec, int, Tuple[float, ...], int, int, int]) -> _TailChunkStats:
    channel, n_max, gammas, seed, chunk_index, size = task
    rng = substream(seed, chunk_index)
    walk = _metric_walk(channel, n_max, rng, size)
    peak = np.maximum.accumulate(walk, axis=1)

    n_gamma = len(gammas)
    alive = np.zeros((n_gamma, n_max))
    ue_sum = np.zeros((n_gamma, n_max))
    ue_sq = np.zeros((n_gamma, n_max))
    rows = np.arange(size)
    for g, gamma in enumerate(gammas):
        not_crossed = peak < gamma
        alive[g] = not_crossed.sum(axis=0)

        crossed = ~not_crossed[:, -1]
        tau_index = np.argmax(~not_crossed, axis=1)[crossed]
        weight = np.exp(-walk[rows[crossed], tau_index])
        ue_sum[g] = np.bincount(tau_index, weights=weight, minlength=n_max)
        ue_sq[g] = np.bincount(tau_index, weights=weight * weight, minlength=n_max)

    return _TailChunkStats(alive, ue_sum, ue_sq, float(walk[:, 0].sum()), size)


def estimate_stopping_tails_ladder(channel: ChannelSpec, n_max: int, gamma_grid: Sequence[float],
                                   trials: int, seed: int, workers: int = 1,
                                   chunk_size: int = DEFAULT_CHUNK_SIZE,
                                   z: float = DEFAULT_Z) -> List[StoppingTailEstimate]:
    """
    Stopping tails for every threshold in gamma_grid from one simulation pass.

    All thresholds see the same metric walks, so tails are exactly monotone in the threshold
    per sample. The result does not depend on `workers`.
    """
    validate_positive_int(n_max, "n_max", "stopping-tail estimation")
    validate_positive_int(trials, "trials", "stopping-tail estimation")
    validate_seed(seed)
    gammas = tuple(float(g) for g in gamma_grid)
    if not gammas or any(math.isnan(g) for g in gammas):
        logger.error(f"Invalid decoding-threshold grid: {gamma_grid!r}")
        raise ValueError("gamma_grid must be a nonempty sequence of numbers")

    logger.info(f"Starting stopping-tail estimation: {type(channel).__name__}, n_max={n_max}, "
                f"{len(gammas)} thresholds, {trials} trials")
    tasks = [(channel, n_max, gammas, seed, index, size) for index, size in plan_chunks(trials, chunk_size)]
    chunks = run_chunks(_tail_chunk, tasks, workers)

    alive = sum(c.alive for c in chunks)
    ue_sum = sum(c.ue_sum for c in chunks)
    ue_sq = sum(c.ue_sq for c in chunks)
    drift = sum(c.drift_sum for c in chunks) / trials

    if drift <= 0.0:
        logger.error(f"Non-positive metric drift {drift:.4g} for {channel}")
        raise NonPositiveDriftError(
            f"true-codeword metric drift must be positive, estimated {drift:.4g} nats per round"
        )

    exact_ue = isinstance(channel, RayleighForward)
    estimates = []
    for g, gamma in enumerate(gammas):
        lower, upper = wilson_interval(alive[g], trials, z)
        tail = np.concatenate(([1.0], alive[g] / trials))
        tail_lower = np.concatenate(([1.0], lower))
        tail_upper = np.concatenate(([1.0], upper))

        if exact_ue:
            ue = np.full(n_max, math.exp(-gamma))
            ue_upper = ue.copy()
        else:
            ue, half = mean_interval(ue_sum[g], ue_sq[g], trials, z)
            ue_upper = np.minimum(ue + half, 1.0)

        if alive[g, -1] == trials:
            logger.warning(f"No threshold crossing observed within {n_max} rounds at gamma_dec={gamma:.3f}")

        estimates.append(StoppingTailEstimate(
            gamma_dec=gamma,
            tail=tail,
            tail_lower=tail_lower,
            tail_upper=tail_upper,
            ue_terms=ue,
            ue_upper=ue_upper,
            trials=trials,
            seed=seed,
            drift=drift,
            ue_exact=exact_ue,
        ))

    logger.info(f"Stopping-tail estimation complete. Drift estimate: {drift:.4f} nats per round")
    return estimates


def estimate_stopping_tails(cfg: SchemeConfig, trials: int, seed: int, workers: int = 1,
                            chunk_size: int = DEFAULT_CHUNK_SIZE, z: float = DEFAULT_Z) -> StoppingTailEstimate:
    return estimate_stopping_tails_ladder(cfg.channel, cfg.n_max, [cfg.gamma_dec], trials, seed,
                                          workers=workers, chunk_size=chunk_size, z=z)[0]


@dataclass(frozen=True)
class FalseCrossingEstimate:
    """
    Direct estimate of P{tau~ = nu} for nu = 1..n_max with Wilson intervals.
    """
    probability: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    trials: int
    seed: int
    gamma_dec: float = field(default=math.nan)


def _false_crossing_chunk(task: Tuple[ChannelSpec, int, float, int, int, int]) -> np.ndarray:
    channel, n_max, gamma_dec, seed, chunk_index, size = task
    rng = substream(seed, chunk_index, 1)
    walk = np.zeros(size)
    first = np.full(size, -1)
    for nu in range(n_max):
        _, state = channel.sample_round(rng, size)
        walk += sample_independent_increment(state, rng).value
        newly = (first < 0) & (walk >= gamma_dec)
        first[newly] = nu
    return np.bincount(first[first >= 0], minlength=n_max)


def estimate_false_crossings(channel: ChannelSpec, n_max: int, gamma_dec: float, trials: int, seed: int,
                             workers: int = 1, chunk_size: int = DEFAULT_CHUNK_SIZE,
                             z: float = DEFAULT_Z) -> FalseCrossingEstimate:
    """
    Monte Carlo of the first-crossing round of an independent codeword's metric, with the
    independent codeword sampled explicitly against each true output.
    """
    validate_positive_int(n_max, "n_max", "false-crossing estimation")
    validate_positive_int(trials, "trials", "false-crossing estimation")
    validate_seed(seed)

    tasks = [(channel, n_max, float(gamma_dec), seed, index, size) for index, size in plan_chunks(trials, chunk_size)]
    counts = sum(run_chunks(_false_crossing_chunk, tasks, workers))
    lower, upper = wilson_interval(counts, trials, z)
    return FalseCrossingEstimate(counts / trials, lower, upper, trials, seed, float(gamma_dec))


def _scaled_ue(log_m1: float, ue: np.ndarray) -> np.ndarray:
    """
    (M - 1) * ue evaluated in log space.
    """
    ue = np.asarray(ue, dtype=float)
    if math.isinf(log_m1):
        return np.zeros_like(ue)
    with np.errstate(divide="ignore"):
        return np.where(ue > 0.0, np.exp(log_m1 + np.log(np.where(ue > 0.0, ue, 1.0))), 0.0)


def vlsf_bound(cfg: SchemeConfig, tails: StoppingTailEstimate) -> BoundResult:
    """
    Evaluate the service-time, error-probability and receiver-latency bounds for cfg.
    """
    if tails.n_max != cfg.n_max:
        logger.error(f"Tail estimate covers n_max={tails.n_max}, configuration has n_max={cfg.n_max}")
        raise ValueError(f"tail estimate n_max={tails.n_max} does not match configuration n_max={cfg.n_max}")
    if not math.isclose(tails.gamma_dec, cfg.gamma_dec, rel_tol=1e-12, abs_tol=1e-12):
        logger.error(f"Tail estimate threshold {tails.gamma_dec} differs from configuration {cfg.gamma_dec}")
        raise ValueError(f"tail estimate gamma_dec={tails.gamma_dec} does not match configuration")

    values = bound_values(cfg.feedback.eps_s2c, cfg.feedback.eps_c2s, cfg.m_log2, tails)
    return BoundResult(
        ell_a_rounds=values.ell_a_rounds,
        ell_a_cu=values.ell_a_rounds * cfg.n_tot,
        eps_bound=values.eps_bound,
        eps_ci=values.eps_ci,
        latency_rx_rounds=values.latency_rx_rounds,
        config=cfg.describe(),
        provenance=provenance_record(seed=tails.seed, trials=tails.trials),
    )


class BoundValues(NamedTuple):
    ell_a_rounds: float
    eps_bound: float
    eps_ci: float
    latency_rx_rounds: float


def bound_values(eps_s2c: float, eps_c2s: float, m_log2: float, tails: StoppingTailEstimate) -> BoundValues:
    """
    Bound arithmetic without the result record; used directly by the grid search.
    """
    n_max = tails.n_max
    g = g_coefficients(eps_s2c, eps_c2s, n_max)
    ell_rounds = float(np.dot(np.diff(g), tails.tail[:n_max]))

    xi = xi_coefficients(eps_c2s, n_max)
    alpha = alpha_coefficients(eps_c2s, n_max)
    log_m1 = log_m_minus_one(m_log2)

    eps = float(np.sum(xi * (alpha * tails.tail[1:] + _scaled_ue(log_m1, tails.ue_terms))))
    eps_ci = float(np.sum(xi * (alpha * tails.tail_upper[1:] + _scaled_ue(log_m1, tails.ue_upper))))
    latency_rx = 1.0 + float(np.dot(xi[:-1], tails.tail[1:n_max]))

    return BoundValues(ell_rounds, min(1.0, eps), min(1.0, max(eps_ci, eps)), latency_rx)


def time_share(point: Tuple[float, float], q: float) -> Tuple[float, float]:
    """
    Mix a (service time, error) point with dropping the packet (0, 1): use the scheme with probability q.
    """
    ell_cu, eps = point
    validate_probability(q, "q", "time sharing")
    validate_probability(eps, "eps", "time sharing")
    return q * ell_cu, q * eps + (1.0 - q)


def optimal_time_share(ell_cu: float, eps: float, target: float) -> Optional[float]:
    """
    Smallest q for which time sharing meets `target`: (1 - target) / (1 - eps).
    None when the point itself misses the target.
    """
    validate_probability(target, "target", "time sharing")
    validate_probability(eps, "eps", "time sharing")
    if eps > target:
        return None
    if eps >= 1.0:
        return 1.0
    return min(1.0, (1.0 - target) / (1.0 - eps))


def bound_sweep(cfg: SchemeConfig, gamma_grid: Sequence[float], trials: int, seed: int,
                workers: int = 1, chunk_size: int = DEFAULT_CHUNK_SIZE, z: float = DEFAULT_Z) -> pd.DataFrame:
    """
    Bound values over a ladder of decoding thresholds, sharing one tail simulation.
    """
    logger.info(f"Starting bound sweep over {len(gamma_grid)} decoding thresholds...")
    ladder = estimate_stopping_tails_ladder(cfg.channel, cfg.n_max, gamma_grid, trials, seed,
                                            workers=workers, chunk_size=chunk_size, z=z)
    rows = []
    for tails in ladder:
        point = SchemeConfig(cfg.channel, cfg.feedback, cfg.n_max, cfg.m_log2, tails.gamma_dec)
        result = vlsf_bound(point, tails)
        rows.append({
            "gamma_dec": tails.gamma_dec,
            "ell_a_cu": result.ell_a_cu,
            "eps_bound": result.eps_bound,
            "eps_ci": result.eps_ci,
        })

    sweep_df = pd.DataFrame(rows, columns=["gamma_dec", "ell_a_cu", "eps_bound", "eps_ci"])
    log_frame_info(sweep_df, "Bound sweep")
    return validate_output_sweep_schema(sweep_df)


def urllc_constraint_met(cfg: SchemeConfig, result: BoundResult, t_max: int, eps_urllc: float) -> bool:
    """
    Whether the scheme meets a hard latency t_max (channel uses) at reliability eps_urllc.
    """
    return cfg.n_max * cfg.n_tot <= t_max and result.eps_bound <= eps_urllc


