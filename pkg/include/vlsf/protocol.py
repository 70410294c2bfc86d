"""
Desk-scale simulator of the stop-feedback protocol with explicit random codebooks.

Per round the transmitter sends the next codeword segment unless it has heard s, the
receiver accumulates the decoding metric of all M codewords and sends s once any of them
reaches the threshold (c otherwise), and the feedback bit is delivered through the
feedback link. Once the receiver has sent s it keeps resending s until the transmitter
hears it. The receiver learns that the transmitter moved on through a perfect new-message
flag at the start of the following round.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, NamedTuple, Optional, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from include.vlsf.artifacts import provenance_record
from include.vlsf.bounds import SchemeConfig
from include.vlsf.channels import BiAwgnForward, NoiselessBinaryForward, RayleighForward
from include.vlsf.feedback import CONTINUE, STOP, OperatingPoint, flip_feedback_bit, transmit_feedback_bit
from include.vlsf.helpers import (
    log_frame_info,
    mean_interval,
    validate_feedback_pair,
    validate_positive_int,
    validate_probability,
)
from include.vlsf.montecarlo import DEFAULT_CHUNK_SIZE, DEFAULT_Z, plan_chunks, run_chunks, substream, validate_seed
from include.validations.trace_schema import validate_output_trace_schema

logger = logging.getLogger(__name__)

DEFAULT_MAX_WORKLOAD = 1 << 20

# leading substream keys, distinct from the Monte Carlo chunk keys
CODEBOOK_STREAM = 5
EPISODE_STREAM = 6

ProtocolChannel = Union[BiAwgnForward, RayleighForward, NoiselessBinaryForward]


class WorkloadBudgetError(ValueError):
    """
    M * n_max exceeds the metric workload the simulator accepts.
    """


class Outcome(str, Enum):
    CORRECT = "correct"
    UNDETECTED_ERROR = "undetected-error"
    PREMATURE_STOP_ERASURE = "premature-stop-erasure"
    DEADLINE_ERASURE = "deadline-erasure"


@dataclass(frozen=True)
class Codebook:
    """
    Random codebook identified by (seed, codebook_id). The segment block of round nu is
    regenerated from (seed, codebook_id, nu); row w holds the segment of message w.
    """
    channel: ProtocolChannel
    m: int
    seed: int
    codebook_id: int = 0

    def __post_init__(self):
        validate_positive_int(self.m, "m", "codebook")
        validate_seed(self.seed)

    @property
    def alphabet_size(self) -> int:
        return self.channel.alphabet_size

    def segments(self, nu: int) -> np.ndarray:
        rng = substream(self.seed, CODEBOOK_STREAM, self.codebook_id, nu)
        return self.channel.draw_codewords(rng, self.m)

    def segment(self, message: int, nu: int) -> np.ndarray:
        return self.segments(nu)[message]


@dataclass
class TrialRecord:
    """
    tau_dec is None when the receiver never decoded.
    """
    tau_dec: Optional[int]
    tau_tx: int
    tau_rx: int
    outcome: Outcome
    message: int
    decoded: Optional[int] = None
    fb_events: List[Tuple[str, str]] = field(default_factory=list)


def receiver_latency(tau_dec: Optional[int], tau_tx: int, n_max: int) -> int:
    return int(min(math.inf if tau_dec is None else tau_dec, tau_tx + 1, n_max))


def _message_count(m_log2: float) -> int:
    m = 2.0 ** m_log2
    if abs(m - round(m)) > 1e-9:
        logger.error(f"Simulation needs an integer message count, got 2**{m_log2}")
        raise ValueError(f"2**m_log2 must be an integer for simulation, got m_log2={m_log2}")
    return int(round(m))


def check_workload(m: int, n_max: int, max_workload: int = DEFAULT_MAX_WORKLOAD) -> None:
    if m * n_max > max_workload:
        logger.error(f"Simulation workload M*n_max = {m * n_max} exceeds {max_workload}")
        raise WorkloadBudgetError(
            f"M * n_max = {m * n_max} exceeds the simulator workload budget {max_workload}"
        )


def _deliver(point: OperatingPoint, bit: str, rng: np.random.Generator, physical: bool) -> str:
    if physical:
        return transmit_feedback_bit(point, bit, rng)
    return flip_feedback_bit(point, bit, rng)


def run_episode(cfg: SchemeConfig, codebook: Codebook, rng: np.random.Generator,
                physical_feedback: bool = False, message: Optional[int] = None,
                max_workload: int = DEFAULT_MAX_WORKLOAD) -> TrialRecord:
    """
    One message through the protocol, from the first round until the transmitter moves on
    or the deadline n_max is reached.
    """
    if codebook.channel != cfg.channel:
        logger.error("Codebook channel does not match the scheme configuration")
        raise ValueError("codebook channel must match cfg.channel")
    check_workload(codebook.m, cfg.n_max, max_workload)

    n_max = cfg.n_max
    w = int(rng.integers(codebook.m)) if message is None else int(message)
    metric = np.zeros(codebook.m)
    tau_dec: Optional[int] = None
    decoded: Optional[int] = None
    events: List[Tuple[str, str]] = []

    for nu in range(1, n_max + 1):
        if tau_dec is None:
            metric += cfg.channel.score_round(codebook.segments(nu), w, rng)
            crossing = np.flatnonzero(metric >= cfg.gamma_dec)
            if crossing.size:
                tau_dec = nu
                decoded = int(crossing[-1])

        bit = STOP if tau_dec is not None else CONTINUE
        heard = _deliver(cfg.feedback, bit, rng, physical_feedback)
        events.append((bit, heard))

        if heard == STOP or nu == n_max:
            tau_tx = nu
            break

    if decoded is not None:
        outcome = Outcome.CORRECT if decoded == w else Outcome.UNDETECTED_ERROR
    elif events[-1] == (CONTINUE, STOP):
        # a misheard continue ends the episode early, or at the deadline when nu == n_max
        outcome = Outcome.PREMATURE_STOP_ERASURE
    else:
        outcome = Outcome.DEADLINE_ERASURE

    return TrialRecord(
        tau_dec=tau_dec,
        tau_tx=tau_tx,
        tau_rx=receiver_latency(tau_dec, tau_tx, n_max),
        outcome=outcome,
        message=w,
        decoded=decoded,
        fb_events=events,
    )


@dataclass(frozen=True)
class FreshCodebookPolicy:
    """
    A new codebook for every episode: statistics average over the random-coding ensemble.
    """
    channel: ProtocolChannel
    m: int
    seed: int

    def __call__(self, coin: np.random.Generator, episode: int) -> Codebook:
        return Codebook(self.channel, self.m, self.seed, codebook_id=episode)


@dataclass(frozen=True)
class FixedCodebookPolicy:
    codebook: Codebook

    def __call__(self, coin: np.random.Generator, episode: int) -> Codebook:
        return self.codebook


@dataclass(frozen=True)
class TwoCodebookPolicy:
    """
    Common randomness over two codebooks: `first` with probability `weight`.
    """
    first: Codebook
    second: Codebook
    weight: float

    def __call__(self, coin: np.random.Generator, episode: int) -> Codebook:
        return self.first if coin.random() < self.weight else self.second


CodebookPolicy = Union[FreshCodebookPolicy, FixedCodebookPolicy, TwoCodebookPolicy]


def randomized_codebook_policy(first: Codebook, second: Codebook, weight: float = 0.5) -> TwoCodebookPolicy:
    validate_probability(weight, "weight", "randomized codebook policy")
    if first.m != second.m or first.alphabet_size != second.alphabet_size or first.channel != second.channel:
        logger.error("Randomized codebook policy needs codebooks with identical M, channel and alphabet")
        raise ValueError("codebooks must share M, channel and alphabet")
    return TwoCodebookPolicy(first, second, float(weight))


class SimulationSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    episodes: int
    outcome_counts: Dict[str, int]
    mean_tau_tx: float
    mean_tau_rx: float
    error_rate: float = Field(ge=0.0, le=1.0)
    ci: Dict[str, float]
    config: Dict[str, object] = Field(default_factory=dict)
    provenance: Dict[str, object] = Field(default_factory=dict)


def _episode_streams(seed: int, episode: int) -> Tuple[np.random.Generator, np.random.Generator]:
    return substream(seed, EPISODE_STREAM, episode, 0), substream(seed, EPISODE_STREAM, episode, 1)


def _simulate_chunk(task) -> Dict[str, object]:
    cfg, policy, seed, start, size, physical, max_workload = task
    counts = {outcome.value: 0 for outcome in Outcome}
    sums = np.zeros(4)
    for episode in range(start, start + size):
        channel_rng, coin_rng = _episode_streams(seed, episode)
        record = run_episode(cfg, policy(coin_rng, episode), channel_rng,
                             physical_feedback=physical, max_workload=max_workload)
        counts[record.outcome.value] += 1
        sums += (record.tau_tx, record.tau_tx ** 2, record.tau_rx, record.tau_rx ** 2)
    return {"counts": counts, "sums": sums}


def simulate(cfg: SchemeConfig, episodes: int, seed: int, workers: int = 1,
             physical_feedback: bool = False, policy: Optional[CodebookPolicy] = None,
             chunk_size: int = DEFAULT_CHUNK_SIZE, max_workload: int = DEFAULT_MAX_WORKLOAD,
             z: float = DEFAULT_Z) -> SimulationSummary:
    """
    Run independent episodes and summarise service time, receiver latency and errors.

    Erasures count as errors. Results do not depend on `workers`.
    """
    validate_positive_int(episodes, "episodes", "protocol simulation")
    validate_seed(seed)
    m = _message_count(cfg.m_log2)
    check_workload(m, cfg.n_max, max_workload)
    if policy is None:
        policy = FreshCodebookPolicy(cfg.channel, m, seed)

    logger.info(f"Starting protocol simulation: M={m}, n_max={cfg.n_max}, {episodes} episodes")
    tasks = [(cfg, policy, seed, index * chunk_size, size, physical_feedback, max_workload)
             for index, size in plan_chunks(episodes, chunk_size)]
    chunks = run_chunks(_simulate_chunk, tasks, workers)

    counts = {outcome.value: 0 for outcome in Outcome}
    sums = np.zeros(4)
    for chunk in chunks:
        for key, value in chunk["counts"].items():
            counts[key] += value
        sums += chunk["sums"]

    mean_tx, half_tx = mean_interval(sums[0], sums[1], episodes, z)
    mean_rx, half_rx = mean_interval(sums[2], sums[3], episodes, z)
    errors = episodes - counts[Outcome.CORRECT.value]
    error_rate = errors / episodes
    half_err = z * math.sqrt(max(error_rate * (1.0 - error_rate), 0.0) / episodes)

    summary = SimulationSummary(
        episodes=episodes,
        outcome_counts=counts,
        mean_tau_tx=float(mean_tx),
        mean_tau_rx=float(mean_rx),
        error_rate=error_rate,
        ci={"mean_tau_tx": float(half_tx), "mean_tau_rx": float(half_rx), "error_rate": half_err},
        config=cfg.describe(),
        provenance=provenance_record(seed=seed, trials=episodes, physical_feedback=physical_feedback),
    )
    logger.info(f"Protocol simulation complete. Outcomes: {counts}")
    return summary


def simulate_trace(cfg: SchemeConfig, episodes: int, seed: int, physical_feedback: bool = False,
                   policy: Optional[CodebookPolicy] = None,
                   max_workload: int = DEFAULT_MAX_WORKLOAD) -> pd.DataFrame:
    """
    Per-round (F, Fhat) trace of the first `episodes` episodes, for debugging.
    """
    validate_positive_int(episodes, "episodes", "protocol trace")
    m = _message_count(cfg.m_log2)
    if policy is None:
        policy = FreshCodebookPolicy(cfg.channel, m, seed)

    rows = []
    for episode in range(episodes):
        channel_rng, coin_rng = _episode_streams(seed, episode)
        record = run_episode(cfg, policy(coin_rng, episode), channel_rng,
                             physical_feedback=physical_feedback, max_workload=max_workload)
        for nu, (bit, heard) in enumerate(record.fb_events, start=1):
            rows.append({"episode": episode, "nu": nu, "F": bit, "Fhat": heard})

    trace_df = pd.DataFrame(rows, columns=["episode", "nu", "F", "Fhat"])
    log_frame_info(trace_df, "Protocol trace")
    return validate_output_trace_schema(trace_df)


class ServiceTimeEstimate(NamedTuple):
    mean: float
    ci: float


def conditional_service_time(eps_pair: Tuple[float, float], n_max: int, nu: int, episodes: int,
                             rng: np.random.Generator, z: float = DEFAULT_Z) -> ServiceTimeEstimate:
    """
    Empirical E[tau_tx | tau_dec = nu] from the feedback error process alone.

    Rounds before nu carry c (heard as s with probability eps_c2s); from nu on the receiver
    sends s (lost with probability eps_s2c). Decoding cannot happen after the deadline, so
    nu >= n_max behaves as nu = n_max.
    """
    eps_s2c, eps_c2s = eps_pair
    validate_feedback_pair(eps_s2c, eps_c2s, "conditional service time")
    validate_positive_int(n_max, "n_max", "conditional service time")
    validate_positive_int(nu, "nu", "conditional service time")
    validate_positive_int(episodes, "episodes", "conditional service time")
    nu = min(nu, n_max)

    if eps_c2s > 0.0:
        early = rng.geometric(eps_c2s, size=episodes)
    else:
        early = np.full(episodes, np.iinfo(np.int64).max)
    if eps_s2c < 1.0:
        heard = nu + rng.geometric(1.0 - eps_s2c, size=episodes) - 1
    else:
        heard = np.full(episodes, n_max)

    tau_tx = np.where(early < nu, early, np.minimum(heard, n_max)).astype(float)
    mean, half = mean_interval(tau_tx.sum(), np.square(tau_tx).sum(), episodes, z)
    return ServiceTimeEstimate(float(mean), float(half))
