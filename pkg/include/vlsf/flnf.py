"""
Fixed-length no-feedback (FLNF) baseline: random-coding union bound estimates.

    eps <= E[ min{1, (M - 1) P[metric(Xbar; Y) >= metric(X; Y) | X, Y]} ]

The outer expectation is a Monte Carlo over (codeword, output). The inner probability is
estimated against the same output either with uniformly drawn independent codewords or,
by default, with codewords drawn from the output-tilted law and weighted by exp(-metric).
The relaxed mode replaces the inner probability by exp(-metric(X; Y)).
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from include.vlsf.channels import BiAwgnForward, ChannelSpec, RayleighForward, sample_independent_increment
from include.vlsf.helpers import (
    divisors_in_range,
    log_frame_info,
    log_m_minus_one,
    mean_interval,
    running_minimum,
    validate_positive_int,
)
from include.vlsf.montecarlo import DEFAULT_CHUNK_SIZE, DEFAULT_Z, plan_chunks, run_chunks, substream, validate_seed
from include.validations.flnf_schema import validate_output_flnf_schema

logger = logging.getLogger(__name__)

DEFAULT_INNER_TRIALS = 1_000
# cap on draws * outer samples * symbols held in memory at once
INNER_WORK_LIMIT = 2_000_000


@dataclass(frozen=True)
class FlnfConfig:
    """
    Fixed-length code over blocklength_cu channel uses. The channel describes one block:
    the whole codeword for bi-AWGN, one coherence interval of n_tot uses for Rayleigh.
    """
    channel: ChannelSpec
    blocklength_cu: int
    m_log2: float

    def __post_init__(self):
        validate_positive_int(self.blocklength_cu, "blocklength_cu", "FLNF configuration")
        if not (self.m_log2 >= 0 and math.isfinite(self.m_log2)):
            logger.error(f"Invalid m_log2 for FLNF configuration: {self.m_log2!r}")
            raise ValueError(f"m_log2 must be a finite nonnegative number, got {self.m_log2!r}")
        if self.blocklength_cu % self.channel.n:
            logger.error(f"Blocklength {self.blocklength_cu} is not a multiple of the block size {self.channel.n}")
            raise ValueError(
                f"blocklength_cu={self.blocklength_cu} must be an integer number of blocks of {self.channel.n} uses"
            )

    @property
    def blocks(self) -> int:
        return self.blocklength_cu // self.channel.n

    @property
    def n_tot(self) -> int:
        return self.channel.n


@dataclass(frozen=True)
class RcuEstimate:
    eps: float
    ci: float
    trials: int
    inner_trials: int
    mode: str

    def __iter__(self):
        return iter((self.eps, self.ci))


def _inner_probability(states, t: np.ndarray, inner_trials: int, tilted: bool,
                       rng: np.random.Generator, symbols: int) -> np.ndarray:
    size = t.shape[0]
    batch = max(1, INNER_WORK_LIMIT // max(1, inner_trials * symbols))

    p_hat = np.empty(size)
    for start in range(0, size, batch):
        index = slice(start, min(size, start + batch))
        competitor = 0.0
        for state in states:
            competitor = competitor + sample_independent_increment(
                state.subset(index), rng, draws=inner_trials, tilted=tilted).value
        hit = competitor >= t[index]
        if tilted:
            p_hat[index] = np.where(hit, np.exp(-competitor), 0.0).mean(axis=0)
        else:
            p_hat[index] = hit.mean(axis=0)
    return p_hat


def _rcu_chunk(task: Tuple[FlnfConfig, int, bool, bool, int, int, int]) -> Tuple[float, float]:
    cfg, inner_trials, relaxed, tilted, seed, chunk_index, size = task
    outer_rng = substream(seed, chunk_index, 2)
    inner_rng = substream(seed, chunk_index, 3)

    t = np.zeros(size)
    states = []
    for _ in range(cfg.blocks):
        sample, state = cfg.channel.sample_round(outer_rng, size)
        t += sample.value
        states.append(state)

    log_m1 = log_m_minus_one(cfg.m_log2)
    if math.isinf(log_m1):
        return 0.0, 0.0

    if relaxed:
        log_terms = log_m1 - t
    else:
        p_hat = _inner_probability(states, t, inner_trials, tilted, inner_rng,
                                    cfg.blocks * cfg.channel.symbols_per_round)
        with np.errstate(divide="ignore"):
            log_terms = log_m1 + np.log(p_hat)
    values = np.exp(np.minimum(log_terms, 0.0))
    return float(values.sum()), float(np.square(values).sum())


def rcu_bound(cfg: FlnfConfig, trials: int, inner_trials: int = DEFAULT_INNER_TRIALS, seed: int = 0,
              relaxed: bool = False, tilted: bool = True, workers: int = 1,
              chunk_size: int = DEFAULT_CHUNK_SIZE, z: float = DEFAULT_Z) -> RcuEstimate:
    """
    Nested Monte Carlo estimate of the random-coding union bound with its CLT half-width.

    The clipped inner estimate makes the exact mode slightly optimistic for small inner_trials;
    the relaxed mode is a valid upper bound for any output.
    """
    validate_positive_int(trials, "trials", "RCU bound")
    validate_seed(seed)
    if not relaxed and inner_trials < 1:
        logger.error("RCU bound in exact mode requested without inner trials")
        raise ValueError("inner_trials must be >= 1 in exact mode")

    mode = "relaxed" if relaxed else ("tilted" if tilted else "uniform")
    logger.info(f"Starting RCU estimate: blocklength {cfg.blocklength_cu}, m_log2={cfg.m_log2}, "
                f"{trials} trials, mode={mode}")
    tasks = [(cfg, inner_trials, relaxed, tilted, seed, index, size)
             for index, size in plan_chunks(trials, chunk_size)]
    sums = run_chunks(_rcu_chunk, tasks, workers)
    total = sum(s for s, _ in sums)
    total_sq = sum(q for _, q in sums)
    mean, half = mean_interval(total, total_sq, trials, z)
    eps = float(min(1.0, max(0.0, mean)))
    logger.info(f"RCU estimate complete: eps={eps:.3e} +/- {float(half):.1e}")
    return RcuEstimate(eps=eps, ci=float(half), trials=trials,
                       inner_trials=0 if relaxed else inner_trials, mode=mode)


def _block_channel(channel: ChannelSpec, n_tot: int) -> ChannelSpec:
    if isinstance(channel, RayleighForward):
        return RayleighForward(rho=channel.rho, n=n_tot, n_p=channel.n_p)
    return BiAwgnForward(rho=channel.rho, n=n_tot)


def flnf_frontier(channel: ChannelSpec, m_log2: float, blocklengths: Sequence[int], trials: int,
                  inner_trials: int = DEFAULT_INNER_TRIALS, seed: int = 0, relaxed: bool = False,
                  n_tot_grid: Optional[Sequence[int]] = None, workers: int = 1,
                  chunk_size: int = DEFAULT_CHUNK_SIZE, tilted: bool = True,
                  z: float = DEFAULT_Z) -> pd.DataFrame:
    """
    Tabulate the RCU estimate over a blocklength grid.

    For bi-AWGN each blocklength is one block. For Rayleigh every n_tot dividing the blocklength
    (from n_tot_grid, default all divisors above the pilot count) is tried and the best kept.
    The curve is made non-increasing with a running minimum over blocklength. `tilted` picks
    the inner sampler of the exact mode and is ignored in the relaxed mode.
    """
    grid = sorted(set(int(b) for b in blocklengths))
    if not grid:
        logger.error("FLNF frontier requested with an empty blocklength grid")
        raise ValueError("blocklength grid must not be empty")

    logger.info(f"Starting FLNF frontier over {len(grid)} blocklengths...")
    rows: List[dict] = []
    for blocklength in grid:
        if isinstance(channel, RayleighForward):
            if n_tot_grid is None:
                candidates = divisors_in_range(blocklength, channel.n_p + 1, blocklength)
            else:
                candidates = [n for n in n_tot_grid if blocklength % n == 0 and n > channel.n_p]
        else:
            candidates = [blocklength]

        best = None
        for n_tot in candidates:
            cfg = FlnfConfig(_block_channel(channel, n_tot), blocklength, m_log2)
            estimate = rcu_bound(cfg, trials, inner_trials, seed, relaxed=relaxed, tilted=tilted,
                                 workers=workers, chunk_size=chunk_size, z=z)
            if best is None or estimate.eps < best[1].eps:
                best = (n_tot, estimate)

        if best is None:
            logger.warning(f"No admissible n_tot for blocklength {blocklength}; skipping")
            continue
        rows.append({"blocklength_cu": blocklength, "n_tot": best[0], "eps": best[1].eps, "ci": best[1].ci})

    curve_df = pd.DataFrame(rows, columns=["blocklength_cu", "n_tot", "eps", "ci"])
    if curve_df.empty:
        logger.error("FLNF frontier has no admissible points")
        raise ValueError("no blocklength in the grid admits a valid block structure")

    cleaned = running_minimum(curve_df["eps"].to_numpy())
    source = [int(np.flatnonzero(curve_df["eps"].to_numpy() == value)[0]) for value in cleaned]
    curve_df["n_tot"] = curve_df["n_tot"].to_numpy()[source]
    curve_df["ci"] = curve_df["ci"].to_numpy()[source]
    curve_df["eps"] = cleaned
    curve_df = curve_df.astype({"blocklength_cu": int, "n_tot": int, "eps": float, "ci": float})

    log_frame_info(curve_df, "FLNF frontier")
    return validate_output_flnf_schema(curve_df)


def minimum_blocklength(curve: pd.DataFrame, target: float, use_ci: bool = False) -> Optional[int]:
    """
    Smallest blocklength on a cleaned curve whose estimate (or upper edge) meets target.
    """
    level = curve["eps"] + (curve["ci"] if use_ci else 0.0)
    meeting = curve.loc[level <= target, "blocklength_cu"]
    if meeting.empty:
        return None
    return int(meeting.min())
