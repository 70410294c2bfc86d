"""
Grid search over the scheme parameters under a channel-use latency budget.

Every candidate satisfies n_max * n_tot = budget. Stopping tails depend only on the forward
channel (n = n_tot - n_f, n_p) and the decoding threshold, so one ladder simulation per
forward channel serves all feedback thresholds and decoding thresholds of that channel.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from include.vlsf.bounds import (
    StoppingTailEstimate,
    bound_values,
    estimate_stopping_tails_ladder,
    optimal_time_share,
)
from include.vlsf.channels import BiAwgnForward, ChannelSpec, RayleighForward
from include.vlsf.feedback import FeedbackScheme, feedback_point, gamma_f_grid
from include.vlsf.helpers import LOG2, divisors_in_range, log_frame_info, validate_positive_int
from include.vlsf.montecarlo import DEFAULT_CHUNK_SIZE, DEFAULT_Z
from include.validations.frontier_schema import validate_output_frontier_schema
from include.validations.snr_sweep_schema import validate_output_snr_sweep_schema

logger = logging.getLogger(__name__)

DEFAULT_N_P_GRID = (1, 2, 4, 6, 8, 10, 15, 20)
DEFAULT_TARGETS = tuple(10.0 ** (-k / 2.0) for k in range(2, 13))

CANDIDATE_COLUMNS = [
    "n_tot", "n_max", "n_f", "n_p", "gamma_f", "gamma_dec",
    "eps_s2c", "eps_c2s", "ell_a_cu", "eps_bound", "eps_ci",
]
FRONTIER_COLUMNS = [
    "eps_target", "status", "ell_a_cu", "n_tot", "n_f", "n_p",
    "gamma_f", "gamma_dec", "q", "eps_s2c", "eps_c2s",
]
SNR_SWEEP_COLUMNS = ["feedback_snr"] + FRONTIER_COLUMNS


@dataclass(frozen=True)
class SearchSpace:
    """
    Candidate grids for one channel. gamma_f_grid overrides the per-n_f default band of
    thresholds; n_p_grid is used for Rayleigh only.
    """
    channel: str
    rho: float
    m_log2: float
    latency_budget_cu: int
    feedback_scheme: FeedbackScheme
    feedback_snr: float
    n_tot_grid: Tuple[int, ...]
    n_f_grid: Tuple[int, ...]
    gamma_dec_grid: Tuple[float, ...]
    n_p_grid: Tuple[int, ...] = DEFAULT_N_P_GRID
    gamma_f_grid: Optional[Tuple[float, ...]] = None
    gamma_f_band: Tuple[float, float, int] = (1e-3, 0.3, 60)
    time_sharing: bool = True

    def __post_init__(self):
        validate_positive_int(self.latency_budget_cu, "latency_budget_cu", "search space")
        if self.channel not in ("biawgn", "rayleigh"):
            raise ValueError(f"channel must be 'biawgn' or 'rayleigh', got {self.channel!r}")
        if not self.n_tot_grid or not self.gamma_dec_grid or not self.n_f_grid:
            logger.error("Search space has an empty grid")
            raise ValueError("n_tot, n_f and gamma_dec grids must be nonempty")
        bad = [n for n in self.n_tot_grid if self.latency_budget_cu % n]
        if bad:
            logger.error(f"n_tot candidates {bad} do not divide the budget {self.latency_budget_cu}")
            raise ValueError(f"every n_tot must divide latency_budget_cu, got {bad}")

    @property
    def noiseless(self) -> bool:
        return FeedbackScheme(self.feedback_scheme) == FeedbackScheme.NOISELESS


def default_search_space(channel: str = "biawgn", rho: float = 1.0, m_log2: float = 30.0,
                         latency_budget_cu: int = 400, feedback_scheme: FeedbackScheme = FeedbackScheme.AWGN_ANTIPODAL,
                         feedback_snr: float = 1.0, n_tot_range: Tuple[int, int] = (8, 200),
                         n_f_max: int = 20, gamma_dec_points: int = 40, gamma_dec_span: float = 20.0,
                         **overrides) -> SearchSpace:
    """
    Default grids: n_tot over the budget divisors in n_tot_range, n_f in 1..n_f_max (1 only
    with noiseless feedback), gamma_dec = log M + [0, gamma_dec_span] nats.
    """
    scheme = FeedbackScheme(feedback_scheme)
    log_m = m_log2 * LOG2
    space = dict(
        channel=channel,
        rho=rho,
        m_log2=m_log2,
        latency_budget_cu=latency_budget_cu,
        feedback_scheme=scheme,
        feedback_snr=math.inf if scheme == FeedbackScheme.NOISELESS else feedback_snr,
        n_tot_grid=tuple(divisors_in_range(latency_budget_cu, *n_tot_range)),
        n_f_grid=(1,) if scheme == FeedbackScheme.NOISELESS else tuple(range(1, n_f_max + 1)),
        gamma_dec_grid=tuple(float(g) for g in log_m + np.linspace(0.0, gamma_dec_span, gamma_dec_points)),
    )
    space.update(overrides)
    return SearchSpace(**space)


@dataclass
class TailCache:
    """
    Ladder estimates keyed by forward channel; valid for one (gamma grid, trials, seed).
    """
    trials: int
    seed: int
    workers: int = 1
    chunk_size: int = DEFAULT_CHUNK_SIZE
    z: float = DEFAULT_Z
    entries: Dict[Tuple[ChannelSpec, int, Tuple[float, ...]], List[StoppingTailEstimate]] = field(default_factory=dict)

    def ladder(self, channel: ChannelSpec, n_max: int, gammas: Tuple[float, ...]) -> List[StoppingTailEstimate]:
        key = (channel, n_max, gammas)
        if key not in self.entries:
            self.entries[key] = estimate_stopping_tails_ladder(
                channel, n_max, gammas, self.trials, self.seed,
                workers=self.workers, chunk_size=self.chunk_size, z=self.z,
            )
        return self.entries[key]


def _forward_channels(space: SearchSpace, n_tot: int, n_f: int) -> Iterable[Tuple[Optional[int], ChannelSpec]]:
    n = n_tot - n_f
    if n < 1:
        return []
    if space.channel == "biawgn":
        return [(None, BiAwgnForward(rho=space.rho, n=n))]
    return [(n_p, RayleighForward(rho=space.rho, n=n, n_p=n_p)) for n_p in space.n_p_grid if n_p < n]


def _feedback_thresholds(space: SearchSpace, n_f: int) -> Sequence[float]:
    if space.noiseless:
        return [math.nan]
    if space.gamma_f_grid is not None:
        return space.gamma_f_grid
    low, high, points = space.gamma_f_band
    return gamma_f_grid(space.feedback_scheme, n_f, space.feedback_snr, low, high, int(points))


def evaluate_candidates(space: SearchSpace, trials: int, seed: int, workers: int = 1,
                        cache: Optional[TailCache] = None, chunk_size: int = DEFAULT_CHUNK_SIZE,
                        z: float = DEFAULT_Z) -> pd.DataFrame:
    """
    Bound values for every (n_tot, n_f, n_p, gamma_f, gamma_dec) candidate.
    """
    validate_positive_int(trials, "trials", "candidate evaluation")
    if cache is None:
        cache = TailCache(trials=trials, seed=seed, workers=workers, chunk_size=chunk_size, z=z)
    gammas = tuple(sorted(float(g) for g in space.gamma_dec_grid))

    logger.info(f"Starting candidate evaluation: {len(space.n_tot_grid)} n_tot values, "
                f"{len(space.n_f_grid)} n_f values, {len(gammas)} decoding thresholds")
    rows = []
    skipped = 0
    for n_tot in sorted(space.n_tot_grid):
        n_max = space.latency_budget_cu // n_tot
        for n_f in sorted(space.n_f_grid):
            if n_f >= n_tot:
                continue
            points = []
            for gamma_f in _feedback_thresholds(space, n_f):
                point = feedback_point(space.feedback_scheme, n_f, space.feedback_snr, gamma_f)
                if not point.feasible:
                    skipped += 1
                    continue
                points.append(point)

            for n_p, channel in _forward_channels(space, n_tot, n_f):
                for tails in cache.ladder(channel, n_max, gammas):
                    for point in points:
                        values = bound_values(point.eps_s2c, point.eps_c2s, space.m_log2, tails)
                        rows.append((n_tot, n_max, n_f, n_p, point.gamma_f, tails.gamma_dec,
                                     point.eps_s2c, point.eps_c2s, values.ell_a_rounds * n_tot,
                                     values.eps_bound, values.eps_ci))

    if skipped:
        logger.warning(f"Skipped {skipped} feedback thresholds with eps_s2c + eps_c2s > 1")
    candidates_df = pd.DataFrame(rows, columns=CANDIDATE_COLUMNS)
    candidates_df["n_p"] = candidates_df["n_p"].astype(float)
    logger.info(f"Candidate evaluation complete. {len(candidates_df)} candidates")
    return candidates_df


def _select(candidates: pd.DataFrame, target: float, time_sharing: bool) -> dict:
    feasible = candidates[candidates["eps_ci"] <= target]
    if feasible.empty:
        return {"eps_target": target, "status": "infeasible"}

    q = feasible["eps_ci"].map(lambda eps: optimal_time_share(1.0, float(eps), target)) if time_sharing else 1.0
    ranked = feasible.assign(q=q, effective=feasible["ell_a_cu"] * q)
    ranked = ranked.sort_values(
        ["effective", "n_tot", "n_f", "n_p", "gamma_f", "gamma_dec"], na_position="first", kind="mergesort"
    )
    best = ranked.iloc[0]
    return {
        "eps_target": target,
        "status": "feasible",
        "ell_a_cu": float(best["effective"]),
        "n_tot": float(best["n_tot"]),
        "n_f": float(best["n_f"]),
        "n_p": float(best["n_p"]),
        "gamma_f": float(best["gamma_f"]),
        "gamma_dec": float(best["gamma_dec"]),
        "q": float(best["q"]),
        "eps_s2c": float(best["eps_s2c"]),
        "eps_c2s": float(best["eps_c2s"]),
    }


def optimize(space: SearchSpace, targets: Sequence[float] = DEFAULT_TARGETS, seed: int = 0,
             trials: int = 100_000, workers: int = 1, candidates: Optional[pd.DataFrame] = None,
             cache: Optional[TailCache] = None, chunk_size: int = DEFAULT_CHUNK_SIZE,
             z: float = DEFAULT_Z) -> pd.DataFrame:
    """
    Minimum average service time (channel uses) per target error probability.

    Feasibility uses eps_ci. With time sharing on, a feasible point is mixed with packet
    dropping down to exactly the target, and q < 1 shortens its service time.
    Targets with no feasible candidate get status "infeasible".
    """
    if len(targets) == 0:
        logger.error("Optimization requested without targets")
        raise ValueError("target grid must not be empty")
    if candidates is None:
        candidates = evaluate_candidates(space, trials, seed, workers, cache, chunk_size=chunk_size, z=z)

    rows = [_select(candidates, float(target), space.time_sharing) for target in sorted(targets, reverse=True)]
    frontier_df = pd.DataFrame(rows).reindex(columns=FRONTIER_COLUMNS)
    frontier_df = frontier_df.astype({c: float for c in FRONTIER_COLUMNS if c != "status"})
    frontier_df = clean_frontier(frontier_df)

    infeasible = frontier_df.loc[frontier_df["status"] == "infeasible", "eps_target"].tolist()
    if infeasible:
        logger.warning(f"Infeasible targets: {infeasible}")
    log_frame_info(frontier_df, "Optimized frontier")
    return validate_output_frontier_schema(frontier_df)


def feedback_snr_sweep(space: SearchSpace, feedback_snrs: Sequence[float], target: float, seed: int = 0,
                       trials: int = 100_000, workers: int = 1, chunk_size: int = DEFAULT_CHUNK_SIZE,
                       z: float = DEFAULT_Z) -> pd.DataFrame:
    """
    Optimized service time at one target for each feedback SNR (linear), followed by the
    noiseless-feedback asymptote (feedback_snr = inf). Tails are shared across all rows.
    """
    if space.channel != "biawgn":
        logger.error("Feedback SNR sweep is defined for the bi-AWGN channel only")
        raise ValueError("feedback_snr_sweep requires channel='biawgn'")

    cache = TailCache(trials=trials, seed=seed, workers=workers, chunk_size=chunk_size, z=z)
    rows = []
    settings = [(float(snr), space.feedback_scheme, space.n_f_grid) for snr in sorted(set(feedback_snrs))]
    settings.append((math.inf, FeedbackScheme.NOISELESS, (1,)))
    for snr, scheme, n_f_grid in settings:
        swept = replace(space, feedback_scheme=scheme, feedback_snr=snr, n_f_grid=n_f_grid)
        best = optimize(swept, [target], seed=seed, trials=trials, workers=workers, cache=cache).iloc[0]
        rows.append({"feedback_snr": snr, **best.to_dict()})

    sweep_df = pd.DataFrame(rows, columns=SNR_SWEEP_COLUMNS)
    log_frame_info(sweep_df, "Feedback SNR sweep")
    return validate_output_snr_sweep_schema(sweep_df)


def pareto_clean(points: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """
    Drop dominated (ell, eps) points; the result is ordered by ell with strictly decreasing eps.
    """
    frontier: List[Tuple[float, float]] = []
    for ell, eps in sorted(points, key=lambda p: (p[0], p[1])):
        if not frontier or eps < frontier[-1][1]:
            frontier.append((ell, eps))
    return frontier


def clean_frontier(frontier_df: pd.DataFrame) -> pd.DataFrame:
    """
    Make the per-target table monotone. A scheme that meets a tighter target also meets every
    looser one, so a feasible target whose (ell_a_cu, eps_target) point is dominated takes the
    fastest non-dominated row at an equal or tighter target. Infeasible rows are kept.
    """
    feasible = frontier_df[frontier_df["status"] == "feasible"]
    kept = pareto_clean(list(zip(feasible["ell_a_cu"], feasible["eps_target"])))
    kept_targets = {eps for _, eps in kept}
    by_target = {row["eps_target"]: row for row in feasible.to_dict(orient="records")}

    records = frontier_df.to_dict(orient="records")
    for index, row in enumerate(records):
        if row["status"] != "feasible" or row["eps_target"] in kept_targets:
            continue
        _, source = min((p for p in kept if p[1] <= row["eps_target"]), key=lambda p: p[0])
        logger.debug(f"Target {row['eps_target']:.1e} takes the point found at {source:.1e}")
        records[index] = {**by_target[source], "eps_target": row["eps_target"]}
    cleaned = pd.DataFrame(records, columns=frontier_df.columns)
    return cleaned.astype(frontier_df.dtypes.to_dict())
