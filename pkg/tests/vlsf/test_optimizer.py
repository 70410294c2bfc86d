import math
from dataclasses import replace

import numpy as np
import pandas as pd
import pytest

from include.vlsf.channels import RayleighForward
from include.vlsf.feedback import FeedbackScheme
from include.vlsf.flnf import flnf_frontier, minimum_blocklength
from include.vlsf.optimizer import (
    CANDIDATE_COLUMNS,
    FRONTIER_COLUMNS,
    SearchSpace,
    TailCache,
    clean_frontier,
    default_search_space,
    evaluate_candidates,
    feedback_snr_sweep,
    optimize,
    pareto_clean,
)


def small_space(**overrides):
    """A search space small enough to evaluate in a few seconds."""
    params = dict(
        channel="biawgn",
        rho=1.0,
        m_log2=4,
        latency_budget_cu=48,
        feedback_scheme=FeedbackScheme.AWGN_ANTIPODAL,
        feedback_snr=1.0,
        n_tot_range=(8, 24),
        n_f_max=3,
        gamma_dec_points=4,
        gamma_dec_span=6.0,
        gamma_f_band=(1e-2, 0.3, 3),
    )
    params.update(overrides)
    return default_search_space(**params)


def test_default_grids():
    """n_tot runs over budget divisors and gamma_dec starts at log M."""
    space = small_space()
    assert space.n_tot_grid == (8, 12, 16, 24)
    assert space.n_f_grid == (1, 2, 3)
    assert space.gamma_dec_grid[0] == pytest.approx(4 * math.log(2.0))
    assert len(space.gamma_dec_grid) == 4


def test_noiseless_space_uses_one_feedback_use():
    """Perfect feedback has a single repetition length and no SNR."""
    space = small_space(feedback_scheme=FeedbackScheme.NOISELESS)
    assert space.noiseless
    assert space.n_f_grid == (1,)
    assert math.isinf(space.feedback_snr)


def test_n_tot_must_divide_budget():
    """Every n_tot candidate divides the latency budget."""
    with pytest.raises(ValueError, match="must divide latency_budget_cu"):
        small_space(n_tot_grid=(7, 8))


def test_candidates_respect_the_budget():
    """Every candidate uses exactly the latency budget and a valid feedback pair."""
    candidates = evaluate_candidates(small_space(), trials=1_000, seed=1)
    assert list(candidates.columns) == CANDIDATE_COLUMNS
    assert not candidates.empty
    assert (candidates["n_tot"] * candidates["n_max"] == 48).all()
    assert (candidates["n_f"] < candidates["n_tot"]).all()
    assert (candidates["eps_s2c"] + candidates["eps_c2s"] <= 1.0 + 1e-12).all()
    assert (candidates["eps_ci"] >= candidates["eps_bound"]).all()


def test_rayleigh_candidates_sweep_pilots():
    """Rayleigh candidates carry a pilot count smaller than the forward block."""
    space = small_space(channel="rayleigh", rho=10.0, feedback_scheme=FeedbackScheme.RAYLEIGH_OOK,
                        feedback_snr=10.0, n_p_grid=(1, 2))
    candidates = evaluate_candidates(space, trials=500, seed=2)
    assert set(candidates["n_p"]) == {1.0, 2.0}
    assert (candidates["n_p"] < candidates["n_tot"] - candidates["n_f"]).all()


def test_frontier_does_not_depend_on_enumeration_order():
    """Reversing every grid gives the same optimum."""
    space = small_space()
    reversed_space = replace(space, n_tot_grid=space.n_tot_grid[::-1], n_f_grid=space.n_f_grid[::-1],
                             gamma_dec_grid=space.gamma_dec_grid[::-1])
    targets = [0.3, 0.1, 0.03]
    first = optimize(space, targets, seed=3, trials=1_000)
    second = optimize(reversed_space, targets, seed=3, trials=1_000)
    assert first.equals(second)


def test_unreachable_target_is_infeasible():
    """A target below every candidate is reported as infeasible, not dropped."""
    frontier_df = optimize(small_space(), [0.5, 1e-12], seed=4, trials=500)
    assert list(frontier_df.columns) == FRONTIER_COLUMNS
    assert list(frontier_df["eps_target"]) == [0.5, 1e-12]
    row = frontier_df.iloc[1]
    assert row["status"] == "infeasible"
    assert math.isnan(row["ell_a_cu"])


def test_time_sharing_weight_and_service_time():
    """Time sharing uses q in (0, 1] and never lengthens the service time."""
    space = small_space()
    candidates = evaluate_candidates(space, trials=1_000, seed=5)
    shared = optimize(space, [0.3], candidates=candidates)
    plain = optimize(replace(space, time_sharing=False), [0.3], candidates=candidates)
    assert shared.loc[0, "status"] == "feasible"
    assert 0.0 < shared.loc[0, "q"] <= 1.0
    assert plain.loc[0, "q"] == 1.0
    assert shared.loc[0, "ell_a_cu"] <= plain.loc[0, "ell_a_cu"] + 1e-9


def test_optimum_is_the_smallest_feasible_service_time():
    """Without time sharing the optimum is the fastest candidate meeting the target."""
    space = replace(small_space(), time_sharing=False)
    candidates = evaluate_candidates(space, trials=1_000, seed=6)
    best = optimize(space, [0.2], candidates=candidates).iloc[0]
    feasible = candidates[candidates["eps_ci"] <= 0.2]
    assert best["ell_a_cu"] == pytest.approx(feasible["ell_a_cu"].min())


def test_tail_cache_reuses_ladders():
    """Each forward channel is simulated once per cache."""
    space = small_space()
    cache = TailCache(trials=500, seed=7)
    evaluate_candidates(space, trials=500, seed=7, cache=cache)
    entries = len(cache.entries)
    evaluate_candidates(space, trials=500, seed=7, cache=cache)
    assert len(cache.entries) == entries


def test_feedback_snr_sweep_appends_noiseless_row():
    """The SNR sweep ends with the noiseless-feedback asymptote."""
    sweep_df = feedback_snr_sweep(small_space(), [0.5, 2.0], target=0.3, seed=8, trials=500)
    assert list(sweep_df["feedback_snr"][:2]) == [0.5, 2.0]
    assert math.isinf(sweep_df["feedback_snr"].iloc[-1])
    assert len(sweep_df) == 3


def test_feedback_snr_sweep_needs_biawgn():
    """The feedback SNR sweep is defined for bi-AWGN only."""
    space = small_space(channel="rayleigh", rho=10.0, feedback_scheme=FeedbackScheme.RAYLEIGH_OOK,
                        feedback_snr=10.0, n_p_grid=(1,))
    with pytest.raises(ValueError, match="requires channel='biawgn'"):
        feedback_snr_sweep(space, [1.0], target=0.1)


def sample_frontier():
    """Creating a per-target table whose middle target found a slower point than a tighter one."""
    return pd.DataFrame({
        "eps_target": [1e-1, 1e-2, 1e-3, 1e-4],
        "status": ["feasible", "feasible", "feasible", "infeasible"],
        "ell_a_cu": [40.0, 70.0, 60.0, np.nan],
        "n_tot": [8.0, 12.0, 16.0, np.nan],
        "n_f": [1.0, 2.0, 3.0, np.nan],
        "n_p": [np.nan] * 4,
        "gamma_f": [-0.5, -0.4, -0.3, np.nan],
        "gamma_dec": [3.0, 4.0, 5.0, np.nan],
        "q": [0.9, 1.0, 1.0, np.nan],
        "eps_s2c": [0.1, 0.1, 0.1, np.nan],
        "eps_c2s": [0.01, 0.01, 0.001, np.nan],
    })


def test_pareto_clean_examples():
    """Dominated points are removed and eps decreases along the frontier."""
    points = [(100.0, 1e-3), (120.0, 1e-3), (90.0, 1e-2), (110.0, 1e-4), (95.0, 5e-2)]
    assert pareto_clean(points) == [(90.0, 1e-2), (100.0, 1e-3), (110.0, 1e-4)]
    assert pareto_clean([(1.0, 0.5)]) == [(1.0, 0.5)]
    assert pareto_clean([(1.0, 0.5), (2.0, 0.5)]) == [(1.0, 0.5)]
    assert pareto_clean([(1.0, 0.5), (2.0, 0.1)]) == [(1.0, 0.5), (2.0, 0.1)]
    assert pareto_clean([]) == []


def test_clean_frontier_replaces_dominated_rows():
    """A target takes the faster point found at a tighter target; infeasible rows stay."""
    cleaned = clean_frontier(sample_frontier())
    assert list(cleaned["eps_target"]) == [1e-1, 1e-2, 1e-3, 1e-4]
    assert list(cleaned["ell_a_cu"][:3]) == [40.0, 60.0, 60.0]
    assert cleaned.loc[1, "n_tot"] == 16.0
    assert cleaned.loc[1, "eps_c2s"] == 0.001
    assert cleaned.loc[3, "status"] == "infeasible"
    assert math.isnan(cleaned.loc[3, "ell_a_cu"])


def test_clean_frontier_keeps_a_monotone_table():
    """An already monotone table comes back unchanged."""
    frontier_df = sample_frontier()
    frontier_df.loc[1, "ell_a_cu"] = 50.0
    pd.testing.assert_frame_equal(clean_frontier(frontier_df), frontier_df)


def test_optimized_service_time_grows_as_targets_tighten():
    """Along the optimized table the service time never drops for a tighter target."""
    frontier_df = optimize(small_space(), [0.3, 0.1, 0.03, 0.01, 1e-3], seed=9, trials=2_000)
    feasible = frontier_df[frontier_df["status"] == "feasible"]
    assert feasible["eps_target"].is_monotonic_decreasing
    assert feasible["ell_a_cu"].is_monotonic_increasing


def test_feedback_snr_sweep_table_is_validated():
    """The sweep table has one row per SNR, in increasing order, ending at the noiseless row."""
    sweep_df = feedback_snr_sweep(small_space(), [2.0, 0.5, 2.0], target=0.3, seed=8, trials=500)
    assert list(sweep_df.columns) == ["feedback_snr"] + FRONTIER_COLUMNS
    assert list(sweep_df["feedback_snr"][:2]) == [0.5, 2.0]
    assert sweep_df["n_f"].iloc[-1] == 1.0
    assert sweep_df["eps_s2c"].iloc[-1] == 0.0


def test_search_space_rejects_unknown_channel():
    """Only bi-AWGN and Rayleigh forward channels are searched."""
    with pytest.raises(ValueError, match="channel must be"):
        SearchSpace("awgn", 1.0, 4, 48, FeedbackScheme.NOISELESS, math.inf, (8,), (1,), (3.0,))


@pytest.mark.slow
def test_biawgn_noiseless_reference_frontier():
    """At 0 dB with perfect feedback the eps = 1e-5 optimum is near 106.6 channel uses."""
    space = default_search_space("biawgn", 1.0, 30, 400, FeedbackScheme.NOISELESS, math.inf)
    best = optimize(space, [1e-5], seed=2024, trials=1_000_000, workers=4).iloc[0]
    assert best["status"] == "feasible"
    assert best["ell_a_cu"] == pytest.approx(106.6, rel=0.03)
    assert best["n_tot"] == 16
    assert best["n_f"] == 1


@pytest.mark.slow
def test_biawgn_noisy_reference_frontier():
    """With 0 dB feedback the eps = 1e-5 optimum is near 141 channel uses at n_tot = 50."""
    space = default_search_space(
        "biawgn", 1.0, 30, 400, FeedbackScheme.AWGN_ANTIPODAL, 1.0,
        n_tot_grid=(40, 50, 80),
        n_f_grid=(7, 8, 9, 10, 11),
        gamma_f_grid=tuple(float(g) for g in np.round(np.arange(-2.5, -0.75, 0.05), 2)),
    )
    best = optimize(space, [1e-5], seed=2024, trials=1_000_000, workers=4).iloc[0]
    assert best["status"] == "feasible"
    assert best["ell_a_cu"] == pytest.approx(141.0, rel=0.04)
    assert best["n_tot"] == 50
    assert 8 <= best["n_f"] <= 10


@pytest.mark.slow
def test_feedback_snr_sweep_approaches_the_noiseless_asymptote():
    """The optimum shrinks with the feedback SNR and is within a few channel uses of perfect feedback by 13 dB."""
    space = default_search_space("biawgn", 1.0, 30, 400, FeedbackScheme.AWGN_ANTIPODAL, 1.0)
    snrs = [10.0 ** (db / 10.0) for db in (-4.0, 0.0, 4.0, 8.0, 13.0)]
    sweep_df = feedback_snr_sweep(space, snrs, target=1e-5, seed=2024, trials=1_000_000, workers=4)
    ell = sweep_df["ell_a_cu"].to_numpy()
    assert (sweep_df["status"] == "feasible").all()
    assert (ell[1:] <= ell[:-1] * 1.01).all()
    assert ell[-2] - ell[-1] <= 5.0


@pytest.mark.slow
def test_rayleigh_noiseless_reference_point():
    """At 10 dB with pilots and perfect feedback the n_tot = 50 optimum is near 58 channel uses."""
    space = default_search_space("rayleigh", 10.0, 30, 400, FeedbackScheme.NOISELESS, math.inf,
                                 n_tot_grid=(50,), n_p_grid=(2, 4, 6), gamma_dec_points=41)
    best = optimize(space, [1e-5], seed=2024, trials=1_000_000, workers=4).iloc[0]
    assert best["status"] == "feasible"
    assert best["ell_a_cu"] == pytest.approx(58.3, rel=0.03)


@pytest.mark.slow
def test_rayleigh_feedback_costs_and_baseline_ordering():
    """Noisy feedback costs channel uses, and stop feedback still beats the fixed-length baseline."""
    grids = dict(n_tot_grid=(40, 50, 80), n_p_grid=(2, 4, 6))
    noiseless = optimize(default_search_space("rayleigh", 10.0, 30, 400, FeedbackScheme.NOISELESS,
                                              math.inf, **grids),
                         [1e-5], seed=2024, trials=1_000_000, workers=4).iloc[0]
    noisy = optimize(default_search_space("rayleigh", 10.0, 30, 400, FeedbackScheme.RAYLEIGH_OOK,
                                          10.0, **grids),
                     [1e-5], seed=2024, trials=1_000_000, workers=4).iloc[0]
    assert noiseless["status"] == noisy["status"] == "feasible"
    assert noisy["ell_a_cu"] >= noiseless["ell_a_cu"]

    curve = flnf_frontier(RayleighForward(rho=10.0, n=16, n_p=2), 30, [96, 112, 128, 144, 160, 176, 192],
                          trials=20_000, inner_trials=1_000, seed=2024, n_tot_grid=[16], workers=4)
    fixed_length = minimum_blocklength(curve, 1e-5)
    assert fixed_length is None or fixed_length > noisy["ell_a_cu"]
