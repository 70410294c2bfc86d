"""
Command-line entry point.

    python -m include.vlsf.cli bound --config cfg.json --seed 1 --trials 1000000 --out result.json

Exit status: 0 on success, 1 on configuration errors, 2 when an optimization target is infeasible.
"""
import logging
from typing import Any, Dict, Optional, Tuple

import pandas as pd
import typer

from include.vlsf.artifacts import provenance_record, write_artifact
from include.vlsf.bounds import bound_sweep, estimate_stopping_tails, vlsf_bound, urllc_constraint_met
from include.vlsf.feedback import frontier, frontier_frame, gamma_f_grid
from include.vlsf.flnf import flnf_frontier, minimum_blocklength
from include.vlsf.helpers import db_to_linear
from include.vlsf.optimizer import FRONTIER_COLUMNS, feedback_snr_sweep, optimize
from include.vlsf.protocol import simulate, simulate_trace
from include.vlsf.settings import (
    FeedbackFrontierSettings,
    FlnfSettings,
    MonteCarloSettings,
    OptimizeSettings,
    RunConfig,
    load_montecarlo_settings,
    load_settings,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_INFEASIBLE = 2

app = typer.Typer(help="Achievability bounds and simulation for stop-feedback codes.", add_completion=False)


def _run_bound(settings, run_cfg: RunConfig, mc: MonteCarloSettings) -> Tuple[Any, int]:
    cfg = settings.to_scheme_config()
    tails = estimate_stopping_tails(cfg, run_cfg.trials, run_cfg.seed, run_cfg.workers,
                                    mc.chunk_size, mc.confidence_z)
    result = vlsf_bound(cfg, tails)
    if settings.t_max is not None and settings.eps_urllc is not None:
        met = urllc_constraint_met(cfg, result, settings.t_max, settings.eps_urllc)
        result = result.model_copy(update={"provenance": {**result.provenance, "urllc_constraint_met": met}})
    return result, EXIT_OK


def _run_sweep(settings, run_cfg: RunConfig, mc: MonteCarloSettings) -> Tuple[Any, int]:
    cfg = settings.to_scheme_config(gamma_dec=settings.gamma_grid()[0])
    return bound_sweep(cfg, settings.gamma_grid(), run_cfg.trials, run_cfg.seed,
                       run_cfg.workers, mc.chunk_size, mc.confidence_z), EXIT_OK


def _run_optimize(settings: OptimizeSettings, run_cfg: RunConfig, mc: MonteCarloSettings) -> Tuple[Any, int]:
    space = settings.to_search_space()
    if settings.feedback_snr_db_grid:
        snrs = [db_to_linear(s) for s in settings.feedback_snr_db_grid]
        table = feedback_snr_sweep(space, snrs, settings.targets[0], run_cfg.seed, run_cfg.trials, run_cfg.workers,
                                   chunk_size=mc.chunk_size, z=mc.confidence_z)
    else:
        table = optimize(space, settings.targets, run_cfg.seed, run_cfg.trials, run_cfg.workers,
                         chunk_size=mc.chunk_size, z=mc.confidence_z)
    status = EXIT_INFEASIBLE if (table["status"] == "infeasible").any() else EXIT_OK
    return table, status


def _run_simulate(settings, run_cfg: RunConfig, mc: MonteCarloSettings) -> Tuple[Any, int]:
    cfg = settings.to_scheme_config()
    summary = simulate(cfg, run_cfg.trials, run_cfg.seed, run_cfg.workers,
                       physical_feedback=settings.physical_feedback, chunk_size=mc.chunk_size,
                       max_workload=settings.max_workload, z=mc.confidence_z)
    if settings.trace_episodes:
        trace_df = simulate_trace(cfg, settings.trace_episodes, run_cfg.seed,
                                  physical_feedback=settings.physical_feedback,
                                  max_workload=settings.max_workload)
        trace_path = run_cfg.out.rsplit(".", 1)[0] + ".trace.csv"
        write_artifact(trace_df, trace_path, _header(settings, run_cfg), REQUIRED_COLUMNS["trace"])
    if run_cfg.out.lower().endswith(".csv"):
        flat = {k: v for k, v in summary.model_dump().items() if k not in ("config", "provenance")}
        row = {**{key: value for key, value in flat.items() if not isinstance(value, dict)},
               **{f"count_{k}": v for k, v in summary.outcome_counts.items()},
               **{f"ci_{k}": v for k, v in summary.ci.items()}}
        return pd.DataFrame([row]), EXIT_OK
    return summary, EXIT_OK


def _run_flnf(settings: FlnfSettings, run_cfg: RunConfig, mc: MonteCarloSettings) -> Tuple[Any, int]:
    first_n = settings.blocklengths[0]
    channel = settings.channel.to_channel(n=settings.channel.n or first_n)
    curve = flnf_frontier(channel, settings.m_log2, settings.blocklengths, run_cfg.trials,
                          inner_trials=settings.inner_trials, seed=run_cfg.seed, relaxed=settings.relaxed,
                          n_tot_grid=settings.n_tot_grid, workers=run_cfg.workers, chunk_size=mc.chunk_size,
                          tilted=settings.tilted, z=mc.confidence_z)
    if settings.target is not None:
        logger.info(f"Minimum blocklength for eps <= {settings.target}: "
                    f"{minimum_blocklength(curve, settings.target)}")
    return curve, EXIT_OK


def _run_feedback_frontier(settings: FeedbackFrontierSettings, run_cfg: RunConfig,
                           mc: MonteCarloSettings) -> Tuple[Any, int]:
    grid = settings.gamma_f_grid
    if not grid:
        low, high, points = settings.eps_band
        grid = list(gamma_f_grid(settings.scheme, settings.n_f, settings.snr, low, high, int(points)))
    points = frontier(settings.scheme, settings.n_f, settings.snr, grid, settings.hull_points)
    return frontier_frame(points), EXIT_OK


RUNNERS = {
    "bound": _run_bound,
    "sweep": _run_sweep,
    "optimize": _run_optimize,
    "simulate": _run_simulate,
    "flnf": _run_flnf,
    "feedback-frontier": _run_feedback_frontier,
}

REQUIRED_COLUMNS = {
    "sweep": ["gamma_dec", "ell_a_cu", "eps_bound", "eps_ci"],
    "optimize": FRONTIER_COLUMNS,
    "simulate": ["episodes", "mean_tau_tx", "mean_tau_rx", "error_rate"],
    "flnf": ["blocklength_cu", "n_tot", "eps", "ci"],
    "feedback-frontier": ["scheme", "n_f", "snr", "gamma_f", "weight", "eps_s2c", "eps_c2s"],
    "trace": ["episode", "nu", "F", "Fhat"],
}


def _header(settings, run_cfg: RunConfig) -> Dict[str, Any]:
    return {
        "config": settings.model_dump(mode="json"),
        "provenance": provenance_record(seed=run_cfg.seed, trials=run_cfg.trials, subcommand=run_cfg.subcommand),
    }


def run(run_cfg: RunConfig) -> int:
    """
    Load and validate the configuration, compute, and write the artifact atomically.
    """
    try:
        settings = load_settings(run_cfg.config_path, run_cfg.subcommand)
        logger.info(f"Running {run_cfg.subcommand} with seed={run_cfg.seed}, trials={run_cfg.trials}, "
                    f"workers={run_cfg.workers}")
        result, status = RUNNERS[run_cfg.subcommand](settings, run_cfg, load_montecarlo_settings())
    except ValueError as err:
        # ConfigError and the domain validation errors alike
        logger.error(f"{run_cfg.subcommand} failed: {err}")
        return EXIT_CONFIG_ERROR

    write_artifact(result, run_cfg.out, _header(settings, run_cfg), REQUIRED_COLUMNS.get(run_cfg.subcommand))
    if status == EXIT_INFEASIBLE:
        logger.warning("At least one target is infeasible")
    return status


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _invoke(subcommand: str, config: str, seed: int, trials: int, workers: int, out: str, verbose: bool) -> None:
    _configure_logging(verbose)
    try:
        run_cfg = RunConfig(subcommand=subcommand, config_path=config, seed=seed,
                            trials=trials, workers=workers, out=out)
    except ValueError as err:
        logger.error(f"Invalid command line: {err}")
        raise typer.Exit(code=EXIT_CONFIG_ERROR)
    raise typer.Exit(code=run(run_cfg))


CONFIG_OPTION = typer.Option(..., "--config", envvar="VLSF_CONFIG", help="JSON or YAML run configuration.")
SEED_OPTION = typer.Option(0, "--seed", envvar="VLSF_SEED", help="Master seed (64-bit).")
TRIALS_OPTION = typer.Option(100_000, "--trials", envvar="VLSF_TRIALS", help="Monte Carlo trials or episodes.")
WORKERS_OPTION = typer.Option(1, "--workers", envvar="VLSF_WORKERS", help="Worker processes.")
OUT_OPTION = typer.Option(..., "--out", envvar="VLSF_OUT", help="Output path, .csv or .json.")
VERBOSE_OPTION = typer.Option(False, "--verbose", "-v", help="Debug logging.")


@app.command("bound")
def bound_command(config: str = CONFIG_OPTION, seed: int = SEED_OPTION, trials: int = TRIALS_OPTION,
                  workers: int = WORKERS_OPTION, out: str = OUT_OPTION, verbose: bool = VERBOSE_OPTION):
    """Evaluate the service-time and error bounds for one configuration."""
    _invoke("bound", config, seed, trials, workers, out, verbose)


@app.command("sweep")
def sweep_command(config: str = CONFIG_OPTION, seed: int = SEED_OPTION, trials: int = TRIALS_OPTION,
                  workers: int = WORKERS_OPTION, out: str = OUT_OPTION, verbose: bool = VERBOSE_OPTION):
    """Tabulate the bounds over a ladder of decoding thresholds."""
    _invoke("sweep", config, seed, trials, workers, out, verbose)


@app.command("optimize")
def optimize_command(config: str = CONFIG_OPTION, seed: int = SEED_OPTION, trials: int = TRIALS_OPTION,
                     workers: int = WORKERS_OPTION, out: str = OUT_OPTION, verbose: bool = VERBOSE_OPTION):
    """Grid-search the scheme parameters per target error probability."""
    _invoke("optimize", config, seed, trials, workers, out, verbose)


@app.command("simulate")
def simulate_command(config: str = CONFIG_OPTION, seed: int = SEED_OPTION, trials: int = TRIALS_OPTION,
                     workers: int = WORKERS_OPTION, out: str = OUT_OPTION, verbose: bool = VERBOSE_OPTION):
    """Simulate the protocol with explicit codebooks (trials = episodes)."""
    _invoke("simulate", config, seed, trials, workers, out, verbose)


@app.command("flnf")
def flnf_command(config: str = CONFIG_OPTION, seed: int = SEED_OPTION, trials: int = TRIALS_OPTION,
                 workers: int = WORKERS_OPTION, out: str = OUT_OPTION, verbose: bool = VERBOSE_OPTION):
    """Fixed-length no-feedback baseline curve."""
    _invoke("flnf", config, seed, trials, workers, out, verbose)


@app.command("feedback-frontier")
def feedback_frontier_command(config: str = CONFIG_OPTION, seed: int = SEED_OPTION, trials: int = TRIALS_OPTION,
                              workers: int = WORKERS_OPTION, out: str = OUT_OPTION,
                              verbose: bool = VERBOSE_OPTION):
    """Operating points of the feedback test."""
    _invoke("feedback-frontier", config, seed, trials, workers, out, verbose)


def main(argv: Optional[list] = None) -> None:
    app(args=argv)


if __name__ == "__main__":
    main()
