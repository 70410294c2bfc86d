import json
import os

import pytest
from typer.testing import CliRunner

from include.vlsf.artifacts import read_csv, read_csv_header
from include.vlsf.cli import EXIT_CONFIG_ERROR, EXIT_INFEASIBLE, EXIT_OK, app, run
from include.vlsf.feedback import FeedbackScheme
from include.vlsf.flnf import RcuEstimate
from include.vlsf.settings import (
    ChannelSettings,
    ConfigError,
    FeedbackSettings,
    MonteCarloSettings,
    RunConfig,
    load_montecarlo_settings,
    load_project_config,
    load_settings,
    project_root,
)

STUB_CONFIG = os.path.join(project_root, "include", "experiments", "stub_simulation.json")


def bound_config():
    """A small bound configuration in the on-disk layout."""
    return {
        "channel": {"kind": "biawgn", "snr_db": 0.0, "n": 8},
        "feedback": {"scheme": "awgn-antipodal", "snr_db": 0.0, "n_f": 2, "gamma_f": -0.5},
        "n_max": 4,
        "m_log2": 4,
        "gamma_dec": 5.0,
    }


def write_config(folder, name, payload):
    path = os.path.join(folder, name)
    with open(path, "w") as file:
        json.dump(payload, file)
    return path


def test_unknown_key_is_a_config_error(tmp_path):
    """Configurations with unexpected keys are rejected."""
    path = write_config(tmp_path, "bad.json", {**bound_config(), "colour": "blue"})
    with pytest.raises(ConfigError, match="colour"):
        load_settings(path, "bound")


def test_unknown_key_exits_with_status_one(tmp_path):
    """The runner reports configuration errors with exit status 1 and writes nothing."""
    path = write_config(tmp_path, "bad.json", {**bound_config(), "colour": "blue"})
    out = os.path.join(tmp_path, "result.json")
    status = run(RunConfig(subcommand="bound", config_path=path, trials=100, out=out))
    assert status == EXIT_CONFIG_ERROR
    assert not os.path.exists(out)


def test_missing_config_file(tmp_path):
    """A missing configuration file is a configuration error."""
    with pytest.raises(ConfigError, match="does not exist"):
        load_settings(os.path.join(tmp_path, "nowhere.json"), "bound")


def test_snr_is_converted_from_db():
    """SNRs are given in dB and used as linear ratios."""
    assert ChannelSettings(kind="biawgn", snr_db=10.0, n=4).rho == pytest.approx(10.0)
    assert ChannelSettings(kind="biawgn", snr_db=0.0, n=4).to_channel().rho == pytest.approx(1.0)
    point = FeedbackSettings(scheme=FeedbackScheme.AWGN_ANTIPODAL, snr_db=0.0, n_f=9, gamma_f=-1.65).to_point()
    assert point.eps_s2c == pytest.approx(0.088, rel=0.01)


def test_noisy_feedback_needs_snr():
    """Noisy feedback schemes need their SNR."""
    with pytest.raises(ValueError, match="snr_db is required"):
        FeedbackSettings(scheme=FeedbackScheme.RAYLEIGH_OOK, n_f=2, gamma_f=1.0)


def test_rayleigh_channel_needs_pilots():
    """A Rayleigh channel cannot be built without a pilot count."""
    with pytest.raises(ConfigError, match="n_p is required"):
        ChannelSettings(kind="rayleigh", snr_db=10.0, n=8).to_channel()


def test_output_extension_is_checked():
    """Only CSV and JSON outputs are supported."""
    with pytest.raises(ValueError, match="out must end in .csv or .json"):
        RunConfig(subcommand="bound", config_path=STUB_CONFIG, out="result.txt")


def test_project_config_has_experiments():
    """The project config lists the figure experiments for the DAG."""
    config = load_project_config()
    assert config["montecarlo"]["chunk_size"] > 0
    for experiment in config["dag"]["experiments"].values():
        path = os.path.join(project_root, "include", "experiments", experiment["config"])
        assert os.path.exists(path)
        load_settings(path, experiment["subcommand"])


def test_stub_simulation_is_all_correct(tmp_path):
    """The deterministic stub channel decodes every episode in one round."""
    out = os.path.join(tmp_path, "stub.json")
    status = run(RunConfig(subcommand="simulate", config_path=STUB_CONFIG, seed=1, trials=20, out=out))
    assert status == EXIT_OK
    with open(out) as file:
        summary = json.load(file)
    assert summary["outcome_counts"]["correct"] == 20
    assert summary["mean_tau_tx"] == 1.0
    assert summary["mean_tau_rx"] == 1.0


def test_reruns_are_byte_identical(tmp_path):
    """The same configuration, seed and trial count reproduce the same file."""
    path = write_config(tmp_path, "bound.json", bound_config())
    outputs = []
    for name in ("first.json", "second.json"):
        out = os.path.join(tmp_path, name)
        assert run(RunConfig(subcommand="bound", config_path=path, seed=4, trials=2_000, out=out)) == EXIT_OK
        with open(out, "rb") as file:
            outputs.append(file.read())
    assert outputs[0] == outputs[1]


def test_bound_json_fields(tmp_path):
    """The bound artifact carries the result fields, the schema version and the config echo."""
    path = write_config(tmp_path, "bound.json", bound_config())
    out = os.path.join(tmp_path, "bound.json.out.json")
    run(RunConfig(subcommand="bound", config_path=path, seed=2, trials=1_000, out=out))
    with open(out) as file:
        result = json.load(file)
    for key in ("schema_version", "ell_a_rounds", "ell_a_cu", "eps_bound", "eps_ci", "latency_rx_rounds"):
        assert key in result
    assert result["config"]["n_tot"] == 10
    assert result["provenance"]["seed"] == 2


def test_sweep_csv_has_header(tmp_path):
    """CSV artifacts start with the configuration and provenance header."""
    path = write_config(tmp_path, "sweep.json", {**bound_config(), "gamma_dec_grid": [3.0, 5.0]})
    out = os.path.join(tmp_path, "sweep.csv")
    assert run(RunConfig(subcommand="sweep", config_path=path, seed=3, trials=1_000, out=out)) == EXIT_OK
    header = read_csv_header(out)
    assert header["provenance"]["seed"] == 3
    assert header["provenance"]["subcommand"] == "sweep"
    assert header["config"]["gamma_dec_grid"] == [3.0, 5.0]
    sweep_df = read_csv(out)
    assert list(sweep_df.columns) == ["gamma_dec", "ell_a_cu", "eps_bound", "eps_ci"]
    assert len(sweep_df) == 2


def test_infeasible_optimization_exits_with_status_two(tmp_path):
    """Unreachable targets are written out and signalled with exit status 2."""
    path = write_config(tmp_path, "optimize.json", {
        "channel": "biawgn",
        "snr_db": 0.0,
        "feedback_scheme": "noiseless",
        "m_log2": 4,
        "latency_budget_cu": 48,
        "targets": [1e-12],
        "n_tot_range": [8, 24],
        "gamma_dec_points": 3,
        "gamma_dec_span": 4.0,
    })
    out = os.path.join(tmp_path, "frontier.csv")
    assert run(RunConfig(subcommand="optimize", config_path=path, seed=5, trials=300, out=out)) == EXIT_INFEASIBLE
    assert list(read_csv(out)["status"]) == ["infeasible"]


def test_feedback_frontier_command(tmp_path):
    """The feedback-frontier command tabulates the configured threshold band."""
    path = write_config(tmp_path, "frontier.json", {
        "scheme": "awgn-antipodal", "snr_db": 0.0, "n_f": 9, "eps_band": [0.001, 0.3, 12],
    })
    out = os.path.join(tmp_path, "frontier.csv")
    result = CliRunner().invoke(app, ["feedback-frontier", "--config", path, "--out", out])
    assert result.exit_code == EXIT_OK
    frontier_df = read_csv(out)
    assert len(frontier_df) == 12
    assert frontier_df["eps_s2c"].is_monotonic_increasing


def test_command_line_rejects_bad_output(tmp_path):
    """An unsupported output extension exits with status 1."""
    result = CliRunner().invoke(app, ["simulate", "--config", STUB_CONFIG, "--out", os.path.join(tmp_path, "x.txt")])
    assert result.exit_code == EXIT_CONFIG_ERROR


def test_montecarlo_settings_from_project_config(tmp_path):
    """Chunk size and confidence level come from the montecarlo block, with defaults for gaps."""
    assert load_montecarlo_settings().confidence_z == pytest.approx(1.96)
    path = os.path.join(tmp_path, "config.yaml")
    with open(path, "w") as file:
        file.write("montecarlo:\n  chunk_size: 500\n  confidence_z: 3.0\n")
    assert load_montecarlo_settings(path) == MonteCarloSettings(chunk_size=500, confidence_z=3.0)
    with open(path, "w") as file:
        file.write("output:\n  folder: results/\n")
    assert load_montecarlo_settings(path) == MonteCarloSettings()
    with open(path, "w") as file:
        file.write("montecarlo:\n  confidence_z: -1.0\n")
    with pytest.raises(ConfigError):
        load_montecarlo_settings(path)


def test_confidence_level_widens_the_reported_interval(tmp_path, monkeypatch):
    """A larger confidence_z leaves the estimate alone and raises its upper limit."""
    path = write_config(tmp_path, "bound.json", bound_config())
    results = {}
    for z in (1.96, 4.0):
        monkeypatch.setattr("include.vlsf.cli.load_montecarlo_settings",
                            lambda z=z: MonteCarloSettings(confidence_z=z))
        out = os.path.join(tmp_path, f"bound_{z}.json")
        assert run(RunConfig(subcommand="bound", config_path=path, seed=6, trials=1_000, out=out)) == EXIT_OK
        with open(out) as file:
            results[z] = json.load(file)
    assert results[4.0]["eps_bound"] == results[1.96]["eps_bound"]
    assert results[4.0]["eps_ci"] > results[1.96]["eps_ci"]


@pytest.mark.parametrize("tilted, mode", [(True, "tilted"), (False, "uniform")])
def test_flnf_command_honours_the_inner_sampler(tmp_path, monkeypatch, tilted, mode):
    """The configured inner sampler reaches every RCU evaluation of the baseline curve."""
    calls = []

    def fake_rcu_bound(cfg, trials, inner_trials=1000, seed=0, relaxed=False, tilted=True, **kwargs):
        calls.append(tilted)
        return RcuEstimate(eps=1e-3, ci=1e-4, trials=trials, inner_trials=inner_trials,
                           mode="tilted" if tilted else "uniform")

    monkeypatch.setattr("include.vlsf.flnf.rcu_bound", fake_rcu_bound)
    path = write_config(tmp_path, "flnf.json", {
        "channel": {"kind": "biawgn", "snr_db": 0.0},
        "m_log2": 8,
        "blocklengths": [20, 30],
        "inner_trials": 10,
        "tilted": tilted,
    })
    out = os.path.join(tmp_path, f"flnf_{mode}.csv")
    assert run(RunConfig(subcommand="flnf", config_path=path, seed=1, trials=100, out=out)) == EXIT_OK
    assert calls == [tilted, tilted]
    assert list(read_csv(out)["blocklength_cu"]) == [20, 30]
