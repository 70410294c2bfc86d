import os
import yaml
import logging

from airflow.decorators import dag, task
from airflow.utils.task_group import TaskGroup
from airflow.exceptions import AirflowException
from pendulum import datetime

from include.vlsf.artifacts import read_csv
from include.vlsf.cli import EXIT_INFEASIBLE, EXIT_OK, run
from include.vlsf.settings import RunConfig


logger = logging.getLogger(__name__)

current_file = os.path.abspath(__file__)
project_root = os.path.abspath(os.path.join(current_file, "..", ".."))
config_path = os.path.join(project_root, "include", "config.yaml")
experiments_folder = os.path.join(project_root, "include", "experiments")

with open(config_path, "r") as file:
    config = yaml.safe_load(file)

GROUPS = {
    "feedback": ["feedback_frontier"],
    "bounds": ["biawgn_noiseless", "biawgn_noisy", "biawgn_feedback_snr", "rayleigh_noiseless", "rayleigh_noisy"],
    "baselines": ["biawgn_flnf", "rayleigh_flnf"],
}


@dag(
    start_date=datetime(2025, 1, 1),
    schedule=None,
    catchup=False,
    default_args={"retries": 2},
    tags=["vlsf", "bounds", "figures"]
)
def vlsf_figures_dag():

    @task()
    def run_experiment(name: str, dag_config: dict, output_folder: str) -> str:
        """
        Regenerates one figure table through the command-line entry point.
        """
        experiment = dag_config["experiments"][name]
        out = os.path.join(project_root, output_folder, experiment["out"])
        run_cfg = RunConfig(
            subcommand=experiment["subcommand"],
            config_path=os.path.join(experiments_folder, experiment["config"]),
            seed=dag_config.get("seed", 0),
            trials=dag_config.get("trials", 100_000),
            workers=dag_config.get("workers", 1),
            out=out,
        )
        status = run(run_cfg)
        if status == EXIT_INFEASIBLE:
            logger.warning(f"{name}: some targets are infeasible, see {out}")
        elif status != EXIT_OK:
            logger.error(f"{name} failed with exit status {status}")
            raise AirflowException(f"{name} failed with exit status {status}")
        return out

    @task()
    def summarize(paths: list) -> None:
        """
        Logs the size of every regenerated table.
        """
        for path in paths:
            logger.info(f"{os.path.basename(path)}: {len(read_csv(path))} rows")

    outputs = []
    for group_name, names in GROUPS.items():
        with TaskGroup(group_name):
            for name in names:
                outputs.append(
                    run_experiment.override(task_id=name)(name, config["dag"], config["output"]["folder"])
                )

    summarize(outputs)


vlsf_figures_dag()
