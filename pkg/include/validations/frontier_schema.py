import logging
import pandas as pd
import pandera.pandas as pa

from pandera.pandas import Column, Check
from pandera.errors import SchemaError

logger = logging.getLogger(__name__)


output_frontier_schema = pa.DataFrameSchema({
    "eps_target": Column(float, Check.in_range(0.0, 1.0), required=True, nullable=False),
    "status": Column(str, Check.isin(["feasible", "infeasible"]), required=True, nullable=False),
    "ell_a_cu": Column(float, Check.greater_than_or_equal_to(0), required=True, nullable=True),
    "n_tot": Column(float, Check.greater_than(0), required=True, nullable=True),
    "n_f": Column(float, Check.greater_than(0), required=True, nullable=True),
    "n_p": Column(float, Check.greater_than(0), required=True, nullable=True),
    "gamma_f": Column(float, required=True, nullable=True),
    "gamma_dec": Column(float, required=True, nullable=True),
    "q": Column(float, Check.in_range(0.0, 1.0, include_min=False), required=True, nullable=True),
    "eps_s2c": Column(float, Check.in_range(0.0, 1.0), required=True, nullable=True),
    "eps_c2s": Column(float, Check.in_range(0.0, 1.0), required=True, nullable=True),
}, checks=[
    Check(lambda df: ((df["eps_s2c"] + df["eps_c2s"]) <= 1.0 + 1e-12) | df["eps_s2c"].isna(),
          error="feedback pair violates eps_s2c + eps_c2s <= 1"),
    Check(lambda df: df["ell_a_cu"].notna() == (df["status"] == "feasible"),
          error="only feasible targets carry a service time"),
])


def validate_output_frontier_schema(df: pd.DataFrame) -> pd.DataFrame:
    """
    Validate the per-target optimum table.
    """
    try:
        return output_frontier_schema.validate(df)
    except SchemaError as err:
        logger.error("Output frontier schema validation failed.")
        logger.error(err.failure_cases)
        raise ValueError(f"Frontier table failed validation: {err}") from err
