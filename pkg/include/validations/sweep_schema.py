import logging
import pandas as pd
import pandera.pandas as pa

from pandera.pandas import Column, Check
from pandera.errors import SchemaError

logger = logging.getLogger(__name__)


output_sweep_schema = pa.DataFrameSchema({
    "gamma_dec": Column(float, required=True, nullable=False),
    "ell_a_cu": Column(float, Check.greater_than(0), required=True, nullable=False),
    "eps_bound": Column(float, Check.in_range(0.0, 1.0), required=True, nullable=False),
    "eps_ci": Column(float, Check.in_range(0.0, 1.0), required=True, nullable=False),
}, checks=[
    Check(lambda df: df["eps_ci"] >= df["eps_bound"], error="eps_ci below eps_bound"),
])


def validate_output_sweep_schema(df: pd.DataFrame) -> pd.DataFrame:
    """
    Validate a decoding-threshold sweep of the bound.
    """
    try:
        return output_sweep_schema.validate(df)
    except SchemaError as err:
        logger.error("Output sweep schema validation failed.")
        logger.error(err.failure_cases)
        raise ValueError(f"Sweep table failed validation: {err}") from err
