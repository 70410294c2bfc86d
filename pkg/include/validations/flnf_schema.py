import logging
import pandas as pd
import pandera.pandas as pa

from pandera.pandas import Column, Check
from pandera.errors import SchemaError

logger = logging.getLogger(__name__)


output_flnf_schema = pa.DataFrameSchema({
    "blocklength_cu": Column(int, Check.greater_than(0), required=True, nullable=False),
    "n_tot": Column(int, Check.greater_than(0), required=True, nullable=False),
    "eps": Column(float, Check.in_range(0.0, 1.0), required=True, nullable=False),
    "ci": Column(float, Check.greater_than_or_equal_to(0), required=True, nullable=False),
}, checks=[
    Check(lambda df: df["blocklength_cu"].is_monotonic_increasing, error="blocklengths must be sorted"),
    Check(lambda df: df["eps"].diff().fillna(0.0).le(0.0).all(), error="eps must be non-increasing"),
])


def validate_output_flnf_schema(df: pd.DataFrame) -> pd.DataFrame:
    """
    Validate a fixed-length no-feedback baseline curve.
    """
    try:
        return output_flnf_schema.validate(df)
    except SchemaError as err:
        logger.error("Output FLNF schema validation failed.")
        logger.error(err.failure_cases)
        raise ValueError(f"FLNF curve failed validation: {err}") from err
