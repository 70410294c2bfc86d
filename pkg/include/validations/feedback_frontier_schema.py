import logging
import pandas as pd
import pandera.pandas as pa

from pandera.pandas import Column, Check
from pandera.errors import SchemaError

logger = logging.getLogger(__name__)


output_feedback_frontier_schema = pa.DataFrameSchema({
    "scheme": Column(str, Check.isin(["awgn-antipodal", "rayleigh-ook", "noiseless"]), required=True, nullable=False),
    "n_f": Column(int, Check.greater_than(0), required=True, nullable=False),
    "snr": Column(float, Check.greater_than(0), required=True, nullable=False),
    "gamma_f": Column(float, required=True, nullable=True),
    "weight": Column(float, Check.in_range(0.0, 1.0), required=True, nullable=False),
    "eps_s2c": Column(float, Check.in_range(0.0, 1.0), required=True, nullable=False),
    "eps_c2s": Column(float, Check.in_range(0.0, 1.0), required=True, nullable=False),
}, checks=[
    Check(lambda df: df["eps_s2c"].is_monotonic_increasing, error="eps_s2c must be sorted"),
    Check(lambda df: df["eps_c2s"].diff().fillna(0.0).le(1e-12).all(), error="eps_c2s must not increase"),
])


def validate_output_feedback_frontier_schema(df: pd.DataFrame) -> pd.DataFrame:
    """
    Validate a table of feedback operating points along the test frontier.
    """
    try:
        return output_feedback_frontier_schema.validate(df)
    except SchemaError as err:
        logger.error("Output feedback frontier schema validation failed.")
        logger.error(err.failure_cases)
        raise ValueError(f"Feedback frontier table failed validation: {err}") from err
