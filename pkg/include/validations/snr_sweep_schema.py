import logging
import numpy as np
import pandas as pd
import pandera.pandas as pa

from pandera.pandas import Column, Check
from pandera.errors import SchemaError

from include.validations.frontier_schema import output_frontier_schema

logger = logging.getLogger(__name__)


output_snr_sweep_schema = pa.DataFrameSchema(
    {
        "feedback_snr": Column(float, Check.greater_than(0), required=True, nullable=False),
        **output_frontier_schema.columns,
    },
    checks=[
        *output_frontier_schema.checks,
        Check(lambda df: df["feedback_snr"].is_monotonic_increasing and df["feedback_snr"].is_unique,
              error="feedback SNRs must be strictly increasing"),
        Check(lambda df: bool(np.isinf(df["feedback_snr"].iloc[-1])),
              error="the last row is the noiseless-feedback asymptote"),
    ],
)


def validate_output_snr_sweep_schema(df: pd.DataFrame) -> pd.DataFrame:
    """
    Validate the feedback-SNR sweep table.
    """
    try:
        return output_snr_sweep_schema.validate(df)
    except SchemaError as err:
        logger.error("Output feedback SNR sweep schema validation failed.")
        logger.error(err.failure_cases)
        raise ValueError(f"Feedback SNR sweep table failed validation: {err}") from err
