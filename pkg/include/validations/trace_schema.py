import logging
import pandas as pd
import pandera.pandas as pa

from pandera.pandas import Column, Check
from pandera.errors import SchemaError

logger = logging.getLogger(__name__)


output_trace_schema = pa.DataFrameSchema({
    "episode": Column(int, Check.greater_than_or_equal_to(0), required=True, nullable=False),
    "nu": Column(int, Check.greater_than(0), required=True, nullable=False),
    "F": Column(str, Check.isin(["s", "c"]), required=True, nullable=False),
    "Fhat": Column(str, Check.isin(["s", "c"]), required=True, nullable=False),
})


def validate_output_trace_schema(df: pd.DataFrame) -> pd.DataFrame:
    """
    Validate the per-round feedback trace of simulated episodes.
    """
    try:
        return output_trace_schema.validate(df)
    except SchemaError as err:
        logger.error("Output trace schema validation failed.")
        logger.error(err.failure_cases)
        raise ValueError(f"Trace table failed validation: {err}") from err
