"""
Result writers. Every artifact is written to a temporary file in the target folder and
renamed into place, so readers never see a partial file.
"""
import functools
import json
import logging
import math
import os
import subprocess
import tempfile
from typing import Any, Dict, Optional, Sequence

import numpy as np
import pandas as pd

from include.vlsf.helpers import validate_required_columns

logger = logging.getLogger(__name__)

FALLBACK_VERSION = "0.1.0+unknown"


@functools.lru_cache(maxsize=1)
def version_string() -> str:
    """
    git-describe style version of the working tree, or a fixed fallback outside a checkout.
    """
    root = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
    try:
        described = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=root, capture_output=True, text=True, timeout=5, check=True,
        )
    except (OSError, subprocess.SubprocessError):
        return FALLBACK_VERSION
    return described.stdout.strip() or FALLBACK_VERSION


def provenance_record(seed: Optional[int] = None, trials: Optional[int] = None, **extra: Any) -> Dict[str, Any]:
    record = {"seed": seed, "trials": trials, "version": version_string()}
    record.update(extra)
    return record


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def dumps(payload: Any) -> str:
    """
    Deterministic JSON text: sorted keys, non-finite floats spelled out as strings.
    """
    return json.dumps(_jsonable(payload), sort_keys=True, indent=2) + "\n"


def write_text_atomic(text: str, path: str) -> str:
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", dir=folder)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.info(f"Wrote {path}")
    return path


def write_json(payload: Any, path: str) -> str:
    return write_text_atomic(dumps(payload), path)


def write_csv(df: pd.DataFrame, path: str, header: Optional[Dict[str, Any]] = None) -> str:
    """
    Write a result table as CSV. `header` entries become leading `# key: json` lines.
    """
    if df.empty:
        logger.error(f"Refusing to write an empty table to {path}")
        raise ValueError("Empty DataFrame")

    lines = []
    for key, value in sorted((header or {}).items()):
        lines.append(f"# {key}: {json.dumps(_jsonable(value), sort_keys=True)}\n")
    body = df.to_csv(index=False, lineterminator="\n", float_format="%.10g")
    return write_text_atomic("".join(lines) + body, path)


def read_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path, comment="#")


def read_csv_header(path: str) -> Dict[str, Any]:
    header = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].partition(": ")
            header[key] = json.loads(value)
    return header


def write_artifact(result: Any, path: str, header: Optional[Dict[str, Any]] = None,
                   required_cols: Optional[Sequence[str]] = None) -> str:
    """
    Dispatch on the file extension: .csv takes a DataFrame, .json anything JSON-friendly.
    Tables are checked for `required_cols` before anything is written.
    """
    extension = os.path.splitext(path)[1].lower()
    if required_cols and isinstance(result, pd.DataFrame):
        validate_required_columns(result, list(required_cols), f"artifact {os.path.basename(path)}")
    if extension == ".csv":
        if not isinstance(result, pd.DataFrame):
            raise ValueError(f"CSV output needs a table, got {type(result).__name__}")
        return write_csv(result, path, header)
    if extension == ".json":
        if isinstance(result, pd.DataFrame):
            payload = {"rows": result.to_dict(orient="records")}
        elif hasattr(result, "model_dump"):
            payload = result.model_dump()
        else:
            payload = dict(result)
        payload.update({k: v for k, v in (header or {}).items() if k not in payload})
        return write_json(payload, path)
    logger.error(f"Unsupported output extension: {extension!r}")
    raise ValueError(f"output path must end in .csv or .json, got {path!r}")
