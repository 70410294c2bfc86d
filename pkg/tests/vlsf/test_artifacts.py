import json
import math
import os

import numpy as np
import pandas as pd
import pytest

from include.vlsf.artifacts import dumps, read_csv, read_csv_header, write_artifact, write_csv, write_text_atomic
from include.vlsf.helpers import (
    divisors_in_range,
    mean_interval,
    running_minimum,
    validate_feedback_pair,
    validate_required_columns,
    wilson_interval,
)
from include.vlsf.montecarlo import plan_chunks, run_chunks, substream


def sample_table():
    """Creating a small result table for writer tests."""
    return pd.DataFrame({"gamma_dec": [0.5, 1.5], "eps_bound": [0.1, 0.01]})


def test_atomic_write_leaves_no_temporary_files(tmp_path):
    """Only the target file remains after an atomic write."""
    path = write_text_atomic("hello\n", os.path.join(tmp_path, "nested", "out.txt"))
    assert open(path).read() == "hello\n"
    assert os.listdir(os.path.join(tmp_path, "nested")) == ["out.txt"]


def test_csv_header_round_trip(tmp_path):
    """Header entries are written as comment lines and skipped by the table reader."""
    path = write_csv(sample_table(), os.path.join(tmp_path, "t.csv"), {"provenance": {"seed": 3}})
    assert read_csv_header(path) == {"provenance": {"seed": 3}}
    pd.testing.assert_frame_equal(read_csv(path), sample_table())


def test_empty_table_is_not_written(tmp_path):
    """Writing an empty table is an error."""
    with pytest.raises(ValueError, match="Empty DataFrame"):
        write_csv(pd.DataFrame(), os.path.join(tmp_path, "empty.csv"))


def test_artifact_dispatch_on_extension(tmp_path):
    """Tables go to CSV, anything else to JSON; other extensions are rejected."""
    json_path = write_artifact(sample_table(), os.path.join(tmp_path, "t.json"), {"note": "x"})
    payload = json.load(open(json_path))
    assert payload["note"] == "x"
    assert len(payload["rows"]) == 2
    with pytest.raises(ValueError, match="CSV output needs a table"):
        write_artifact({"a": 1}, os.path.join(tmp_path, "t.csv"))
    with pytest.raises(ValueError, match="must end in .csv or .json"):
        write_artifact(sample_table(), os.path.join(tmp_path, "t.parquet"))


def test_dumps_is_deterministic_and_spells_out_infinity():
    """Keys are sorted and non-finite floats become strings."""
    text = dumps({"b": math.inf, "a": np.float64(0.5), "c": np.arange(2)})
    assert json.loads(text) == {"a": 0.5, "b": "inf", "c": [0, 1]}
    assert text.index('"a"') < text.index('"b"')


def test_substreams_are_reproducible_and_distinct():
    """The same key gives the same stream, different keys different streams."""
    assert substream(5, 1).random() == substream(5, 1).random()
    assert substream(5, 1).random() != substream(5, 2).random()
    with pytest.raises(ValueError, match="seed must be an integer"):
        substream(-1)


def test_plan_chunks():
    """Only the last chunk may be short."""
    assert plan_chunks(25, 10) == [(0, 10), (1, 10), (2, 5)]
    assert plan_chunks(20, 10) == [(0, 10), (1, 10)]
    with pytest.raises(ValueError, match="trials must be >= 1"):
        plan_chunks(0)


def test_run_chunks_keeps_task_order():
    """Results come back in task order with one or several workers."""
    assert run_chunks(abs, [-3, 1, -2]) == [3, 1, 2]
    assert run_chunks(abs, [-3, 1, -2], workers=2) == [3, 1, 2]


def test_wilson_interval_contains_estimate():
    """The Wilson interval brackets the proportion and stays inside [0, 1]."""
    lower, upper = wilson_interval(np.array([0, 50, 100]), 100, 1.96)
    assert lower[0] == pytest.approx(0.0, abs=1e-12) and upper[0] > 0.0
    assert lower[1] < 0.5 < upper[1]
    assert upper[2] == pytest.approx(1.0) and lower[2] < 1.0


def test_mean_interval():
    """Mean and CLT half-width from running sums."""
    x = np.array([1.0, 2.0, 3.0, 4.0])
    mean, half = mean_interval(x.sum(), np.square(x).sum(), 4, 2.0)
    assert mean == pytest.approx(2.5)
    assert half == pytest.approx(2.0 * x.std(ddof=1) / 2.0)


def test_divisors_and_running_minimum():
    """Divisor enumeration and the NaN-aware running minimum."""
    assert divisors_in_range(400, 8, 60) == [8, 10, 16, 20, 25, 40, 50]
    np.testing.assert_array_equal(running_minimum([3.0, np.nan, 2.0, 5.0]), [3.0, 3.0, 2.0, 2.0])


def test_validators():
    """Invalid feedback pairs and missing columns raise ValueError."""
    with pytest.raises(ValueError, match="must not exceed 1"):
        validate_feedback_pair(0.6, 0.6)
    with pytest.raises(ValueError, match="Missing required columns"):
        validate_required_columns(sample_table(), ["gamma_dec", "eps_ci"], "sweep")


def test_artifact_with_missing_columns_is_not_written(tmp_path):
    """A table lacking a required column is refused before any file appears."""
    path = os.path.join(tmp_path, "sweep.csv")
    with pytest.raises(ValueError, match="Missing required columns"):
        write_artifact(sample_table(), path, required_cols=["gamma_dec", "eps_ci"])
    assert not os.path.exists(path)
    write_artifact(sample_table(), path, required_cols=["gamma_dec", "eps_bound"])
    assert list(read_csv(path).columns) == ["gamma_dec", "eps_bound"]
