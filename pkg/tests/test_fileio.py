import math

import numpy as np
import pytest

from urban_subdivide.errors import MissingPropertyError
from urban_subdivide.fileio import (
    fmt_value,
    read_csv_strict,
    read_json,
    sha256_file,
    write_csv,
    write_json,
)


def test_fmt_value_floats_round_trip():
    for v in (0.1, 1 / 3, 1e-17, -2.5e300, 123456.789):
        assert float(fmt_value(v)) == v


def test_fmt_value_none_and_ints():
    assert fmt_value(None) == ""
    assert fmt_value(5) == "5"
    assert fmt_value(np.float64(0.25)) == "0.25"
    assert fmt_value(np.int64(7)) == "7"


def test_write_csv_deterministic_bytes(tmp_path):
    rows = [("a", 1.5), ("b", float(1 / 3))]
    p1 = tmp_path / "one.csv"
    p2 = tmp_path / "two.csv"
    write_csv(p1, ("id", "x"), rows)
    write_csv(p2, ("id", "x"), rows)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_bytes().endswith(b"\n")
    assert b"\r" not in p1.read_bytes()


def test_read_csv_strict_header_mismatch(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("id,wrong\na,1\n")
    with pytest.raises(MissingPropertyError):
        read_csv_strict(p, ("id", "x"))


def test_csv_round_trip(tmp_path):
    p = tmp_path / "rt.csv"
    write_csv(p, ("id", "x"), [("a", 1 / 3), ("b", None)])
    rows = read_csv_strict(p, ("id", "x"))
    assert rows[0]["x"] == repr(1 / 3)
    assert rows[1]["x"] == ""


def test_write_json_rejects_nan(tmp_path):
    with pytest.raises(ValueError):
        write_json(tmp_path / "bad.json", {"x": math.nan})


def test_json_round_trip_and_hash(tmp_path):
    p = tmp_path / "doc.json"
    write_json(p, {"b": 2, "a": [1, 2.5]})
    assert read_json(p) == {"b": 2, "a": [1, 2.5]}
    assert p.read_text().endswith("\n")
    assert len(sha256_file(p)) == 64
