import math
import os

import numpy as np
import pytest

from eigentask.persist import (FormatError, atomic_write, config_hash, fmt, read_csv, read_features,
                               read_records, read_spectrum, write_csv, write_features,
                               write_records, write_spectrum)
from eigentask.quantum import circuit_map, random_circuit_encoding
from eigentask.sampling import InputEnsemble, sample_features
from eigentask.spectral import estimate_moments, solve_nsr


def test_fmt_round_trip():
    for v in (0.1, 1 / 3, 1e-300, 12345.678):
        assert float(fmt(v)) == v
    assert fmt(math.inf) == "inf" and fmt(True) == "1" and fmt(np.int64(4)) == "4"


def test_config_hash_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_csv_header_and_notes(tmp_path):
    p = tmp_path / "t.csv"
    write_csv(p, ["a", "b"], [[1, 2.5]], "abc", notes=["sorted"])
    header, rows, comments = read_csv(p)
    assert header == ["a", "b"] and rows == [["1", "2.5"]]
    assert comments[0].endswith("config=abc") and comments[1] == "# note: sorted"


def test_empty_file(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    with pytest.raises(FormatError, match="no rows"):
        read_csv(p)


def test_atomic_write_leaves_no_temp(tmp_path):
    p = tmp_path / "sub" / "x.txt"
    atomic_write(p, "hello")
    assert p.read_text() == "hello"
    assert os.listdir(p.parent) == ["x.txt"]


def test_features_round_trip(tmp_path):
    ens = InputEnsemble.iid_uniform(15, 2)
    x = circuit_map(random_circuit_encoding(2, 0)).tabulate(ens)
    fm, recs = sample_features(x, ens, 9, 1, keep_records=True)
    write_features(tmp_path / "f.csv", fm)
    back = read_features(tmp_path / "f.csv")
    np.testing.assert_array_equal(back.data, fm.data)
    np.testing.assert_array_equal(back.ensemble.values, ens.values)
    assert back.shots == 9 and back.model == fm.model
    write_records(tmp_path / "r.jsonl", recs)
    again = read_records(tmp_path / "r.jsonl")
    assert len(again) == len(recs)
    np.testing.assert_array_equal(again[3].outcomes, recs[3].outcomes)


def test_bad_features(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text("u,Y0\n0.1,1\n")
    with pytest.raises(FormatError, match="header"):
        read_features(p)
    p.write_text("u,X0\n0.1,abc\n")
    with pytest.raises(FormatError, match="non-numeric"):
        read_features(p)


def test_spectrum_round_trip(tmp_path):
    ens = InputEnsemble.iid_uniform(100, 3)
    x = circuit_map(random_circuit_encoding(2, 5)).tabulate(ens)
    fm, _ = sample_features(x, ens, 30, 2)
    spec = solve_nsr(estimate_moments(fm))
    write_spectrum(tmp_path / "s.csv", spec)
    back = read_spectrum(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.beta2, spec.beta2)
    np.testing.assert_array_equal(back.r, spec.r)
    assert back.rank_G == spec.rank_G and back.shots == 30
