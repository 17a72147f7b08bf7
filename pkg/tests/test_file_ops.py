import math

import numpy as np
import pytest

from spcelab.coincidence_analysis import CHSH_KEYS, CorrelationEstimate, assemble_chsh
from spcelab.file_ops import (EVENT_LOG_HEADER, EventLog, config_hash, emit_report, read_csv_column,
                              read_event_log, read_msgpack, read_report, write_event_log, write_msgpack,
                              write_plot_csv, write_series_csv)
from spcelab.hv_models import ContextualEventModel, sample_contextual_event, sample_qt_oracle
from spcelab.utils import DataError

HEADER = ",".join(EVENT_LOG_HEADER)


def _write(path, *rows):
    path.write_text("\n".join((HEADER,) + rows) + "\n")
    return path


class TestEventLog:
    def test_round_trip(self, tmp_path):
        streams = sample_contextual_event(ContextualEventModel(), 0.1, 0.7, 500, seed=3, labels=("a'", "b"))
        path = tmp_path / "nested" / "events.csv"
        write_event_log(path, EventLog(*streams))
        log = read_event_log(path)
        assert log.stream_a == streams[0] and log.stream_b == streams[1]
        assert len(log) == 1000

    def test_rows_are_sorted_by_station_then_pair(self, tmp_path):
        path = tmp_path / "events.csv"
        write_event_log(path, EventLog(*sample_qt_oracle(0.0, 1.0, 3, seed=0)))
        lines = path.read_text().splitlines()
        assert lines[0] == HEADER
        assert [line.split(",")[:2] for line in lines[1:]] == [
            ["0", "A"], ["1", "A"], ["2", "A"], ["0", "B"], ["1", "B"], ["2", "B"]]

    def test_header_only(self, tmp_path):
        log = read_event_log(_write(tmp_path / "events.csv"))
        assert len(log) == 0

    def test_bad_outcome_names_its_line(self, tmp_path):
        path = _write(tmp_path / "events.csv", "0,A,a,0.0,1,0.5", "1,A,a,0.0,2,1000.5")
        with pytest.raises(DataError) as info:
            read_event_log(path)
        assert info.value.line == 3
        assert "line 3" in str(info.value)

    @pytest.mark.parametrize("row", [
        "0,A,a,0.0,1",
        "x,A,a,0.0,1,0.5",
        "0,C,a,0.0,1,0.5",
        "0,A,a,zero,1,0.5",
        "0,A,a,0.0,1,inf",
    ])
    def test_malformed_rows(self, tmp_path, row):
        with pytest.raises(DataError) as info:
            read_event_log(_write(tmp_path / "events.csv", row))
        assert info.value.line == 2

    def test_unsorted_rows(self, tmp_path):
        path = _write(tmp_path / "events.csv", "1,A,a,0.0,1,1000.5", "0,A,a,0.0,1,0.5")
        with pytest.raises(DataError):
            read_event_log(path)

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "events.csv"
        path.write_text("pair_id,station\n")
        with pytest.raises(DataError) as info:
            read_event_log(path)
        assert info.value.line == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_event_log(tmp_path / "nothing.csv")


class TestCsv:
    def test_series_round_trip(self, tmp_path):
        values = np.random.default_rng(0).normal(size=50)
        path = tmp_path / "series.csv"
        write_series_csv(path, values)
        np.testing.assert_array_equal(read_csv_column(path), values)
        np.testing.assert_array_equal(read_csv_column(path, "z"), values)

    def test_column_selection(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("t,z\n0,1.5\n1,2.5\n")
        np.testing.assert_array_equal(read_csv_column(path, "z"), [1.5, 2.5])
        with pytest.raises(DataError):
            read_csv_column(path)
        with pytest.raises(DataError):
            read_csv_column(path, "y")

    def test_bad_value(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("z\n1.0\nabc\n")
        with pytest.raises(DataError) as info:
            read_csv_column(path)
        assert info.value.line == 3

    def test_plot_csv(self, tmp_path):
        path = tmp_path / "plots" / "acf.csv"
        write_plot_csv(path, [0, 1], [1.0, 0.5], -0.1, 0.1)
        assert path.read_text().splitlines() == ["x,y,band_lo,band_hi", "0.0,1.0,-0.1,0.1", "1.0,0.5,-0.1,0.1"]
        with pytest.raises(ValueError):
            write_plot_csv(path, [0, 1], [1.0])
        with pytest.raises(ValueError):
            write_plot_csv(path, [0, 1], [1.0, 0.5], band_lo=[0.0, 0.0])


class TestReports:
    def test_identical_inputs_give_identical_bytes(self, tmp_path):
        echo = {"kind": "chsh", "seed": 1, "model": {"kind": "qt"}}
        results = {"S": 2.8284, "estimates": {"ab": {"e_hat": -0.7}}, "grid": np.array([0.5, 1.0])}
        first = emit_report(results, tmp_path / "one" / "report.json", echo)
        emit_report(results, tmp_path / "two" / "report.json", echo)
        assert (tmp_path / "one" / "report.json").read_bytes() == (tmp_path / "two" / "report.json").read_bytes()
        assert first["config_hash"] == config_hash(echo)
        assert "wall_time" not in first

    def test_layout(self, tmp_path):
        path = tmp_path / "report.json"
        emit_report({"value": math.pi}, path, {"kind": "scan", "seed": 0}, wall_time=1.5)
        document = read_report(path)
        assert document["schema"] == 1
        assert document["version"] == "v0.1.0"
        assert document["results"]["value"] == math.pi
        assert document["wall_time"] == 1.5
        assert path.read_bytes().endswith(b"\n")

    def test_non_finite_values_are_labelled(self, tmp_path):
        estimates = {key: CorrelationEstimate(e_hat=e, n_matched=50, std_error=0.0)
                     for key, e in zip(CHSH_KEYS, (-1.0, 1.0, -1.0, -1.0))}
        result = assemble_chsh(estimates)
        assert result.violation_sigmas == math.inf
        results = {"violation_sigmas": result.violation_sigmas, "deviations": [0.01, -math.inf],
                   "acf": np.array([1.0, math.nan]), "finite": np.array([0.5])}
        path = tmp_path / "report.json"
        emit_report(results, path, {"kind": "chsh", "seed": 0})
        assert b"null" not in path.read_bytes()
        written = read_report(path)["results"]
        assert written == {"violation_sigmas": "inf", "deviations": [0.01, "-inf"], "acf": [1.0, "nan"],
                           "finite": [0.5]}

    def test_hash_ignores_key_order(self):

        assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})
        assert config_hash({"a": 1}) != config_hash({"a": 2})

    def test_read_rejects_other_documents(self, tmp_path):
        path = tmp_path / "report.json"
        path.write_text('{"schema": 2}')
        with pytest.raises(DataError):
            read_report(path)
        path.write_text("not json")
        with pytest.raises(DataError):
            read_report(path)


class TestMsgpack:
    def test_round_trip(self, tmp_path):
        data = [{"seed": 1, "cells": [{"window": "unwindowed", "max_deviation": 0.25}]}]
        path = tmp_path / "store" / "calibration.msgpack"
        write_msgpack(path, data)
        assert read_msgpack(path) == data

    def test_corrupted(self, tmp_path):
        path = tmp_path / "calibration.msgpack"
        path.write_bytes(b"\xc1\xc1\xc1")
        with pytest.raises(DataError):
            read_msgpack(path)
