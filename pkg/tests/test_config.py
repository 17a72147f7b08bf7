import math

import orjson
import pytest

from spcelab.config import ExperimentConfig, merge_config
from spcelab.hv_models import DEFAULT_WINDOW
from spcelab.utils import ConfigError


class TestExperimentConfig:
    def test_defaults(self):
        config = ExperimentConfig.from_dict({"kind": "chsh", "seed": 1})
        assert config.model.kind == "qt"
        assert config.window is None
        assert config.angles_deg == pytest.approx((0.0, 90.0, 45.0, 135.0))
        assert [s.label for s in config.settings()] == ["a", "a'", "b", "b'"]
        assert len(config.scan_deltas) == 13

    def test_contextual_default_window(self):
        config = ExperimentConfig.from_dict({"kind": "chsh", "seed": 1, "model": {"kind": "contextual"}})
        assert config.window == DEFAULT_WINDOW
        explicit = ExperimentConfig.from_dict({"kind": "chsh", "seed": 1, "window": "unwindowed",
                                               "model": {"kind": "contextual"}})
        assert explicit.window is None

    def test_seed_is_required(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"kind": "chsh"})

    @pytest.mark.parametrize("raw", [
        {"kind": "dance", "seed": 1},
        {"kind": "chsh", "seed": 1, "colour": "red"},
        {"kind": "chsh", "seed": 1, "model": {"kind": "qt", "depth": 3}},
        {"kind": "chsh", "seed": -1},
        {"kind": "chsh", "seed": 1, "angles": [0, 90, 45]},
        {"kind": "chsh", "seed": 1, "window": -0.1},
        {"kind": "chsh", "seed": 1, "n_pairs": 0},
        {"kind": "chsh", "seed": 1, "model": {"kind": "contextual", "t0": 2.0, "pair_spacing": 1.0}},
        {"kind": "purity", "seed": 1},
        {"kind": "purity", "seed": 1, "purity": {"input": "x.csv", "splits": 1}},
        {"kind": "timeseries", "seed": 1},
        {"kind": "timeseries", "seed": 1, "timeseries": {"simulate": {"coefficients": [1.1]}}},
        {"kind": "calibrate", "seed": 1},
    ])
    def test_rejects_invalid(self, raw):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict(raw)

    def test_scan_grid(self):
        config = ExperimentConfig.from_dict({"kind": "scan", "seed": 0, "scan": {"deltas": "0:90:4"}})
        assert config.scan_deltas == pytest.approx(tuple(math.radians(d) for d in (0, 30, 60, 90)))
        listed = ExperimentConfig.from_dict({"kind": "scan", "seed": 0, "scan": {"deltas": [10, 20]}})
        assert listed.scan_deltas == pytest.approx((math.radians(10), math.radians(20)))

    def test_calibrate_windows(self):
        config = ExperimentConfig.from_dict({"kind": "calibrate", "seed": 0, "model": {"kind": "contextual"},
                                             "calibrate": {"windows": [0.01, "unwindowed"], "exponents": [2]}})
        assert config.calibrate.windows == (0.01, None)
        assert config.echo()["calibrate"]["windows"] == [0.01, "unwindowed"]

    def test_echo_is_stable(self):
        raw = {"kind": "chsh", "seed": 5, "n_pairs": 1000, "simultaneous_jobs": 8}
        first = ExperimentConfig.from_dict(raw).echo()
        second = ExperimentConfig.from_dict({**raw, "simultaneous_jobs": 1}).echo()
        assert first == second
        assert first["window"] == "unwindowed"
        assert "simultaneous_jobs" not in first


class TestConfigFile:
    def test_overrides_win(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_bytes(orjson.dumps({"kind": "chsh", "seed": 1, "n_pairs": 10, "model": {"kind": "contextual",
                                                                                             "d": 4.0}}))
        config = ExperimentConfig.from_file(path, {"seed": 2, "model": {"t0": 0.5}})
        assert config.seed == 2 and config.n_pairs == 10
        assert config.model.d == 4.0 and config.model.t0 == 0.5

    def test_missing_and_malformed(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(bad)
        listed = tmp_path / "list.json"
        listed.write_text("[1, 2]")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(listed)


def test_merge_config():
    merged = merge_config({"a": 1, "model": {"kind": "qt", "d": 2}}, {"model": {"d": 4}, "b": 2})
    assert merged == {"a": 1, "b": 2, "model": {"kind": "qt", "d": 4}}
