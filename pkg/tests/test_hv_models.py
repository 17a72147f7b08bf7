import inspect
import math

import numpy as np
import pytest

from spcelab.coincidence_analysis import (chsh_statistic, estimate_correlation, match_coincidences,
                                          station_marginals)
from spcelab.hv_models import (CALIBRATION_DELTAS, ContextualEventModel, ContextualStation,
                               DeterministicSharedSpaceModel, FactorizableModel, GeneratorSpec, LabeledSetting,
                               StationStream, calibrate_contextual, generate_pair_streams, sample_contextual_event,
                               sample_deterministic, sample_factorizable, sample_qt_oracle, spin_to_analyzer)
from spcelab.utils import CHUNK_PAIRS, ConfigError, UndefinedResponse, UnknownSetting


def _exact_chsh(model):
    return chsh_statistic(model.correlation("a", "b"), model.correlation("a", "b'"),
                          model.correlation("a'", "b"), model.correlation("a'", "b'"))


class TestStationStream:
    def test_rejects_bad_columns(self):
        with pytest.raises(ValueError):
            StationStream("A", [0, 1], [1, 0], [0.0, 1.0], np.array("a", dtype=object), np.array(0.0))
        with pytest.raises(ValueError):
            StationStream("A", [1, 0], [1, 1], [0.0, 1.0], np.array("a", dtype=object), np.array(0.0))
        with pytest.raises(ValueError):
            StationStream("C", [0], [1], [0.0], np.array("a", dtype=object), np.array(0.0))

    def test_records_are_read_only(self):
        a, _ = sample_qt_oracle(0.0, 0.0, 10, seed=1)
        with pytest.raises(ValueError):
            a.outcomes[0] = 1
        record = a[3]
        assert record.pair_id == 3 and record.station == "A" and record.setting_label == "a"


class TestQTOracle:
    def test_reproducible(self):
        first = sample_qt_oracle(0.0, 1.0, 1000, seed=42)
        second = sample_qt_oracle(0.0, 1.0, 1000, seed=42)
        assert first[0] == second[0] and first[1] == second[1]
        other = sample_qt_oracle(0.0, 1.0, 1000, seed=42, run=1)
        assert not np.array_equal(first[0].outcomes, other[0].outcomes)

    def test_independent_of_stream_length(self):
        """Records of a chunk do not depend on how many pairs follow it."""
        short_a, short_b = sample_qt_oracle(0.3, 1.2, CHUNK_PAIRS, seed=5)
        long_a, long_b = sample_qt_oracle(0.3, 1.2, CHUNK_PAIRS + 100, seed=5)
        np.testing.assert_array_equal(short_a.outcomes, long_a.outcomes[:CHUNK_PAIRS])
        np.testing.assert_array_equal(short_b.outcomes, long_b.outcomes[:CHUNK_PAIRS])

    def test_aligned_settings_anticorrelate(self):
        a, b = sample_qt_oracle(0.7, 0.7, 5000, seed=3)
        assert np.all(a.outcomes * b.outcomes == -1)

    def test_orthogonal_settings(self):
        n = 100_000
        a, b = sample_qt_oracle(0.0, math.pi / 2, n, seed=8)
        estimate = estimate_correlation(match_coincidences(a, b, None))
        assert abs(estimate.e_hat) <= 4 / math.sqrt(n)

    def test_sixty_degrees(self):
        a, b = sample_qt_oracle(0.0, math.pi / 3, 1_000_000, seed=13)
        estimate = estimate_correlation(match_coincidences(a, b, None))
        assert estimate.e_hat == pytest.approx(-0.5, abs=0.004)

    def test_uniform_marginals(self):
        n = 100_000
        a, b = sample_qt_oracle(0.0, 2.0, n, seed=21)
        for stream in (a, b):
            p, _ = station_marginals(stream)
            assert abs(p - 0.5) <= 4 * math.sqrt(0.25 / n)


class TestFactorizableModel:
    def test_single_cell_is_independent(self):
        model = FactorizableModel(weights=[1.0], p_a={"a": [0.5]}, p_b={"b": [0.5]})
        n = 100_000
        a, b = sample_factorizable(model, "a", "b", n, seed=4)
        estimate = estimate_correlation(match_coincidences(a, b, None))
        assert abs(estimate.e_hat) <= 4 / math.sqrt(n)

    def test_deterministic_cells(self):
        model = FactorizableModel(weights=[0.5, 0.5], p_a={"a": [1.0, 0.0]}, p_b={"b": [1.0, 0.0]})
        assert model.correlation("a", "b") == 1.0
        a, b = sample_factorizable(model, "a", "b", 2000, seed=4)
        assert np.all(a.outcomes == b.outcomes)

    def test_sampled_matches_exact(self):
        model = FactorizableModel.random(seed=17, n_labels=5)
        n = 200_000
        for x in ("a", "a'"):
            for y in ("b", "b'"):
                a, b = sample_factorizable(model, x, y, n, seed=2)
                estimate = estimate_correlation(match_coincidences(a, b, None))
                assert abs(estimate.e_hat - model.correlation(x, y)) <= 5 / math.sqrt(n)

    def test_random_models_obey_local_bound(self):
        for index in range(100):
            model = FactorizableModel.random(seed=1, index=index)
            assert _exact_chsh(model) <= 2.0 + 1e-12
            np.testing.assert_allclose(model.weights.sum(), 1.0, atol=1e-12)

    def test_validation(self):
        with pytest.raises(ConfigError):
            FactorizableModel(weights=[0.6, 0.6], p_a={"a": [1, 1]}, p_b={"b": [1, 1]})
        with pytest.raises(ConfigError):
            FactorizableModel(weights=[1.0], p_a={"a": [1.5]}, p_b={"b": [0.5]})
        with pytest.raises(ConfigError):
            FactorizableModel(weights=[0.5, 0.5], p_a={"a": [0.5]}, p_b={"b": [0.5, 0.5]})

    def test_unknown_setting(self):
        model = FactorizableModel.random(seed=1)
        with pytest.raises(UnknownSetting):
            sample_factorizable(model, "c", "b", 10, seed=0)


class TestDeterministicModel:
    def test_constant_responses(self):
        model = DeterministicSharedSpaceModel(weights=[1.0], responses_a={"a": [1]}, responses_b={"b": [-1]})
        a, b = sample_deterministic(model, "a", "b", 1234, seed=0)
        assert estimate_correlation(match_coincidences(a, b, None)).e_hat == -1.0

    def test_anti_copied_responses(self):
        table = [1, -1, -1, 1]
        model = DeterministicSharedSpaceModel(weights=[0.25] * 4, responses_a={"a": table},
                                              responses_b={"b": [-s for s in table]})
        assert model.correlation("a", "b") == -1.0
        a, b = sample_deterministic(model, "a", "b", 5000, seed=9)
        assert np.all(a.outcomes * b.outcomes == -1)

    def test_random_models_obey_local_bound(self):
        for index in range(100):
            assert _exact_chsh(DeterministicSharedSpaceModel.random(seed=2, index=index)) <= 2.0 + 1e-12

    def test_undefined_response(self):
        model = DeterministicSharedSpaceModel.random(seed=2)
        with pytest.raises(UndefinedResponse):
            model.correlation("a", "c")

    def test_rejects_non_sign_tables(self):
        with pytest.raises(ConfigError):
            DeterministicSharedSpaceModel(weights=[1.0], responses_a={"a": [0]}, responses_b={"b": [1]})


class TestContextualModel:
    def test_station_sees_only_local_inputs(self):
        parameters = list(inspect.signature(ContextualStation.respond).parameters)
        assert parameters == ["self", "particle_phase", "spin_setting", "rng"]

    def test_streams_record_spin_settings(self):
        model = ContextualEventModel()
        a, b = generate_pair_streams(GeneratorSpec("contextual", model), LabeledSetting("a", 0.3),
                                     LabeledSetting("b", 1.1), 1000, seed=4)
        np.testing.assert_array_equal(a.settings, 0.3)
        np.testing.assert_array_equal(b.settings, 1.1)
        phases = np.linspace(0.0, 2 * math.pi, 97)
        outcomes, _ = model.station().respond(phases, 1.1, np.random.default_rng(0))
        expected = np.where(np.cos(2 * (phases - spin_to_analyzer(1.1))) >= 0, 1, -1)
        np.testing.assert_array_equal(outcomes, expected)

    def test_equal_analyzers_anticorrelate(self):
        model = ContextualEventModel(d=4.0)
        a, b = sample_contextual_event(model, 0.4, 0.4, 20_000, seed=1)
        assert np.all(a.outcomes * b.outcomes == -1)

    def test_time_tags(self):
        model = ContextualEventModel(t0=2.0, d=2.0, pair_spacing=50.0)
        a, b = sample_contextual_event(model, 0.0, 0.3, 5000, seed=6)
        for stream in (a, b):
            delays = stream.time_tags - stream.pair_ids * 50.0
            assert np.all(delays >= 0.0) and np.all(delays <= 2.0)
            assert np.all(np.diff(stream.time_tags) > 0)

    def test_unwindowed_statistics_are_linear(self):
        """Without selection the model yields -(1 - 2Δ/π) for spin difference Δ."""
        model = ContextualEventModel(d=2.0)
        n = 200_000
        for delta in (math.pi / 6, math.pi / 3, math.pi / 2, 5 * math.pi / 6):
            a, b = sample_contextual_event(model, 0.0, delta, n, seed=12)
            estimate = estimate_correlation(match_coincidences(a, b, None))
            assert estimate.e_hat == pytest.approx(-(1 - 2 * delta / math.pi), abs=5 * estimate.std_error + 1e-3)

    def test_constant_delays_obey_local_bound(self, chsh_settings):
        spec = GeneratorSpec("contextual", ContextualEventModel(d=0.0))
        estimates = []
        for run, (x, y) in enumerate(((0, 2), (0, 3), (1, 2), (1, 3))):
            streams = generate_pair_streams(spec, chsh_settings[x], chsh_settings[y], 50_000, seed=31, run=run)
            estimates.append(estimate_correlation(match_coincidences(*streams, None)))
        s = chsh_statistic(*(e.e_hat for e in estimates))
        sigma = math.sqrt(sum(e.std_error ** 2 for e in estimates))
        assert s <= 2.0 + 5 * sigma

    def test_window_discards_slow_events(self):
        model = ContextualEventModel(d=4.0)
        a, b = sample_contextual_event(model, 0.0, math.pi / 4, 50_000, seed=2)
        wide = len(match_coincidences(a, b, 0.1))
        narrow = len(match_coincidences(a, b, 0.01))
        assert narrow < wide < 50_000

    def test_validation(self):
        with pytest.raises(ConfigError):
            ContextualEventModel(t0=0.0)
        with pytest.raises(ConfigError):
            ContextualEventModel(d=-1.0)
        with pytest.raises(ConfigError):
            ContextualEventModel(t0=5.0, pair_spacing=5.0)


class TestGeneratorSpec:
    def test_model_must_match_kind(self):
        with pytest.raises(ConfigError):
            GeneratorSpec("factorizable")
        with pytest.raises(ConfigError):
            GeneratorSpec("qt", ContextualEventModel())
        with pytest.raises(ConfigError):
            GeneratorSpec("bohmian")

    def test_labels_and_angles_are_recorded(self):
        a, b = generate_pair_streams(GeneratorSpec("qt"), LabeledSetting.from_degrees("a'", 90.0),
                                     LabeledSetting("b", 0.25), 10, seed=0)
        assert set(a.setting_labels) == {"a'"} and set(b.setting_labels) == {"b"}
        np.testing.assert_allclose(a.settings, math.pi / 2)
        np.testing.assert_allclose(b.settings, 0.25)


class TestCalibration:
    def test_report_layout(self):
        report = calibrate_contextual(ContextualEventModel(), [0.0, 2.0], [0.01, None], n_pairs=2000, seed=3,
                                      deltas=CALIBRATION_DELTAS[::4], simultaneous_jobs=2)
        assert len(report.cells) == 4
        assert [c.exponent for c in report.cells] == [0.0, 0.0, 2.0, 2.0]
        assert [c.window for c in report.cells] == [0.01, None, 0.01, None]
        assert all(len(c.deviations) == 4 for c in report.cells)
        assert report.best.max_deviation == min(c.max_deviation for c in report.cells)
        table = report.to_dict()
        assert table["cells"][1]["window"] == "unwindowed"
        # the unwindowed row keeps every pair
        assert report.cells[1].coincidence_fraction == 1.0

    def test_constant_delays_never_beat_the_best_cell(self):
        report = calibrate_contextual(ContextualEventModel(), [0.0, 2.0, 4.0], [0.01], n_pairs=100_000, seed=4)
        (constant,) = report.row(0.0)
        assert constant.max_deviation >= report.best.max_deviation
        assert constant.max_deviation > 0.15

    def test_empty_grid(self):
        with pytest.raises(ConfigError):
            calibrate_contextual(ContextualEventModel(), [], [0.01], n_pairs=10, seed=0)
