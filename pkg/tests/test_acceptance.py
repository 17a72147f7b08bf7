import pytest

from spcelab.coincidence_analysis import chsh_statistic, run_chsh_experiment, scan_correlation
from spcelab.hv_models import (CALIBRATION_DELTAS, DEFAULT_DELAY_EXPONENT, DEFAULT_WINDOW, ContextualEventModel,
                               DeterministicSharedSpaceModel, FactorizableModel, GeneratorSpec,
                               calibrate_contextual)
from spcelab.timeseries import reproduce_ar2_experiment

pytestmark = pytest.mark.slow


def _exact_chsh(model):
    e = model.correlation
    return chsh_statistic(e("a", "b"), e("a", "b'"), e("a'", "b"), e("a'", "b'"))


def test_qt_oracle_follows_the_singlet_curve():
    points = scan_correlation(GeneratorSpec("qt"), CALIBRATION_DELTAS, 100_000, None, seed=11)
    for point in points:
        assert abs(point.deviation) <= 4 * point.estimate.std_error + 1e-12


@pytest.mark.parametrize("model_class", [FactorizableModel, DeterministicSharedSpaceModel])
def test_local_models_respect_the_chsh_bound(chsh_settings, model_class):
    kind = "factorizable" if model_class is FactorizableModel else "deterministic"
    for index in range(100):
        model = model_class.random(seed=2024, index=index)
        assert abs(_exact_chsh(model)) <= 2.0 + 1e-12
        result = run_chsh_experiment(GeneratorSpec(kind, model), chsh_settings, 20_000, None, seed=index)
        assert result.S <= 2.0 + 5 * result.S_std_error


def test_contextual_model_calibrates_to_the_singlet_curve():
    report = calibrate_contextual(ContextualEventModel(), exponents=(0.0, 2.0, 4.0), windows=(DEFAULT_WINDOW,),
                                  n_pairs=200_000, seed=31)
    assert report.best.exponent == DEFAULT_DELAY_EXPONENT

    check = calibrate_contextual(ContextualEventModel(), exponents=(DEFAULT_DELAY_EXPONENT,),
                                 windows=(DEFAULT_WINDOW,), n_pairs=1_000_000, seed=32, deltas=CALIBRATION_DELTAS)
    assert len(check.best.deviations) == 13
    assert check.best.max_deviation <= 0.05


def test_contextual_model_violates_the_chsh_bound(chsh_settings):
    spec = GeneratorSpec("contextual", ContextualEventModel())
    result = run_chsh_experiment(spec, chsh_settings, 1_000_000, DEFAULT_WINDOW, seed=41)
    assert result.S > 2.4
    unwindowed = run_chsh_experiment(spec, chsh_settings, 200_000, None, seed=41)
    assert unwindowed.S <= 2.0 + 5 * unwindowed.S_std_error


def test_ar2_reproduction():
    report = reproduce_ar2_experiment(n_runs=100, seed=0)
    assert report.order_hits >= 90
    assert report.within_radius >= 0.95 * report.eligible
    assert report.reference_inside_band
