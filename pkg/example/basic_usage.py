import logging
import math

import spcelab as spl
from spcelab.hv_models import CALIBRATION_DELTAS

logging.getLogger("spcelab").setLevel(logging.DEBUG)  # default level for the logger is INFO

settings = [spl.LabeledSetting.from_degrees(label, deg)
            for label, deg in (("a", 0), ("a'", 90), ("b", 45), ("b'", 135))]

if __name__ == '__main__':
    # the nonlocal reference sampler violates the bound at the standard quadruple
    qt = spl.run_chsh_experiment(spl.GeneratorSpec("qt"), settings, n_pairs=100_000, window=None, seed=7)
    print(f"QT oracle: S = {qt.S:.4f} ± {qt.S_std_error:.4f}")

    # a random factorizable model never does
    model = spl.FactorizableModel.random(seed=7)
    local = spl.run_chsh_experiment(spl.GeneratorSpec("factorizable", model), settings, 100_000, None, seed=7)
    print(f"Factorizable model: S = {local.S:.4f}")

    # the contextual model gets close to -cos Δ once pairs are selected by a coincidence window
    contextual = spl.ContextualEventModel(d=2.0)
    calibration = spl.calibrate_contextual(contextual, exponents=[0.0, 2.0], windows=[0.002, 0.01, "unwindowed"],
                                           n_pairs=50_000, seed=11)
    best = calibration.best
    print(f"Best cell: d = {best.exponent}, W = {best.window}, max |Ê + cos Δ| = {best.max_deviation:.4f}")

    points = spl.scan_correlation(spl.GeneratorSpec("contextual", contextual), CALIBRATION_DELTAS,
                                  n_pairs=50_000, window=best.window, seed=3)
    for point in points:
        print(f"Δ = {math.degrees(point.delta):6.1f}°  Ê = {point.estimate.e_hat:+.4f}  "
              f"-cos Δ = {point.expected:+.4f}")
