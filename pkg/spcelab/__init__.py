# -*- coding: utf-8 -*-
"""
Monte Carlo lab for spin polarization correlation experiments.
"""

from typing import Tuple

from .coincidence_analysis import (CoincidenceWindow, match_coincidences, estimate_correlation, chsh_statistic,
                                   run_chsh_experiment, scan_correlation)
from .config import ExperimentConfig
from .hv_models import (FactorizableModel, DeterministicSharedSpaceModel, ContextualEventModel, GeneratorSpec,
                        LabeledSetting, StationStream, calibrate_contextual)
from .manager import ExperimentManager
from .purity_tests import BinarySequence, count_runs, runs_test, mann_whitney_u, split_sample_purity
from .quantum_predictions import AnalyzerSetting, AngularSmearing, singlet_correlation, smeared_correlation
from .timeseries import ARModel, acf, pacf, simulate_ar, fit_ar, select_order, theoretical_acf
from .utils import SpceLabError, ConfigError, DataError

# Version information
from . import version

# Define what will be imported with `from spcelab import *`
__all__: Tuple[str, ...] = (
    "AnalyzerSetting",
    "AngularSmearing",
    "singlet_correlation",
    "smeared_correlation",
    "FactorizableModel",
    "DeterministicSharedSpaceModel",
    "ContextualEventModel",
    "GeneratorSpec",
    "LabeledSetting",
    "StationStream",
    "calibrate_contextual",
    "CoincidenceWindow",
    "match_coincidences",
    "estimate_correlation",
    "chsh_statistic",
    "run_chsh_experiment",
    "scan_correlation",
    "BinarySequence",
    "count_runs",
    "runs_test",
    "mann_whitney_u",
    "split_sample_purity",
    "ARModel",
    "acf",
    "pacf",
    "simulate_ar",
    "fit_ar",
    "select_order",
    "theoretical_acf",
    "ExperimentConfig",
    "ExperimentManager",
    "SpceLabError",
    "ConfigError",
    "DataError",
    "__version__",
)

__version__ = version.__version__


def __dir__() -> Tuple[str, ...]:
    return list(__all__) + ["__doc__"]
