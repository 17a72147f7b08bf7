import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import orjson

from .coincidence_analysis import CoincidenceWindow, UNWINDOWED
from .hv_models import (ContextualEventModel, DEFAULT_DELAY_EXPONENT, DEFAULT_PAIR_SPACING, DEFAULT_T0,
                        DEFAULT_WINDOW, DeterministicSharedSpaceModel, FactorizableModel, GENERATOR_KINDS,
                        GeneratorSpec, LabeledSetting)
from .parallel import DEFAULT_SIMULTANEOUS_JOBS
from .timeseries import ARModel, DEFAULT_BURN_IN
from .utils import ConfigError, parse_degree_grid

EXPERIMENT_KINDS = ("simulate", "chsh", "scan", "purity", "timeseries", "calibrate")
CHSH_LABELS = ("a", "a'", "b", "b'")
DEFAULT_ANGLES_DEG = (0.0, 90.0, 45.0, 135.0)
DEFAULT_SCAN_GRID = "0:180:13"
DEFAULT_EXPONENTS = (0.0, 2.0, 4.0)
DEFAULT_WINDOWS = (0.001, 0.002, 0.005, 0.01, 0.1, UNWINDOWED)


def _check_keys(raw: Mapping[str, Any], allowed: Tuple[str, ...], section: str) -> None:
    if not isinstance(raw, Mapping):
        raise ConfigError(f"Section {section!r} must be an object, got {type(raw).__name__}")
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"Unknown key(s) in {section}: {', '.join(unknown)}")


def _number(value: Any, name: str, minimum: Optional[float] = None, strict: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{name} must be finite, got {value}")
    if minimum is not None and (value <= minimum if strict else value < minimum):
        raise ConfigError(f"{name} must be {'>' if strict else '>='} {minimum}, got {value}")
    return value


def _integer(value: Any, name: str, minimum: int = 0) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def _optional_path(value: Any, name: str) -> Optional[Path]:
    if value is None:
        return None
    if not isinstance(value, str) or not value:
        raise ConfigError(f"{name} must be a path string, got {value!r}")
    return Path(value)


def _degrees(value: Any, name: str) -> Tuple[float, ...]:
    """Degree list from a JSON list, a comma list or a start:stop:count grid."""
    if isinstance(value, str):
        return tuple(math.degrees(r) for r in parse_degree_grid(value))
    if isinstance(value, (list, tuple)) and value:
        return tuple(_number(v, name) for v in value)
    raise ConfigError(f"{name} must be a nonempty list of degrees, got {value!r}")


def _window(value: Any) -> Optional[float]:
    if isinstance(value, bool):
        raise ConfigError(f"window must be a number or {UNWINDOWED!r}, got {value!r}")
    return CoincidenceWindow.coerce(value).width


@dataclass(frozen=True)
class ModelConfig:
    """
    Which pair generator to run and with what parameters.

    Random hidden-variable models are drawn from ``model_seed`` (defaults to
    the experiment seed) and ``model_index``.
    """
    kind: str = "qt"
    t0: float = DEFAULT_T0
    d: float = DEFAULT_DELAY_EXPONENT
    pair_spacing: float = DEFAULT_PAIR_SPACING
    n_labels: Optional[int] = None
    model_seed: Optional[int] = None
    model_index: int = 0

    KEYS = ("kind", "t0", "d", "pair_spacing", "n_labels", "model_seed", "model_index")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ModelConfig":
        _check_keys(raw, cls.KEYS, "model")
        kind = raw.get("kind", "qt")
        if kind not in GENERATOR_KINDS:
            raise ConfigError(f"Unknown model kind {kind!r}, expected one of {GENERATOR_KINDS}")
        config = cls(
            kind=kind,
            t0=_number(raw.get("t0", DEFAULT_T0), "model.t0", 0.0, strict=True),
            d=_number(raw.get("d", DEFAULT_DELAY_EXPONENT), "model.d", 0.0),
            pair_spacing=_number(raw.get("pair_spacing", DEFAULT_PAIR_SPACING), "model.pair_spacing", 0.0, strict=True),
            n_labels=None if raw.get("n_labels") is None else _integer(raw["n_labels"], "model.n_labels", 1),
            model_seed=None if raw.get("model_seed") is None else _integer(raw["model_seed"], "model.model_seed"),
            model_index=_integer(raw.get("model_index", 0), "model.model_index"),
        )
        if config.pair_spacing <= config.t0:
            raise ConfigError("model.pair_spacing must exceed model.t0")
        return config

    def build(self, seed: int, labels_a: Tuple[str, ...] = ("a", "a'"),
              labels_b: Tuple[str, ...] = ("b", "b'")) -> GeneratorSpec:
        model_seed = seed if self.model_seed is None else self.model_seed
        if self.kind == "qt":
            return GeneratorSpec("qt")
        if self.kind == "factorizable":
            model = FactorizableModel.random(model_seed, self.n_labels or 4, labels_a, labels_b, self.model_index)
            return GeneratorSpec("factorizable", model)
        if self.kind == "deterministic":
            model = DeterministicSharedSpaceModel.random(model_seed, self.n_labels or 8, labels_a, labels_b,
                                                         self.model_index)
            return GeneratorSpec("deterministic", model)
        return GeneratorSpec("contextual", ContextualEventModel(t0=self.t0, d=self.d, pair_spacing=self.pair_spacing,
                                                                rng_seed=seed))


@dataclass(frozen=True)
class ARSimulation:
    coefficients: Tuple[float, ...] = (0.25, 0.5)
    n: int = 500
    noise_variance: float = 1.0
    burn_in: int = DEFAULT_BURN_IN

    KEYS = ("coefficients", "n", "noise_variance", "burn_in")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ARSimulation":
        _check_keys(raw, cls.KEYS, "timeseries.simulate")
        coefficients = raw.get("coefficients", [0.25, 0.5])
        if not isinstance(coefficients, (list, tuple)):
            raise ConfigError(f"timeseries.simulate.coefficients must be a list, got {coefficients!r}")
        section = cls(
            coefficients=tuple(_number(c, "timeseries.simulate.coefficients") for c in coefficients),
            n=_integer(raw.get("n", 500), "timeseries.simulate.n", 1),
            noise_variance=_number(raw.get("noise_variance", 1.0), "timeseries.simulate.noise_variance", 0.0,
                                   strict=True),
            burn_in=_integer(raw.get("burn_in", DEFAULT_BURN_IN), "timeseries.simulate.burn_in"),
        )
        section.model()
        return section

    def model(self) -> ARModel:
        return ARModel(self.coefficients, self.noise_variance)


@dataclass(frozen=True)
class PuritySection:
    input: Optional[Path] = None
    column: Optional[str] = None
    event_log: Optional[Path] = None
    station: str = "A"
    splits: int = 2
    alpha: float = 0.05

    KEYS = ("input", "column", "event_log", "station", "splits", "alpha")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "PuritySection":
        _check_keys(raw, cls.KEYS, "purity")
        section = cls(
            input=_optional_path(raw.get("input"), "purity.input"),
            column=raw.get("column"),
            event_log=_optional_path(raw.get("event_log"), "purity.event_log"),
            station=raw.get("station", "A"),
            splits=_integer(raw.get("splits", 2), "purity.splits", 2),
            alpha=_number(raw.get("alpha", 0.05), "purity.alpha", 0.0, strict=True),
        )
        if not section.alpha < 1:
            raise ConfigError(f"purity.alpha must be below 1, got {section.alpha}")
        if section.station not in ("A", "B"):
            raise ConfigError(f"purity.station must be 'A' or 'B', got {section.station!r}")
        if section.column is not None and not isinstance(section.column, str):
            raise ConfigError(f"purity.column must be a string, got {section.column!r}")
        return section

    def validate_for_run(self) -> None:
        if (self.input is None) == (self.event_log is None):
            raise ConfigError("purity needs exactly one of input (CSV column) or event_log")


@dataclass(frozen=True)
class TimeSeriesSection:
    input: Optional[Path] = None
    column: Optional[str] = None
    maxlag: int = 20
    fit: Optional[int] = None
    bins: Union[int, str] = "auto"
    simulate: Optional[ARSimulation] = None
    reproduce: int = 0

    KEYS = ("input", "column", "maxlag", "fit", "bins", "simulate", "reproduce")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "TimeSeriesSection":
        _check_keys(raw, cls.KEYS, "timeseries")
        bins = raw.get("bins", "auto")
        if isinstance(bins, bool) or not (isinstance(bins, str) or (isinstance(bins, int) and bins >= 1)):
            raise ConfigError(f"timeseries.bins must be a positive integer or a numpy bin rule, got {bins!r}")
        simulate = raw.get("simulate")
        return cls(
            input=_optional_path(raw.get("input"), "timeseries.input"),
            column=raw.get("column"),
            maxlag=_integer(raw.get("maxlag", 20), "timeseries.maxlag", 1),
            fit=None if raw.get("fit") is None else _integer(raw["fit"], "timeseries.fit"),
            bins=bins,
            simulate=None if simulate is None else ARSimulation.from_dict(simulate),
            reproduce=_integer(raw.get("reproduce", 0), "timeseries.reproduce"),
        )

    def validate_for_run(self) -> None:
        if self.reproduce == 0 and self.input is None and self.simulate is None:
            raise ConfigError("timeseries needs an input CSV, a simulate section or reproduce > 0")


@dataclass(frozen=True)
class CalibrationSection:
    exponents: Tuple[float, ...] = DEFAULT_EXPONENTS
    windows: Tuple[Optional[float], ...] = (0.001, 0.002, 0.005, 0.01, 0.1, None)
    store: Optional[Path] = None

    KEYS = ("exponents", "windows", "store")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "CalibrationSection":
        _check_keys(raw, cls.KEYS, "calibrate")
        exponents = raw.get("exponents", list(DEFAULT_EXPONENTS))
        windows = raw.get("windows", list(DEFAULT_WINDOWS))
        if not isinstance(exponents, (list, tuple)) or not exponents:
            raise ConfigError("calibrate.exponents must be a nonempty list")
        if not isinstance(windows, (list, tuple)) or not windows:
            raise ConfigError("calibrate.windows must be a nonempty list")
        return cls(exponents=tuple(_number(d, "calibrate.exponents", 0.0) for d in exponents),
                   windows=tuple(_window(w) for w in windows),
                   store=_optional_path(raw.get("store"), "calibrate.store"))


@dataclass(frozen=True)
class ExperimentConfig:
    """
    One fully validated experiment recipe.

    Angles are given in degrees and stored in radians; nothing here is read
    from the environment, so a config plus its seed pins every output.
    """
    kind: str
    seed: int
    model: ModelConfig = field(default_factory=ModelConfig)
    angles: Tuple[float, ...] = tuple(math.radians(a) for a in DEFAULT_ANGLES_DEG)
    n_pairs: int = 100_000
    window: Optional[float] = None
    output_dir: Path = Path("results")
    logs: Optional[Path] = None
    calibration: Optional[Path] = None
    scan_deltas: Tuple[float, ...] = ()
    purity: PuritySection = field(default_factory=PuritySection)
    timeseries: TimeSeriesSection = field(default_factory=TimeSeriesSection)
    calibrate: CalibrationSection = field(default_factory=CalibrationSection)
    simultaneous_jobs: int = DEFAULT_SIMULTANEOUS_JOBS
    timing: bool = False
    raw: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)

    KEYS = ("kind", "seed", "model", "angles", "n_pairs", "window", "output_dir", "logs", "calibration", "scan",
            "purity", "timeseries", "calibrate", "simultaneous_jobs", "timing")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ExperimentConfig":
        _check_keys(raw, cls.KEYS, "config")
        kind = raw.get("kind")
        if kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"Unknown experiment kind {kind!r}, expected one of {EXPERIMENT_KINDS}")
        if raw.get("seed") is None:
            raise ConfigError("A seed is required.")
        seed = _integer(raw["seed"], "seed")

        angles = _degrees(raw.get("angles", list(DEFAULT_ANGLES_DEG)), "angles")
        if len(angles) != 4:
            raise ConfigError(f"angles must list four settings (a, a', b, b'), got {len(angles)}")
        scan = raw.get("scan", {})
        _check_keys(scan, ("deltas",), "scan")
        timing = raw.get("timing", False)
        if not isinstance(timing, bool):
            raise ConfigError(f"timing must be true or false, got {timing!r}")

        model = ModelConfig.from_dict(raw.get("model", {}))
        # the contextual model only reproduces the singlet curve under a finite window
        window = raw.get("window", DEFAULT_WINDOW if model.kind == "contextual" else None)

        config = cls(
            kind=kind,
            seed=seed,
            model=model,
            angles=tuple(math.radians(a) for a in angles),
            n_pairs=_integer(raw.get("n_pairs", 100_000), "n_pairs", 1),
            window=_window(window),
            output_dir=_optional_path(raw.get("output_dir", "results"), "output_dir"),
            logs=_optional_path(raw.get("logs"), "logs"),
            calibration=_optional_path(raw.get("calibration"), "calibration"),
            scan_deltas=tuple(math.radians(a) for a in _degrees(scan.get("deltas", DEFAULT_SCAN_GRID), "scan.deltas")),
            purity=PuritySection.from_dict(raw.get("purity", {})),
            timeseries=TimeSeriesSection.from_dict(raw.get("timeseries", {})),
            calibrate=CalibrationSection.from_dict(raw.get("calibrate", {})),
            simultaneous_jobs=_integer(raw.get("simultaneous_jobs", DEFAULT_SIMULTANEOUS_JOBS), "simultaneous_jobs", 1),
            timing=timing,
            raw=dict(raw),
        )
        if kind == "purity":
            config.purity.validate_for_run()
        elif kind == "timeseries":
            config.timeseries.validate_for_run()
        elif kind == "calibrate" and config.model.kind != "contextual":
            raise ConfigError("calibrate only applies to the contextual model")
        if config.model.kind == "contextual":
            # building the model surfaces parameter errors before anything is written
            config.generator()
        return config

    @classmethod
    def from_file(cls, path: Union[str, Path], overrides: Optional[Mapping[str, Any]] = None) -> "ExperimentConfig":
        """Loads a JSON config; ``overrides`` (e.g. from CLI flags) win over file values."""
        path = Path(path)
        try:
            raw = orjson.loads(path.read_bytes())
        except FileNotFoundError:
            raise ConfigError(f"Config file not found: {path}")
        except orjson.JSONDecodeError as e:
            raise ConfigError(f"Config file {path} is not valid JSON: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"Config file {path} must hold a JSON object")
        return cls.from_dict(merge_config(raw, overrides or {}))

    def settings(self) -> Tuple[LabeledSetting, ...]:
        return tuple(LabeledSetting(label, angle) for label, angle in zip(CHSH_LABELS, self.angles))

    def generator(self) -> GeneratorSpec:
        return self.model.build(self.seed)

    @property
    def angles_deg(self) -> Tuple[float, ...]:
        return tuple(math.degrees(a) for a in self.angles)

    def echo(self) -> Dict[str, Any]:
        """The validated config as it is echoed into reports (degrees, explicit defaults)."""
        echo = {
            "kind": self.kind,
            "seed": self.seed,
            "model": {"kind": self.model.kind, "t0": self.model.t0, "d": self.model.d,
                      "pair_spacing": self.model.pair_spacing, "n_labels": self.model.n_labels,
                      "model_seed": self.model.model_seed, "model_index": self.model.model_index},
            "angles": list(self.angles_deg),
            "n_pairs": self.n_pairs,
            "window": UNWINDOWED if self.window is None else self.window,
        }
        if self.calibration is not None:
            echo["calibration"] = str(self.calibration)
        if self.kind == "scan":
            echo["scan"] = {"deltas": [math.degrees(d) for d in self.scan_deltas]}
        if self.kind == "chsh" and self.logs is not None:
            echo["logs"] = str(self.logs)
        if self.kind == "purity":
            p = self.purity
            echo["purity"] = {"input": p.input and str(p.input), "column": p.column,
                              "event_log": p.event_log and str(p.event_log), "station": p.station,
                              "splits": p.splits, "alpha": p.alpha}
        if self.kind == "timeseries":
            t = self.timeseries
            echo["timeseries"] = {
                "input": t.input and str(t.input), "column": t.column, "maxlag": t.maxlag, "fit": t.fit,
                "bins": t.bins, "reproduce": t.reproduce,
                "simulate": None if t.simulate is None else {
                    "coefficients": list(t.simulate.coefficients), "n": t.simulate.n,
                    "noise_variance": t.simulate.noise_variance, "burn_in": t.simulate.burn_in}}
        if self.kind == "calibrate":
            c = self.calibrate
            echo["calibrate"] = {"exponents": list(c.exponents),
                                 "windows": [UNWINDOWED if w is None else w for w in c.windows],
                                 "store": c.store and str(c.store)}
        return echo


def merge_config(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Recursive merge of two raw config dicts; override values win."""
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = merge_config(merged[key], value)
        else:
            merged[key] = value
    return merged


__all__ = ['ExperimentConfig', 'ModelConfig', 'ARSimulation', 'PuritySection', 'TimeSeriesSection',
           'CalibrationSection', 'merge_config', 'EXPERIMENT_KINDS', 'CHSH_LABELS', 'DEFAULT_ANGLES_DEG']
