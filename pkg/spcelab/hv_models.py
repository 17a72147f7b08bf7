"""
Event generators for the hidden-variable model classes and the quantum oracle.

Every generator emits two ``StationStream`` objects, one per station. Pairs are
emitted at t_k = k * pair_spacing. Random draws come from counter-based
substreams derived from (seed, run, stream, chunk), see ``utils.derive_generator``,
so a stream never depends on how generation is partitioned.
"""
import asyncio
import math
from dataclasses import dataclass, replace
from functools import partial
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .logger import logger
from .parallel import gather_limited, DEFAULT_SIMULTANEOUS_JOBS
from .quantum_predictions import singlet_correlation
from .utils import (Stream, derive_generator, iter_chunks, TWO_PI,
                    ConfigError, UnknownSetting, UndefinedResponse)

DEFAULT_PAIR_SPACING = 1000.0
DEFAULT_T0 = 1.0
# W -> 0 limit of the coincidence-selected correlation is exactly -cos(2Δα) for d = 2
DEFAULT_DELAY_EXPONENT = 2.0
DEFAULT_WINDOW = 0.002
ORTHOGONAL_PAIR = "orthogonal_pair"
WEIGHT_TOLERANCE = 1e-12

# 13 spin-angle differences in [0, π]
CALIBRATION_DELTAS: Tuple[float, ...] = tuple(np.linspace(0.0, math.pi, 13).tolist())

Streams = Tuple["StationStream", "StationStream"]


def spin_to_analyzer(theta: float) -> float:
    """Maps a spin setting θ to the photon-like analyzer angle α = θ/2."""
    return 0.5 * float(theta)


@dataclass(frozen=True)
class StationRecord:
    pair_id: int
    station: str
    setting_label: str
    setting: float
    outcome: int
    time_tag: float


@dataclass(frozen=True, eq=False)
class StationStream:
    """
    Columnar storage for the records of one station.

    Iterating yields ``StationRecord`` objects; the arrays are read-only.
    """
    station: str
    pair_ids: np.ndarray
    outcomes: np.ndarray
    time_tags: np.ndarray
    setting_labels: np.ndarray
    settings: np.ndarray

    def __post_init__(self):
        if self.station not in ("A", "B"):
            raise ValueError(f"Station must be 'A' or 'B', got {self.station!r}")
        pair_ids = np.asarray(self.pair_ids, dtype=np.int64)
        n = pair_ids.shape[0]
        outcomes = np.asarray(self.outcomes, dtype=np.int8)
        time_tags = np.asarray(self.time_tags, dtype=np.float64)
        labels = np.asarray(self.setting_labels, dtype=object)
        settings = np.asarray(self.settings, dtype=np.float64)
        if labels.ndim == 0:
            labels = np.full(n, labels.item(), dtype=object)
        if settings.ndim == 0:
            settings = np.full(n, float(settings), dtype=np.float64)
        if not all(arr.shape == (n,) for arr in (outcomes, time_tags, labels, settings)):
            raise ValueError("All columns of a station stream must have the same length.")
        if n and not np.all(np.abs(outcomes) == 1):
            raise ValueError("Outcomes must be +1 or -1.")
        if n and not np.all(np.isfinite(time_tags)):
            raise ValueError("Time tags must be finite.")
        if n > 1 and not np.all(np.diff(pair_ids) > 0):
            raise ValueError("pair_id must be strictly increasing within a stream.")
        for name, arr in (("pair_ids", pair_ids), ("outcomes", outcomes), ("time_tags", time_tags),
                          ("setting_labels", labels), ("settings", settings)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_records(cls, station: str, records: Sequence[StationRecord]) -> "StationStream":
        return cls(
            station=station,
            pair_ids=[r.pair_id for r in records],
            outcomes=[r.outcome for r in records],
            time_tags=[r.time_tag for r in records],
            setting_labels=np.array([r.setting_label for r in records], dtype=object),
            settings=[r.setting for r in records],
        )

    @classmethod
    def concatenate(cls, station: str, parts: Sequence["StationStream"]) -> "StationStream":
        if not parts:
            return cls(station, [], [], [], np.array([], dtype=object), [])
        return cls(
            station=station,
            pair_ids=np.concatenate([p.pair_ids for p in parts]),
            outcomes=np.concatenate([p.outcomes for p in parts]),
            time_tags=np.concatenate([p.time_tags for p in parts]),
            setting_labels=np.concatenate([p.setting_labels for p in parts]),
            settings=np.concatenate([p.settings for p in parts]),
        )

    def __len__(self) -> int:
        return int(self.pair_ids.shape[0])

    def __getitem__(self, index: int) -> StationRecord:
        return StationRecord(
            pair_id=int(self.pair_ids[index]),
            station=self.station,
            setting_label=str(self.setting_labels[index]),
            setting=float(self.settings[index]),
            outcome=int(self.outcomes[index]),
            time_tag=float(self.time_tags[index]),
        )

    def __iter__(self) -> Iterator[StationRecord]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other):
        if not isinstance(other, StationStream):
            return NotImplemented
        return (self.station == other.station
                and np.array_equal(self.pair_ids, other.pair_ids)
                and np.array_equal(self.outcomes, other.outcomes)
                and np.array_equal(self.time_tags, other.time_tags)
                and np.array_equal(self.settings, other.settings)
                and list(self.setting_labels) == list(other.setting_labels))

    __hash__ = None


def _emit(station: str, label: str, setting: float, pair_ids: np.ndarray,
          outcomes: np.ndarray, time_tags: np.ndarray) -> StationStream:
    return StationStream(station=station, pair_ids=pair_ids, outcomes=outcomes, time_tags=time_tags,
                         setting_labels=np.array(label, dtype=object), settings=np.array(setting))


def _check_n_pairs(n_pairs: int) -> int:
    if int(n_pairs) < 1:
        raise ConfigError(f"n_pairs must be at least 1, got {n_pairs}")
    return int(n_pairs)


def _validate_weights(weights: Sequence[float]) -> np.ndarray:
    weights = np.array(weights, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise ConfigError("Hidden-variable weights must be a nonempty list.")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > WEIGHT_TOLERANCE:
        raise ConfigError(f"Hidden-variable weights must be non-negative and sum to 1, got sum {weights.sum()}")
    weights.setflags(write=False)
    return weights


def _freeze_tables(tables: Mapping[str, Sequence[float]], n_labels: int, dtype) -> Dict[str, np.ndarray]:
    frozen = {}
    for setting, values in tables.items():
        arr = np.array(values, dtype=dtype)
        if arr.shape != (n_labels,):
            raise ConfigError(f"Table for setting {setting!r} must have {n_labels} entries, got {arr.shape}")
        arr.setflags(write=False)
        frozen[str(setting)] = arr
    return frozen


def _draw_labels(rng: np.random.Generator, weights: np.ndarray, size: int) -> np.ndarray:
    if weights.size == 1:
        return np.zeros(size, dtype=np.int64)
    return rng.choice(weights.size, size=size, p=weights)


@dataclass(frozen=True, eq=False)
class FactorizableModel:
    """
    Stochastic hidden-variable model: P(a, b | x, y) = Σ P(λ) P(a | x, λ1) P(b | y, λ2).

    :param weights: P(λ) over the finite label set.
    :param p_a: For each setting label x, P(A = +1 | x, λ) for every λ.
    :param p_b: For each setting label y, P(B = +1 | y, λ) for every λ.
    """
    weights: np.ndarray
    p_a: Mapping[str, np.ndarray]
    p_b: Mapping[str, np.ndarray]
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        weights = _validate_weights(self.weights)
        object.__setattr__(self, "weights", weights)
        n = weights.size
        for name in ("p_a", "p_b"):
            tables = _freeze_tables(getattr(self, name), n, float)
            for setting, arr in tables.items():
                if np.any(arr < 0) or np.any(arr > 1):
                    raise ConfigError(f"{name}[{setting!r}] holds a probability outside [0, 1]")
            object.__setattr__(self, name, tables)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"λ{i}" for i in range(n)))
        elif len(self.labels) != n:
            raise ConfigError("One label per hidden-variable weight is required.")

    @classmethod
    def random(cls, seed: int, n_labels: int = 4,
               settings_a: Sequence[str] = ("a", "a'"),
               settings_b: Sequence[str] = ("b", "b'"),
               index: int = 0) -> "FactorizableModel":
        """A model with Dirichlet weights and uniform response probabilities."""
        rng = derive_generator(seed, index, Stream.SOURCE)
        weights = rng.dirichlet(np.ones(n_labels))
        weights = weights / weights.sum()
        p_a = {s: rng.random(n_labels) for s in settings_a}
        p_b = {s: rng.random(n_labels) for s in settings_b}
        return cls(weights=weights, p_a=p_a, p_b=p_b)

    def correlation(self, x: str, y: str) -> float:
        """Exact E(AB | x, y) = Σ P(λ) E(A | x, λ) E(B | y, λ)."""
        e_a = 2.0 * self._table(self.p_a, x) - 1.0
        e_b = 2.0 * self._table(self.p_b, y) - 1.0
        return float(np.sum(self.weights * e_a * e_b))

    @staticmethod
    def _table(tables: Mapping[str, np.ndarray], setting: str) -> np.ndarray:
        try:
            return tables[setting]
        except KeyError:
            raise UnknownSetting(f"Unknown setting label: {setting!r}")


@dataclass(frozen=True, eq=False)
class DeterministicSharedSpaceModel:
    """
    Predetermined outcomes: E(AB) = Σ P(λ) A(λ1, x) B(λ2, y).

    :param responses_a: For each setting label x, A(λ, x) in {+1, -1} for every λ.
    :param responses_b: For each setting label y, B(λ, y) in {+1, -1} for every λ.
    """
    weights: np.ndarray
    responses_a: Mapping[str, np.ndarray]
    responses_b: Mapping[str, np.ndarray]
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        weights = _validate_weights(self.weights)
        object.__setattr__(self, "weights", weights)
        n = weights.size
        for name in ("responses_a", "responses_b"):
            tables = _freeze_tables(getattr(self, name), n, np.int8)
            for setting, arr in tables.items():
                if not np.all(np.abs(arr) == 1):
                    raise ConfigError(f"{name}[{setting!r}] must only hold +1 or -1")
            object.__setattr__(self, name, tables)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"λ{i}" for i in range(n)))
        elif len(self.labels) != n:
            raise ConfigError("One label per hidden-variable weight is required.")

    @classmethod
    def random(cls, seed: int, n_labels: int = 8,
               settings_a: Sequence[str] = ("a", "a'"),
               settings_b: Sequence[str] = ("b", "b'"),
               index: int = 0) -> "DeterministicSharedSpaceModel":
        """A model with Dirichlet weights and random sign tables."""
        rng = derive_generator(seed, index, Stream.SOURCE)
        weights = rng.dirichlet(np.ones(n_labels))
        weights = weights / weights.sum()

        def signs() -> np.ndarray:
            return np.where(rng.random(n_labels) < 0.5, 1, -1)

        return cls(weights=weights,
                   responses_a={s: signs() for s in settings_a},
                   responses_b={s: signs() for s in settings_b})

    def correlation(self, x: str, y: str) -> float:
        return float(np.sum(self.weights * self._response(self.responses_a, x)
                            * self._response(self.responses_b, y)))

    @staticmethod
    def _response(tables: Mapping[str, np.ndarray], setting: str) -> np.ndarray:
        try:
            return tables[setting]
        except KeyError:
            raise UndefinedResponse(f"No response defined for setting {setting!r}")


@dataclass(frozen=True)
class ContextualEventModel:
    """
    Local deterministic model with instrument-dependent detection delays.

    :param t0: Delay scale T0.
    :param d: Delay exponent; a station delays its click by T0 * r * |sin 2ξ|^d.
    :param pair_spacing: Time between pair emissions, must exceed t0.
    :param rng_seed: Seed used when a generator call does not pass one.
    """
    t0: float = DEFAULT_T0
    d: float = DEFAULT_DELAY_EXPONENT
    pair_spacing: float = DEFAULT_PAIR_SPACING
    source_convention: str = ORTHOGONAL_PAIR
    rng_seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.t0) and self.t0 > 0):
            raise ConfigError(f"T0 must be positive, got {self.t0}")
        if not (math.isfinite(self.d) and self.d >= 0):
            raise ConfigError(f"Delay exponent must be non-negative, got {self.d}")
        if not self.pair_spacing > self.t0:
            raise ConfigError("pair_spacing must exceed T0 so consecutive pairs never overlap.")
        if self.source_convention != ORTHOGONAL_PAIR:
            raise ConfigError(f"Unsupported source convention: {self.source_convention}")

    def station(self) -> "ContextualStation":
        return ContextualStation(t0=self.t0, d=self.d)


@dataclass(frozen=True)
class ContextualStation:
    """
    One measuring station of the contextual model.

    ``respond`` sees only its own particle's phase, its own spin setting and
    its own generator; nothing of the remote station reaches it. The spin
    setting θ turns the analyzer to α = θ/2.
    """
    t0: float
    d: float

    def respond(self, particle_phase: np.ndarray, spin_setting: float,
                rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        xi = particle_phase - spin_to_analyzer(spin_setting)

        outcomes = np.where(np.cos(2.0 * xi) >= 0.0, 1, -1).astype(np.int8)
        # r is the instrument variable λx
        r = rng.random(particle_phase.shape[0])
        delays = self.t0 * r * np.abs(np.sin(2.0 * xi)) ** self.d
        return outcomes, delays


def sample_qt_oracle(theta_a: float, theta_b: float, n_pairs: int, seed: int,
                     run: int = 0, labels: Tuple[str, str] = ("a", "b"),
                     pair_spacing: float = DEFAULT_PAIR_SPACING) -> Streams:
    """
    Nonlocal reference sampler drawing each pair from the singlet joint law.

    A is ±1 with probability 1/2; B equals A with probability (1 - cos Δ)/2.
    """
    n_pairs = _check_n_pairs(n_pairs)
    theta_a, theta_b = float(theta_a), float(theta_b)
    p_same = (1.0 + singlet_correlation(theta_a, theta_b)) / 2.0
    parts_a, parts_b = [], []
    for chunk, start, stop in iter_chunks(n_pairs):
        rng = derive_generator(seed, run, Stream.SOURCE, chunk)
        m = stop - start
        a = np.where(rng.random(m) < 0.5, 1, -1).astype(np.int8)
        same = rng.random(m) < p_same
        b = np.where(same, a, -a).astype(np.int8)
        pair_ids = np.arange(start, stop, dtype=np.int64)
        tags = pair_ids * pair_spacing
        parts_a.append(_emit("A", labels[0], theta_a, pair_ids, a, tags))
        parts_b.append(_emit("B", labels[1], theta_b, pair_ids, b, tags))
    logger.debug("QT oracle: %d pairs at Δ = %.6f rad", n_pairs, theta_a - theta_b)
    return StationStream.concatenate("A", parts_a), StationStream.concatenate("B", parts_b)


def _bernoulli_station(probabilities: np.ndarray, lam: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return np.where(rng.random(lam.shape[0]) < probabilities[lam], 1, -1).astype(np.int8)


def sample_factorizable(model: FactorizableModel, x: str, y: str, n_pairs: int, seed: int,
                        run: int = 0, angles: Tuple[float, float] = (0.0, 0.0),
                        pair_spacing: float = DEFAULT_PAIR_SPACING) -> Streams:
    """Draw λ by P(λ), then a and b independently inside the λ cell."""
    n_pairs = _check_n_pairs(n_pairs)
    table_a = model._table(model.p_a, x)
    table_b = model._table(model.p_b, y)
    parts_a, parts_b = [], []
    for chunk, start, stop in iter_chunks(n_pairs):
        lam = _draw_labels(derive_generator(seed, run, Stream.SOURCE, chunk), model.weights, stop - start)
        a = _bernoulli_station(table_a, lam, derive_generator(seed, run, Stream.STATION_A, chunk))
        b = _bernoulli_station(table_b, lam, derive_generator(seed, run, Stream.STATION_B, chunk))
        pair_ids = np.arange(start, stop, dtype=np.int64)
        tags = pair_ids * pair_spacing
        parts_a.append(_emit("A", x, angles[0], pair_ids, a, tags))
        parts_b.append(_emit("B", y, angles[1], pair_ids, b, tags))
    return StationStream.concatenate("A", parts_a), StationStream.concatenate("B", parts_b)


def sample_deterministic(model: DeterministicSharedSpaceModel, x: str, y: str, n_pairs: int, seed: int,
                         run: int = 0, angles: Tuple[float, float] = (0.0, 0.0),
                         pair_spacing: float = DEFAULT_PAIR_SPACING) -> Streams:
    """Draw λ by P(λ); outcomes are A(λ, x) and B(λ, y) with no further randomness."""
    n_pairs = _check_n_pairs(n_pairs)
    response_a = model._response(model.responses_a, x)
    response_b = model._response(model.responses_b, y)
    parts_a, parts_b = [], []
    for chunk, start, stop in iter_chunks(n_pairs):
        lam = _draw_labels(derive_generator(seed, run, Stream.SOURCE, chunk), model.weights, stop - start)
        pair_ids = np.arange(start, stop, dtype=np.int64)
        tags = pair_ids * pair_spacing
        parts_a.append(_emit("A", x, angles[0], pair_ids, response_a[lam], tags))
        parts_b.append(_emit("B", y, angles[1], pair_ids, response_b[lam], tags))
    return StationStream.concatenate("A", parts_a), StationStream.concatenate("B", parts_b)


def sample_contextual_event(model: ContextualEventModel, theta_a: float, theta_b: float, n_pairs: int,
                            seed: Optional[int] = None, run: int = 0,
                            labels: Tuple[str, str] = ("a", "b")) -> Streams:
    """
    Event-by-event local model with per-station time tags.

    The source draws λ uniform on [0, 2π); particle A carries λ and particle B
    λ + π/2. ``theta_a`` and ``theta_b`` are spin settings, recorded as given
    in the streams; each station turns its own analyzer to θ/2.
    """
    n_pairs = _check_n_pairs(n_pairs)
    seed = model.rng_seed if seed is None else seed
    theta_a, theta_b = float(theta_a), float(theta_b)
    station_a = model.station()
    station_b = model.station()
    parts_a, parts_b = [], []
    for chunk, start, stop in iter_chunks(n_pairs):
        lam = derive_generator(seed, run, Stream.SOURCE, chunk).random(stop - start) * TWO_PI
        a, delay_a = station_a.respond(lam, theta_a, derive_generator(seed, run, Stream.STATION_A, chunk))
        b, delay_b = station_b.respond(lam + 0.5 * math.pi, theta_b,
                                       derive_generator(seed, run, Stream.STATION_B, chunk))
        pair_ids = np.arange(start, stop, dtype=np.int64)
        emitted = pair_ids * model.pair_spacing
        parts_a.append(_emit("A", labels[0], theta_a, pair_ids, a, emitted + delay_a))
        parts_b.append(_emit("B", labels[1], theta_b, pair_ids, b, emitted + delay_b))
    logger.debug("Contextual model: %d pairs, d = %g, θA = %.6f, θB = %.6f", n_pairs, model.d, theta_a, theta_b)
    return StationStream.concatenate("A", parts_a), StationStream.concatenate("B", parts_b)



GENERATOR_KINDS = ("qt", "factorizable", "deterministic", "contextual")

Model = Union[None, FactorizableModel, DeterministicSharedSpaceModel, ContextualEventModel]


@dataclass(frozen=True)
class LabeledSetting:
    """A setting label with its spin angle in radians."""
    label: str
    angle: float = 0.0

    @classmethod
    def from_degrees(cls, label: str, degrees: float) -> "LabeledSetting":
        return cls(label, math.radians(degrees))


@dataclass(frozen=True)
class GeneratorSpec:
    """Names one generator and carries its model; ``qt`` needs no model."""
    kind: str
    model: Model = None

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ConfigError(f"Unknown generator: {self.kind!r}, expected one of {GENERATOR_KINDS}")
        expected = {"qt": type(None), "factorizable": FactorizableModel,
                    "deterministic": DeterministicSharedSpaceModel, "contextual": ContextualEventModel}[self.kind]
        if not isinstance(self.model, expected):
            raise ConfigError(f"Generator {self.kind!r} needs a {expected.__name__}, got {type(self.model).__name__}")


def generate_pair_streams(spec: GeneratorSpec, setting_a: LabeledSetting, setting_b: LabeledSetting,
                          n_pairs: int, seed: int, run: int = 0) -> Streams:
    """Dispatch to the generator named by ``spec``; every generator takes spin angles."""
    if spec.kind == "qt":
        return sample_qt_oracle(setting_a.angle, setting_b.angle, n_pairs, seed, run=run,
                                labels=(setting_a.label, setting_b.label))
    if spec.kind == "factorizable":
        return sample_factorizable(spec.model, setting_a.label, setting_b.label, n_pairs, seed, run=run,
                                   angles=(setting_a.angle, setting_b.angle))
    if spec.kind == "deterministic":
        return sample_deterministic(spec.model, setting_a.label, setting_b.label, n_pairs, seed, run=run,
                                    angles=(setting_a.angle, setting_b.angle))
    return sample_contextual_event(spec.model, setting_a.angle, setting_b.angle, n_pairs, seed, run=run,
                                   labels=(setting_a.label, setting_b.label))


@dataclass(frozen=True)
class CalibrationCell:
    exponent: float
    window: Optional[float]
    deviations: Tuple[float, ...]
    coincidence_fraction: float

    @property
    def max_deviation(self) -> float:
        return max(self.deviations)


@dataclass(frozen=True)
class CalibrationReport:
    deltas: Tuple[float, ...]
    cells: Tuple[CalibrationCell, ...]
    n_pairs: int
    seed: int

    @property
    def best(self) -> CalibrationCell:
        return min(self.cells, key=lambda cell: cell.max_deviation)

    def row(self, exponent: float) -> List[CalibrationCell]:
        return [cell for cell in self.cells if cell.exponent == exponent]

    def to_dict(self) -> dict:
        best = self.best
        return {
            "deltas_rad": list(self.deltas),
            "n_pairs": self.n_pairs,
            "seed": self.seed,
            "cells": [
                {"exponent": c.exponent, "window": "unwindowed" if c.window is None else c.window,
                 "max_deviation": c.max_deviation, "deviations": list(c.deviations),
                 "coincidence_fraction": c.coincidence_fraction}
                for c in self.cells
            ],
            "best": {"exponent": best.exponent,
                     "window": "unwindowed" if best.window is None else best.window,
                     "max_deviation": best.max_deviation},
        }


def _calibration_column(model: ContextualEventModel, delta_index: int, delta: float,
                        windows: Sequence, n_pairs: int, seed: int) -> List[Tuple[float, float]]:
    """(|Ê + cos Δ|, coincidence fraction) for every window at one Δ."""
    from .coincidence_analysis import CoincidenceWindow, match_coincidences, estimate_correlation
    from .utils import TooFewPairs

    streams = sample_contextual_event(model, 0.0, delta, n_pairs, seed, run=delta_index)
    target = singlet_correlation(0.0, delta)
    column = []
    for window in windows:
        pairs = match_coincidences(*streams, CoincidenceWindow.coerce(window))
        try:
            estimate = estimate_correlation(pairs)
        except TooFewPairs:
            column.append((math.inf, len(pairs) / n_pairs))
            continue
        column.append((abs(estimate.e_hat - target), len(pairs) / n_pairs))
    return column


async def acalibrate_contextual(model: ContextualEventModel, exponents: Sequence[float], windows: Sequence,
                                n_pairs: int, seed: int,
                                deltas: Sequence[float] = CALIBRATION_DELTAS,
                                simultaneous_jobs: int = DEFAULT_SIMULTANEOUS_JOBS) -> CalibrationReport:
    """
    Max |Ê(Δ) + cos Δ| over the Δ grid for every (d, W) cell.

    Windows are widths in units of time, or ``None``/``"unwindowed"`` for the
    no-selection row. Each Δ uses run index = its grid position, so every
    exponent sees the same source and instrument draws.
    """
    from .coincidence_analysis import CoincidenceWindow

    if not exponents or not windows or not deltas:
        raise ConfigError("Calibration needs nonempty exponent, window and Δ grids.")
    exponents = [float(d) for d in exponents]
    widths = [CoincidenceWindow.coerce(w).width for w in windows]
    jobs = [
        partial(_calibration_column, replace(model, d=d), i, delta, windows, n_pairs, seed)
        for d in exponents for i, delta in enumerate(deltas)
    ]
    columns = await gather_limited(jobs, simultaneous_jobs)

    cells = []
    n_deltas = len(deltas)
    for e_index, exponent in enumerate(exponents):
        per_delta = columns[e_index * n_deltas:(e_index + 1) * n_deltas]
        for w_index, width in enumerate(widths):
            cells.append(CalibrationCell(
                exponent=exponent,
                window=width,
                deviations=tuple(col[w_index][0] for col in per_delta),
                coincidence_fraction=float(np.mean([col[w_index][1] for col in per_delta])),
            ))
    report = CalibrationReport(deltas=tuple(float(d) for d in deltas), cells=tuple(cells),
                               n_pairs=int(n_pairs), seed=int(seed))
    best = report.best
    logger.info("Calibration best cell: d = %g, W = %s, max deviation %.4f",
                best.exponent, "unwindowed" if best.window is None else best.window, best.max_deviation)
    return report


def calibrate_contextual(model: ContextualEventModel, exponents: Sequence[float], windows: Sequence,
                         n_pairs: int, seed: int,
                         deltas: Sequence[float] = CALIBRATION_DELTAS,
                         simultaneous_jobs: int = DEFAULT_SIMULTANEOUS_JOBS) -> CalibrationReport:
    return asyncio.run(acalibrate_contextual(model, exponents, windows, n_pairs, seed, deltas, simultaneous_jobs))


__all__ = ['StationRecord', 'StationStream', 'FactorizableModel', 'DeterministicSharedSpaceModel',
           'ContextualEventModel', 'ContextualStation', 'LabeledSetting', 'GeneratorSpec',
           'CalibrationCell', 'CalibrationReport', 'spin_to_analyzer', 'sample_qt_oracle',
           'sample_factorizable', 'sample_deterministic', 'sample_contextual_event',
           'generate_pair_streams', 'calibrate_contextual', 'acalibrate_contextual', 'GENERATOR_KINDS',
           'CALIBRATION_DELTAS',
           'DEFAULT_PAIR_SPACING', 'DEFAULT_T0', 'DEFAULT_DELAY_EXPONENT', 'DEFAULT_WINDOW']
