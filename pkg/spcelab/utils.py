import math
from enum import IntEnum
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

TWO_PI = 2.0 * math.pi

# pairs per generator substream; chunk boundaries are part of the RNG derivation rule
CHUNK_PAIRS = 1 << 16


class Stream(IntEnum):
    """Stream codes folded into the RNG spawn key."""
    SOURCE = 0
    STATION_A = 1
    STATION_B = 2
    NOISE = 3


def derive_generator(seed: int, *keys: int) -> np.random.Generator:
    """
    Counter-based generator for one (run, stream, chunk) cell of an experiment.

    The mixing rule is ``SeedSequence(seed, spawn_key=keys)`` feeding a Philox
    bit generator, so every cell is independent of every other cell and of the
    order in which cells are evaluated.
    """
    if seed is None:
        raise ConfigError("A seed is required, wall-clock seeding is not supported.")
    if int(seed) < 0:
        raise ConfigError(f"Seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(sequence))


def iter_chunks(n_items: int, chunk_size: int = CHUNK_PAIRS) -> Iterator[Tuple[int, int, int]]:
    """Yields (chunk_index, start, stop) covering range(n_items)."""
    for chunk, start in enumerate(range(0, n_items, chunk_size)):
        yield chunk, start, min(start + chunk_size, n_items)


def reduce_angle(angle: float) -> float:
    if not math.isfinite(angle):
        raise ValueError(f"Angle must be finite, got {angle}")
    reduced = math.fmod(angle, TWO_PI)
    if reduced < 0:
        reduced += TWO_PI
    # fmod of a value just below 2π can round up to exactly 2π
    return 0.0 if reduced >= TWO_PI else reduced


def parse_float_list(text: str, name: str = "value") -> List[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"Invalid {name} list: {text!r}")
    if not values:
        raise ConfigError(f"Empty {name} list")
    if not all(math.isfinite(v) for v in values):
        raise ConfigError(f"Non-finite entry in {name} list: {text!r}")
    return values


def parse_degree_grid(text: str) -> List[float]:
    """Parses ``start:stop:count`` or a comma list of degrees into radians."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"Grid must look like start:stop:count, got {text!r}")
        try:
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise ConfigError(f"Invalid grid: {text!r}")
        if count < 1:
            raise ConfigError(f"Grid count must be positive, got {count}")
        degrees = np.linspace(start, stop, count).tolist()
    else:
        degrees = parse_float_list(text, "angle")
    return [math.radians(d) for d in degrees]


def as_float_array(values: Sequence[float], name: str = "series") -> np.ndarray:
    array = np.asarray(values, dtype=float).ravel()
    if not np.all(np.isfinite(array)):
        raise DataError(f"{name} contains non-finite values")
    return array


class SpceLabError(Exception):
    def __init__(self, message):
        super().__init__(message)
        self.message = message

    def __str__(self):
        return f"{type(self).__name__}: {self.message}"


class ConfigError(SpceLabError):
    pass


class DataError(SpceLabError):
    def __init__(self, message, line: Optional[int] = None):
        super().__init__(message)
        self.line = line

    def __str__(self):
        if self.line is None:
            return f"{type(self).__name__}: {self.message}"
        return f"{type(self).__name__}: line {self.line}: {self.message}"


class UnsortedStream(DataError):
    pass


class TooFewPairs(DataError):
    pass


class EmptySequence(DataError):
    pass


class DegenerateSequence(DataError):
    pass


class BlocksTooShort(DataError):
    pass


class SingularSystem(DataError):
    pass


class NonStationaryModel(ConfigError):
    pass


class UnknownSetting(ConfigError):
    pass


class UndefinedResponse(ConfigError):
    pass


class InvalidSmearing(ConfigError):
    pass


__all__ = ['TWO_PI', 'CHUNK_PAIRS', 'Stream', 'derive_generator', 'iter_chunks', 'reduce_angle',
           'parse_float_list', 'parse_degree_grid', 'as_float_array', 'SpceLabError', 'ConfigError',
           'DataError', 'UnsortedStream', 'TooFewPairs', 'EmptySequence', 'DegenerateSequence',
           'BlocksTooShort', 'SingularSystem', 'NonStationaryModel', 'UnknownSetting',
           'UndefinedResponse', 'InvalidSmearing']
