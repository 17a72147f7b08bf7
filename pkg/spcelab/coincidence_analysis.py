"""
Coincidence matching, correlation estimates and the CHSH statistic.
"""
import asyncio
import heapq
import math
from dataclasses import dataclass
from functools import partial
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .hv_models import StationStream, GeneratorSpec, LabeledSetting, generate_pair_streams
from .logger import logger
from .parallel import gather_limited, DEFAULT_SIMULTANEOUS_JOBS
from .quantum_predictions import singlet_correlation
from .utils import ConfigError, DataError, UnsortedStream, TooFewPairs

UNWINDOWED = "unwindowed"
CHSH_KEYS = ("ab", "ab'", "a'b", "a'b'")
RANGE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CoincidenceWindow:
    """Maximum |tA - tB| for a coincidence; ``width=None`` matches by pair_id."""
    width: Optional[float] = None

    def __post_init__(self):
        if self.width is not None:
            width = float(self.width)
            if not math.isfinite(width) or width < 0:
                raise ConfigError(f"Coincidence window must be finite and non-negative, got {self.width}")
            object.__setattr__(self, "width", width)

    @classmethod
    def unwindowed(cls) -> "CoincidenceWindow":
        return cls(None)

    @classmethod
    def coerce(cls, value: Union["CoincidenceWindow", float, str, None]) -> "CoincidenceWindow":
        if isinstance(value, CoincidenceWindow):
            return value
        if value is None or (isinstance(value, str) and value.strip().lower() == UNWINDOWED):
            return cls(None)
        try:
            return cls(float(value))
        except (TypeError, ValueError):
            raise ConfigError(f"Invalid coincidence window: {value!r}")

    @property
    def is_unwindowed(self) -> bool:
        return self.width is None

    def __str__(self):
        return UNWINDOWED if self.width is None else repr(self.width)


@dataclass(frozen=True, eq=False)
class MatchedPairs:
    """Matched coincidences; iterating yields (outcomeA, outcomeB) tuples."""
    outcomes_a: np.ndarray
    outcomes_b: np.ndarray
    index_a: np.ndarray
    index_b: np.ndarray

    def __len__(self) -> int:
        return int(self.outcomes_a.shape[0])

    def __iter__(self) -> Iterator[Tuple[int, int]]:
        return zip(self.outcomes_a.tolist(), self.outcomes_b.tolist())

    def products(self) -> np.ndarray:
        return self.outcomes_a.astype(np.int64) * self.outcomes_b.astype(np.int64)

    def transposed(self) -> "MatchedPairs":
        return MatchedPairs(self.outcomes_b, self.outcomes_a, self.index_b, self.index_a)


@dataclass(frozen=True)
class CorrelationEstimate:
    e_hat: float
    n_matched: int
    std_error: float


@dataclass(frozen=True)
class CHSHResult:
    estimates: Dict[str, CorrelationEstimate]
    S: float
    S_std_error: float

    @property
    def violation_sigmas(self) -> float:
        """(S - 2) in units of the standard error."""
        if self.S_std_error == 0:
            return math.inf if self.S > 2 else -math.inf if self.S < 2 else 0.0
        return (self.S - 2.0) / self.S_std_error


@dataclass(frozen=True)
class ScanPoint:
    delta: float
    expected: float
    estimate: CorrelationEstimate

    @property
    def deviation(self) -> float:
        return self.estimate.e_hat - self.expected


def _match_by_pair_id(stream_a: StationStream, stream_b: StationStream) -> MatchedPairs:
    if not np.array_equal(stream_a.pair_ids, stream_b.pair_ids):
        raise DataError("Unwindowed matching needs identical pair_id sets in both streams.")
    index = np.arange(len(stream_a), dtype=np.int64)
    return MatchedPairs(stream_a.outcomes, stream_b.outcomes, index, index.copy())


def _find(parent: List[int], k: int) -> int:
    root = k
    while parent[root] != root:
        root = parent[root]
    while parent[k] != root:
        parent[k], k = root, parent[k]
    return root


def _greedy_nearest(t_a: np.ndarray, t_b: np.ndarray,
                    lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Greedy matching in increasing (|tA - tB|, tA + tB) order without listing all candidates.

    Every unmatched A record keeps one heap entry for its nearest unused B record;
    a stale entry is refreshed when popped. Unused B records are found with
    skip pointers in both directions.
    """
    ta, tb = t_a.tolist(), t_b.tolist()
    n_b = len(tb)
    right = list(range(n_b + 1))  # right[k] leads to the first unused index >= k (n_b: none)
    left = list(range(n_b + 1))   # left[k + 1] leads to 1 + the last unused index <= k (0: none)
    insertion = np.searchsorted(t_b, t_a, side="left").tolist()
    lo, hi = lo.tolist(), hi.tolist()

    def nearest(i: int) -> Optional[Tuple[float, float, int, int]]:
        p = insertion[i]
        best = None
        r = _find(right, p)
        if r < hi[i]:
            best = (abs(ta[i] - tb[r]), ta[i] + tb[r], i, r)
        l = _find(left, p) - 1
        if l >= lo[i]:
            # lowest index among equal tags
            while True:
                k = _find(left, l) - 1
                if k < lo[i] or tb[k] != tb[l]:
                    break
                l = k
            candidate = (abs(ta[i] - tb[l]), ta[i] + tb[l], i, l)
            if best is None or candidate < best:
                best = candidate
        return best

    heap = [nearest(i) for i in range(len(ta)) if hi[i] > lo[i]]
    heapq.heapify(heap)
    used_b = [False] * n_b
    matched_a, matched_b = [], []
    while heap:
        _, _, i, j = heapq.heappop(heap)
        if used_b[j]:
            entry = nearest(i)
            if entry is not None:
                heapq.heappush(heap, entry)
            continue
        used_b[j] = True
        right[j] = j + 1
        left[j + 1] = j
        matched_a.append(i)
        matched_b.append(j)
    return np.array(matched_a, dtype=np.int64), np.array(matched_b, dtype=np.int64)


def match_coincidences(stream_a: StationStream, stream_b: StationStream,
                       window: Union[CoincidenceWindow, float, str, None]) -> MatchedPairs:
    """
    Pair records of two stations.

    Windowed mode is greedy nearest-in-time: candidate pairs with |tA - tB| <= W
    are accepted in increasing |tA - tB| order as long as neither record is
    already used. The result is ordered by the pair's mean time tag.
    """
    window = CoincidenceWindow.coerce(window)
    if window.is_unwindowed:
        return _match_by_pair_id(stream_a, stream_b)

    t_a, t_b = stream_a.time_tags, stream_b.time_tags
    for name, tags in (("A", t_a), ("B", t_b)):
        if tags.shape[0] > 1 and np.any(np.diff(tags) < 0):
            raise UnsortedStream(f"Stream {name} is not sorted by time_tag")

    width = window.width
    lo = np.searchsorted(t_b, t_a - width, side="left")
    hi = np.searchsorted(t_b, t_a + width, side="right")
    per_b = (np.searchsorted(t_a, t_b + width, side="right")
             - np.searchsorted(t_a, t_b - width, side="left"))
    counts = hi - lo
    if (counts.size and counts.max() > 1) or (per_b.size and per_b.max() > 1):
        # sort key is symmetric in A and B so swapping the streams transposes the result
        i, j = _greedy_nearest(t_a, t_b, lo, hi)
    else:
        i = np.flatnonzero(counts == 1)
        j = lo[i]
    if i.size == 0:
        empty = np.array([], dtype=np.int64)
        return MatchedPairs(np.array([], dtype=np.int8), np.array([], dtype=np.int8), empty, empty)

    order = np.lexsort((np.abs(t_a[i] - t_b[j]), t_a[i] + t_b[j]))
    i, j = i[order], j[order]
    logger.debug("Matched %d of (%d, %d) records with W = %s", i.size, t_a.shape[0], t_b.shape[0], window)
    return MatchedPairs(stream_a.outcomes[i], stream_b.outcomes[j], i, j)


def estimate_correlation(pairs: Union[MatchedPairs, Iterable[Tuple[int, int]]]) -> CorrelationEstimate:
    """Mean outcome product with the binomial standard error sqrt((1 - ê²)/n)."""
    if isinstance(pairs, MatchedPairs):
        products = pairs.products()
    else:
        products = np.array([int(a) * int(b) for a, b in pairs], dtype=np.int64)
    n = int(products.shape[0])
    if n < 2:
        raise TooFewPairs(f"At least 2 matched pairs are needed, got {n}")
    if not np.all(np.abs(products) == 1):
        raise DataError("Outcome products must be +1 or -1.")
    e_hat = float(products.mean())
    return CorrelationEstimate(e_hat=e_hat, n_matched=n, std_error=math.sqrt(max(0.0, 1.0 - e_hat ** 2) / n))


def chsh_statistic(e_ab: float, e_ab_prime: float, e_a_prime_b: float, e_a_prime_b_prime: float) -> float:
    """|E(ab) - E(ab')| + |E(a'b) + E(a'b')|."""
    for value in (e_ab, e_ab_prime, e_a_prime_b, e_a_prime_b_prime):
        if not -1.0 - RANGE_TOLERANCE <= value <= 1.0 + RANGE_TOLERANCE:
            raise ValueError(f"Correlations must lie in [-1, 1], got {value}")
    return abs(e_ab - e_ab_prime) + abs(e_a_prime_b + e_a_prime_b_prime)


def assemble_chsh(estimates: Dict[str, CorrelationEstimate]) -> CHSHResult:
    missing = [key for key in CHSH_KEYS if key not in estimates]
    if missing:
        raise DataError(f"Missing correlation estimates for {missing}")
    s = chsh_statistic(*(estimates[key].e_hat for key in CHSH_KEYS))
    s_err = math.sqrt(sum(estimates[key].std_error ** 2 for key in CHSH_KEYS))
    return CHSHResult(estimates={key: estimates[key] for key in CHSH_KEYS}, S=s, S_std_error=s_err)


def station_marginals(stream: StationStream) -> Tuple[float, float]:
    """P(outcome = +1) and its standard error, for no-signalling checks."""
    n = len(stream)
    if n == 0:
        raise TooFewPairs("Empty stream has no marginal.")
    p = float(np.mean(stream.outcomes == 1))
    return p, math.sqrt(p * (1.0 - p) / n)


def chsh_setting_pairs(settings: Sequence[LabeledSetting]) -> List[Tuple[str, LabeledSetting, LabeledSetting]]:
    """(key, A-setting, B-setting) for the four experiments of a quadruple (a, a', b, b')."""
    if len(settings) != 4:
        raise ConfigError(f"A CHSH experiment needs four settings (a, a', b, b'), got {len(settings)}")
    a, a_prime, b, b_prime = settings
    return [("ab", a, b), ("ab'", a, b_prime), ("a'b", a_prime, b), ("a'b'", a_prime, b_prime)]


def _single_pass(spec: GeneratorSpec, setting_a: LabeledSetting, setting_b: LabeledSetting,
                 n_pairs: int, window: CoincidenceWindow, seed: int, run: int) -> CorrelationEstimate:
    streams = generate_pair_streams(spec, setting_a, setting_b, n_pairs, seed, run=run)
    return estimate_correlation(match_coincidences(*streams, window))


async def arun_chsh_experiment(spec: GeneratorSpec, settings: Sequence[LabeledSetting], n_pairs: int,
                               window: Union[CoincidenceWindow, float, str, None], seed: int,
                               simultaneous_jobs: int = DEFAULT_SIMULTANEOUS_JOBS) -> CHSHResult:
    """
    Four independent generation + matching + estimation passes.

    Pass k uses run index k, so the passes share no random state.
    """
    window = CoincidenceWindow.coerce(window)
    plan = chsh_setting_pairs(settings)
    jobs = [partial(_single_pass, spec, sa, sb, n_pairs, window, seed, run)
            for run, (_, sa, sb) in enumerate(plan)]
    estimates = await gather_limited(jobs, simultaneous_jobs)
    result = assemble_chsh({key: est for (key, _, _), est in zip(plan, estimates)})
    logger.info("CHSH with %s model: S = %.4f ± %.4f", spec.kind, result.S, result.S_std_error)
    return result


def run_chsh_experiment(spec: GeneratorSpec, settings: Sequence[LabeledSetting], n_pairs: int,
                        window: Union[CoincidenceWindow, float, str, None], seed: int,
                        simultaneous_jobs: int = DEFAULT_SIMULTANEOUS_JOBS) -> CHSHResult:
    return asyncio.run(arun_chsh_experiment(spec, settings, n_pairs, window, seed, simultaneous_jobs))


def chsh_from_streams(streams: Dict[str, Tuple[StationStream, StationStream]],
                      window: Union[CoincidenceWindow, float, str, None]) -> CHSHResult:
    """CHSH result from four stored experiments keyed like ``CHSH_KEYS``."""
    window = CoincidenceWindow.coerce(window)
    return assemble_chsh({key: estimate_correlation(match_coincidences(*pair, window))
                          for key, pair in streams.items()})


async def ascan_correlation(spec: GeneratorSpec, deltas: Sequence[float], n_pairs: int,
                            window: Union[CoincidenceWindow, float, str, None], seed: int,
                            simultaneous_jobs: int = DEFAULT_SIMULTANEOUS_JOBS) -> List[ScanPoint]:
    """Ê(0, Δ) for every Δ of the grid (spin angles, radians); point k uses run index k."""
    window = CoincidenceWindow.coerce(window)
    jobs = [partial(_single_pass, spec, LabeledSetting("a", 0.0), LabeledSetting("b", float(delta)),
                    n_pairs, window, seed, run)
            for run, delta in enumerate(deltas)]
    estimates = await gather_limited(jobs, simultaneous_jobs)
    return [ScanPoint(delta=float(delta), expected=singlet_correlation(0.0, delta), estimate=est)
            for delta, est in zip(deltas, estimates)]


def scan_correlation(spec: GeneratorSpec, deltas: Sequence[float], n_pairs: int,
                     window: Union[CoincidenceWindow, float, str, None], seed: int,
                     simultaneous_jobs: int = DEFAULT_SIMULTANEOUS_JOBS) -> List[ScanPoint]:
    return asyncio.run(ascan_correlation(spec, deltas, n_pairs, window, seed, simultaneous_jobs))


__all__ = ['CoincidenceWindow', 'MatchedPairs', 'CorrelationEstimate', 'CHSHResult', 'ScanPoint',
           'match_coincidences', 'estimate_correlation', 'chsh_statistic', 'assemble_chsh',
           'station_marginals', 'chsh_setting_pairs', 'run_chsh_experiment', 'arun_chsh_experiment',
           'chsh_from_streams', 'scan_correlation', 'ascan_correlation', 'UNWINDOWED', 'CHSH_KEYS']
