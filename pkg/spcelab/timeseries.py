"""
Fine-structure analysis of a time series: descriptive statistics, ACF/PACF,
AR(p) simulation, Yule-Walker fitting and order selection.
"""
import asyncio
import math
from dataclasses import dataclass
from functools import partial
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.signal import lfilter
from scipy.stats import kurtosis, norm, skew
from statsmodels.regression import linear_model
from statsmodels.tsa.stattools import acovf, levinson_durbin

from .logger import logger
from .parallel import DEFAULT_SIMULTANEOUS_JOBS, gather_limited
from .utils import (as_float_array, ConfigError, DataError, DegenerateSequence, iter_chunks,
                    NonStationaryModel, SingularSystem, Stream, derive_generator)

STATIONARITY_TOLERANCE = 1e-9
DEFAULT_BURN_IN = 1000
MIN_NORMAL_SCORES = 8
BAND_Z = 1.96
# prediction-error variances at or below this are treated as a perfectly predictable series
_SINGULAR_VARIANCE = 1e-14

AR2_COEFFICIENTS = (0.25, 0.5)
AR2_SAMPLE_SIZE = 500
AR2_REPORTED_ESTIMATE = (0.243, 0.487)
AR2_ACCEPTANCE_RADIUS = 0.12


@dataclass(frozen=True)
class TimeSeriesSample:
    """Ordered observations z_0..z_{n-1}, optionally with a known process mean."""
    values: np.ndarray
    known_mean: Optional[float] = None

    def __post_init__(self):
        values = as_float_array(self.values).copy()
        if values.size < 1:
            raise DataError("A time series needs at least one value.")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.known_mean is not None and not math.isfinite(self.known_mean):
            raise DataError(f"Known mean must be finite, got {self.known_mean}")

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def mean(self) -> float:
        return float(self.values.mean()) if self.known_mean is None else float(self.known_mean)


Series = Union[TimeSeriesSample, Sequence[float], np.ndarray]


def _sample(series: Series) -> TimeSeriesSample:
    return series if isinstance(series, TimeSeriesSample) else TimeSeriesSample(np.asarray(series, dtype=float))


@dataclass(frozen=True)
class ARModel:
    """Z_t - Φ1 Z_{t-1} - ... - Φp Z_{t-p} = a_t with Var(a_t) = noise_variance."""
    coefficients: Tuple[float, ...] = ()
    noise_variance: float = 1.0

    def __post_init__(self):
        coefficients = tuple(float(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coefficients)
        if not all(math.isfinite(c) for c in coefficients):
            raise ConfigError(f"AR coefficients must be finite, got {coefficients}")
        if not (math.isfinite(self.noise_variance) and self.noise_variance > 0):
            raise ConfigError(f"Noise variance must be positive, got {self.noise_variance}")
        if coefficients and any(coefficients):
            # np.roots takes the highest power first: -Φp z^p - ... - Φ1 z + 1
            roots = np.roots(np.r_[-np.asarray(coefficients)[::-1], 1.0])
            smallest = float(np.min(np.abs(roots))) if roots.size else math.inf
            if smallest <= 1.0 + STATIONARITY_TOLERANCE:
                raise NonStationaryModel(
                    f"AR{coefficients} is not stationary: characteristic root of modulus {smallest:.6g}")

    @property
    def order(self) -> int:
        return len(self.coefficients)


@dataclass(frozen=True)
class DescriptiveStats:
    n: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    min: float
    max: float


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray


@dataclass(frozen=True)
class NormalScores:
    theoretical: np.ndarray
    ordered: np.ndarray


@dataclass(frozen=True)
class CorrelogramReport:
    lags: np.ndarray
    acf: np.ndarray
    pacf: Optional[np.ndarray]
    band: float
    n: int


@dataclass(frozen=True)
class DurbinLevinsonResult:
    """PACF φ_kk for k = 1..K, the order-K coefficients and v_k/γ(0) for k = 0..K."""
    pacf: np.ndarray
    coefficients: np.ndarray
    variance_ratios: np.ndarray


def descriptive_stats(series: Series) -> DescriptiveStats:
    values = _sample(series).values
    n = values.shape[0]
    if n < 2:
        raise DataError(f"Descriptive statistics need n >= 2, got {n}")
    variance = float(values.var(ddof=1))
    if variance > 0:
        skewness = float(skew(values))
        excess = float(kurtosis(values, fisher=True))
    else:
        # shape moments of a constant series are reported as zero rather than NaN
        skewness, excess = 0.0, 0.0
    return DescriptiveStats(n=n, mean=float(values.mean()), variance=variance, skewness=skewness,
                            excess_kurtosis=excess, min=float(values.min()), max=float(values.max()))


def histogram(series: Series, bins: Union[int, str] = "auto") -> Histogram:
    values = _sample(series).values
    if values.max() == values.min():
        raise DegenerateSequence("Histogram of a series with zero range")
    counts, edges = np.histogram(values, bins=bins)
    return Histogram(edges=edges, counts=counts)


def normal_scores(series: Series) -> NormalScores:
    """Order statistics against standard-normal quantiles at (i - 3/8)/(n + 1/4)."""
    values = _sample(series).values
    n = values.shape[0]
    if n < MIN_NORMAL_SCORES:
        raise DataError(f"Normal scores need n >= {MIN_NORMAL_SCORES}, got {n}")
    positions = (np.arange(1, n + 1) - 0.375) / (n + 0.25)
    return NormalScores(theoretical=norm.ppf(positions), ordered=np.sort(values))


def time_plot(series: Series) -> Tuple[np.ndarray, np.ndarray]:
    """(t, z_t) pairs of the plain time plot."""
    values = _sample(series).values
    return np.arange(values.shape[0]), values


def lagged_pairs(series: Series, k: int) -> List[Tuple[float, float]]:
    values = _sample(series).values
    n = values.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"Lag must satisfy 1 <= k < n = {n}, got {k}")
    return [(float(a), float(b)) for a, b in zip(values[:n - k], values[k:])]


def autocovariance(series: Series, max_lag: int) -> np.ndarray:
    """γ̂(k) with the 1/n denominator for k = 0..max_lag."""
    sample = _sample(series)
    values = sample.values
    n = values.shape[0]
    if not 0 <= max_lag < n:
        raise ValueError(f"Max lag must satisfy 0 <= K < n = {n}, got {max_lag}")
    return acovf(values - sample.mean, adjusted=False, demean=False, fft=False, nlag=max_lag)


def _band(n: int) -> float:
    return BAND_Z / math.sqrt(n)


def acf(series: Series, max_lag: int) -> CorrelogramReport:
    sample = _sample(series)
    gamma = autocovariance(sample, max_lag)
    if gamma[0] <= 0:
        raise DegenerateSequence("Autocorrelation of a series with zero sample variance")
    rho = gamma / gamma[0]
    rho[0] = 1.0
    return CorrelogramReport(lags=np.arange(max_lag + 1), acf=rho, pacf=None, band=_band(len(sample)),
                             n=len(sample))


def durbin_levinson(rho: Sequence[float]) -> DurbinLevinsonResult:
    """
    Solve the Yule-Walker systems of orders 1..K recursively from ρ(0..K).

    Raises SingularSystem when a prediction-error variance collapses to zero,
    i.e. the autocorrelation sequence is not positive definite.
    """
    rho = np.asarray(rho, dtype=float)
    order = rho.shape[0] - 1
    if order < 1:
        return DurbinLevinsonResult(pacf=np.zeros(0), coefficients=np.zeros(0), variance_ratios=np.ones(1))
    with np.errstate(divide="ignore", invalid="ignore"):
        _, coefficients, partials, variances, _ = levinson_durbin(rho / rho[0], nlags=order, isacov=True)
    ratios = np.r_[1.0, variances[1:]]
    # v_{k-1} divides the step to order k
    collapsed = np.flatnonzero(~(ratios[:order] > _SINGULAR_VARIANCE))
    if collapsed.size:
        raise SingularSystem(f"Yule-Walker system of order {int(collapsed[0]) + 1} is singular")
    return DurbinLevinsonResult(pacf=np.asarray(partials[1:]), coefficients=np.asarray(coefficients),
                                variance_ratios=ratios)


def correlogram(series: Series, max_lag: int) -> CorrelogramReport:
    report = acf(series, max_lag)
    try:
        pacf_values = durbin_levinson(report.acf).pacf
    except SingularSystem:
        raise DegenerateSequence("Partial autocorrelation undefined for a perfectly predictable series")
    return CorrelogramReport(lags=report.lags, acf=report.acf, pacf=np.r_[1.0, pacf_values],
                             band=report.band, n=report.n)


def pacf(series: Series, max_lag: int) -> CorrelogramReport:
    """Correlogram with φ̂_kk at lags 1..K; the lag-0 entry is 1 by convention."""
    return correlogram(series, max_lag)


def yule_walker(rho: Sequence[float], order: int, gamma0: float = 1.0) -> ARModel:
    """AR(order) model whose autocorrelation matches ρ(0..order)."""
    rho = np.asarray(rho, dtype=float)
    if order < 0 or rho.shape[0] < order + 1:
        raise ValueError(f"Need rho(0..{order}), got {rho.shape[0]} values")
    if gamma0 <= 0:
        raise SingularSystem("Yule-Walker fit of a series with zero variance")
    if order == 0:
        return ARModel((), gamma0)
    result = durbin_levinson(rho[:order + 1])
    noise = float(result.variance_ratios[order] * gamma0)
    if noise <= 0:
        raise SingularSystem("Yule-Walker fit gives a non-positive noise variance")
    return ARModel(tuple(result.coefficients.tolist()), noise)


def fit_ar(series: Series, order: int) -> ARModel:
    """Yule-Walker estimate of an AR(order) model."""
    sample = _sample(series)
    n = len(sample)
    if order < 0:
        raise ValueError(f"AR order must be non-negative, got {order}")
    if n < 10 * order or n < 2:
        raise DataError(f"Fitting AR({order}) needs n >= {max(10 * order, 2)}, got {n}")
    gamma = autocovariance(sample, 0)
    if gamma[0] <= 0:
        raise SingularSystem("Yule-Walker fit of a constant series")
    if order == 0:
        return ARModel((), float(gamma[0]))
    try:
        with np.errstate(invalid="ignore"):
            coefficients, sigma = linear_model.yule_walker(sample.values - sample.mean, order=order,
                                                           method="mle", demean=False)
    except np.linalg.LinAlgError:
        raise SingularSystem(f"Yule-Walker system of order {order} is singular")
    noise = float(sigma) ** 2
    if not (math.isfinite(noise) and noise > 0):
        raise SingularSystem("Yule-Walker fit gives a non-positive noise variance")
    model = ARModel(tuple(np.asarray(coefficients).tolist()), noise)
    logger.debug("Fitted AR(%d): %s, noise variance %.4g", order, model.coefficients, model.noise_variance)
    return model


def selection_band(n: int, max_lag: int, simultaneous: bool = True, alpha: float = 0.05) -> float:
    """
    PACF exit threshold for order selection.

    The simultaneous band splits ``alpha`` over the ``max_lag`` lags, so white
    noise selects order 0 with probability about 1 - alpha.
    """
    if simultaneous:
        return float(norm.ppf(1.0 - alpha / (2.0 * max_lag)) / math.sqrt(n))
    return float(norm.ppf(1.0 - alpha / 2.0) / math.sqrt(n))


def select_order(series: Series, max_lag: int, simultaneous: bool = True, alpha: float = 0.05) -> int:
    """Largest lag whose PACF leaves the band; 0 when every lag stays inside."""
    sample = _sample(series)
    n = len(sample)
    if not 1 <= max_lag < n / 4:
        raise ValueError(f"Order selection needs 1 <= K_max < n/4 = {n / 4}, got {max_lag}")
    band = selection_band(n, max_lag, simultaneous, alpha)
    partial_acf = correlogram(sample, max_lag).pacf[1:]
    outside = np.flatnonzero(np.abs(partial_acf) > band)
    return int(outside[-1] + 1) if outside.size else 0


def theoretical_acf(model: ARModel, max_lag: int) -> np.ndarray:
    """ρ(0..max_lag) from the Yule-Walker equations and the AR recursion."""
    if max_lag < 0:
        raise ValueError(f"Max lag must be non-negative, got {max_lag}")
    phi = np.asarray(model.coefficients)
    p = phi.shape[0]
    rho = np.zeros(max(max_lag, p) + 1)
    rho[0] = 1.0
    if p:
        matrix = np.eye(p)
        rhs = np.zeros(p)
        for k in range(1, p + 1):
            for i in range(1, p + 1):
                lag = abs(k - i)
                if lag == 0:
                    rhs[k - 1] += phi[i - 1]
                else:
                    matrix[k - 1, lag - 1] -= phi[i - 1]
        rho[1:p + 1] = np.linalg.solve(matrix, rhs)
        for k in range(p + 1, rho.shape[0]):
            rho[k] = phi @ rho[k - 1:k - p - 1:-1]
    return rho[:max_lag + 1]


def theoretical_variance(model: ARModel) -> float:
    """γ(0) = σ² / (1 - Σ Φi ρ(i))."""
    if model.order == 0:
        return model.noise_variance
    rho = theoretical_acf(model, model.order)
    return float(model.noise_variance / (1.0 - np.asarray(model.coefficients) @ rho[1:]))


def simulate_ar(model: ARModel, n: int, seed: int, burn_in: int = DEFAULT_BURN_IN, run: int = 0) -> TimeSeriesSample:
    """
    Gaussian AR(p) path of length n started from zeros, first ``burn_in`` values dropped.

    Noise is drawn chunk by chunk from the (run, NOISE, chunk) substreams.
    """
    if n < 1:
        raise ConfigError(f"Series length must be positive, got {n}")
    if burn_in < 0:
        raise ConfigError(f"Burn-in must be non-negative, got {burn_in}")
    total = n + burn_in
    noise = np.empty(total)
    for chunk, start, stop in iter_chunks(total):
        rng = derive_generator(seed, run, Stream.NOISE, chunk)
        noise[start:stop] = rng.standard_normal(stop - start)
    noise *= math.sqrt(model.noise_variance)
    path = lfilter([1.0], np.r_[1.0, -np.asarray(model.coefficients)], noise)
    return TimeSeriesSample(path[burn_in:])


@dataclass(frozen=True)
class ReproductionReport:
    """Outcome of repeating the AR(2) simulate, select, fit pipeline over many seeds."""
    n_runs: int
    n: int
    true_coefficients: Tuple[float, ...]
    selected_orders: Tuple[int, ...]
    estimates: np.ndarray
    radius: float
    within_radius: int
    eligible: int
    band_low: np.ndarray
    band_high: np.ndarray
    reference_estimate: Tuple[float, ...]
    reference_inside_band: bool

    @property
    def order_hits(self) -> int:
        return sum(1 for p in self.selected_orders if p == len(self.true_coefficients))


def _reproduction_run(model: ARModel, n: int, seed: int, run: int, max_lag: int,
                      burn_in: int) -> Tuple[int, Tuple[float, ...]]:
    sample = simulate_ar(model, n, seed, burn_in=burn_in, run=run)
    order = select_order(sample, max_lag)
    return order, fit_ar(sample, model.order).coefficients


async def areproduce_ar2_experiment(n_runs: int = 100, seed: int = 0, n: int = AR2_SAMPLE_SIZE,
                                    coefficients: Tuple[float, ...] = AR2_COEFFICIENTS,
                                    radius: float = AR2_ACCEPTANCE_RADIUS, max_lag: int = 20,
                                    burn_in: int = DEFAULT_BURN_IN,
                                    reference_estimate: Tuple[float, ...] = AR2_REPORTED_ESTIMATE,
                                    simultaneous_jobs: int = DEFAULT_SIMULTANEOUS_JOBS) -> ReproductionReport:
    if n_runs < 1:
        raise ConfigError(f"Need at least one run, got {n_runs}")
    model = ARModel(coefficients)
    if len(reference_estimate) != model.order:
        raise ConfigError("Reference estimate must have one entry per coefficient")
    max_lag = min(max_lag, max(1, math.ceil(n / 4) - 1))
    jobs = [partial(_reproduction_run, model, n, seed, run, max_lag, burn_in) for run in range(n_runs)]
    results = await gather_limited(jobs, simultaneous_jobs)

    orders = tuple(order for order, _ in results)
    estimates = np.array([est for _, est in results], dtype=float).reshape(n_runs, model.order)
    truth = np.asarray(coefficients)
    eligible = np.array([order >= model.order for order in orders])
    inside = np.all(np.abs(estimates - truth) <= radius, axis=1)
    low, high = np.percentile(estimates, [2.5, 97.5], axis=0)
    reference = np.asarray(reference_estimate, dtype=float)
    report = ReproductionReport(
        n_runs=n_runs, n=n, true_coefficients=tuple(coefficients), selected_orders=orders,
        estimates=estimates, radius=radius, within_radius=int(np.sum(inside & eligible)),
        eligible=int(eligible.sum()), band_low=low, band_high=high,
        reference_estimate=tuple(reference_estimate),
        reference_inside_band=bool(np.all((reference >= low) & (reference <= high))))
    logger.info("AR reproduction: order %d selected in %d/%d runs, %d/%d estimates within %.3g",
                model.order, report.order_hits, n_runs, report.within_radius, report.eligible, radius)
    return report


def reproduce_ar2_experiment(*args, **kwargs) -> ReproductionReport:
    """Blocking front end of ``areproduce_ar2_experiment``."""
    return asyncio.run(areproduce_ar2_experiment(*args, **kwargs))


__all__ = ['TimeSeriesSample', 'ARModel', 'DescriptiveStats', 'Histogram', 'NormalScores',
           'CorrelogramReport', 'DurbinLevinsonResult', 'ReproductionReport', 'descriptive_stats',
           'histogram', 'normal_scores', 'time_plot', 'lagged_pairs', 'autocovariance', 'acf', 'pacf',
           'correlogram', 'durbin_levinson', 'yule_walker', 'fit_ar', 'selection_band', 'select_order',
           'theoretical_acf', 'theoretical_variance', 'simulate_ar', 'areproduce_ar2_experiment',
           'reproduce_ar2_experiment']
