import math
import time
from dataclasses import asdict, replace
from functools import partial
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from .coincidence_analysis import (CHSHResult, CHSH_KEYS, UNWINDOWED, arun_chsh_experiment, ascan_correlation,
                                   chsh_from_streams, chsh_setting_pairs, station_marginals)
from .config import ExperimentConfig
from .data_manager import CalibrationStore
from .file_ops import (EventLog, emit_report, read_csv_column, read_event_log, write_event_log, write_plot_csv,
                       write_series_csv)
from .hv_models import CALIBRATION_DELTAS, GeneratorSpec, acalibrate_contextual, generate_pair_streams
from .logger import logger
from .parallel import gather_limited
from .purity_tests import outcome_stream_purity, split_sample_purity
from .timeseries import (TimeSeriesSample, areproduce_ar2_experiment, correlogram, descriptive_stats, fit_ar,
                         histogram, lagged_pairs, normal_scores, select_order, simulate_ar, time_plot,
                         AR2_COEFFICIENTS, AR2_SAMPLE_SIZE)
from .utils import DataError, DegenerateSequence

TSIRELSON_BOUND = 2.0 * math.sqrt(2.0)
LOCAL_BOUND = 2.0


def event_log_name(key: str) -> str:
    """File name of the event log for a CHSH setting pair; a prime is spelled ``p``."""
    return f"events_{key.replace(chr(39), 'p')}.csv"


def _window_label(width: Optional[float]) -> Any:
    return UNWINDOWED if width is None else width


def _chsh_results(result: CHSHResult) -> Dict[str, Any]:
    return {
        "S": result.S,
        "S_std_error": result.S_std_error,
        "violation_sigmas": result.violation_sigmas,
        "local_bound": LOCAL_BOUND,
        "tsirelson_bound": TSIRELSON_BOUND,
        "estimates": {key: asdict(est) for key, est in result.estimates.items()},
    }


class ExperimentManager:
    def __init__(self, config: ExperimentConfig) -> None:
        """
        Runs one validated experiment recipe and writes its artifacts.

        :param config: Validated experiment config. Output files go below ``config.output_dir``.
        Await the instance once to resolve the calibration store before calling ``run``.
        """
        self.config = config
        self.window = config.window
        self.spec: Optional[GeneratorSpec] = None

    async def _async_init(self):
        config = self.config
        if config.calibration is not None and config.model.kind == "contextual" and config.kind != "calibrate":
            store = CalibrationStore(config.calibration)
            d, window = store.best(t0=config.model.t0, pair_spacing=config.model.pair_spacing)
            self.config = replace(config, model=replace(config.model, d=d), window=window)
            self.window = window
        self.spec = self.config.generator()
        return self

    def __await__(self):
        return self._async_init().__await__()

    @property
    def output_dir(self) -> Path:
        return self.config.output_dir

    async def run(self) -> Dict[str, Any]:
        """Runs the experiment and writes its report; returns the report document."""
        if self.spec is None:
            await self._async_init()
        runner = {
            "simulate": self._simulate,
            "chsh": self._chsh,
            "scan": self._scan,
            "purity": self._purity,
            "timeseries": self._timeseries,
            "calibrate": self._calibrate,
        }[self.config.kind]
        logger.info("Running %s experiment (seed %d)", self.config.kind, self.config.seed)
        started = time.perf_counter()
        results = await runner()
        wall_time = time.perf_counter() - started if self.config.timing else None
        return emit_report(results, self.output_dir / f"{self.config.kind}_report.json",
                           self.config.echo(), wall_time=wall_time)

    async def _simulate(self) -> Dict[str, Any]:
        config = self.config
        plan = chsh_setting_pairs(config.settings())
        jobs = [partial(generate_pair_streams, self.spec, sa, sb, config.n_pairs, config.seed, run)
                for run, (_, sa, sb) in enumerate(plan)]
        all_streams = await gather_limited(jobs, config.simultaneous_jobs)

        logs, marginals = {}, {}
        for (key, _, _), streams in zip(plan, all_streams):
            name = event_log_name(key)
            write_event_log(self.output_dir / name, EventLog(*streams))
            logs[key] = name
            marginals[key] = {"A": station_marginals(streams[0])[0], "B": station_marginals(streams[1])[0]}
        return {"model": self.spec.kind, "n_pairs": config.n_pairs, "event_logs": logs, "marginals": marginals}

    async def _chsh(self) -> Dict[str, Any]:
        config = self.config
        if config.logs is not None:
            streams = {key: read_event_log(config.logs / event_log_name(key)).streams for key in CHSH_KEYS}
            result = chsh_from_streams(streams, self.window)
            source = "event_logs"
        else:
            result = await arun_chsh_experiment(self.spec, config.settings(), config.n_pairs, self.window,
                                                config.seed, config.simultaneous_jobs)
            source = "generated"
        results = _chsh_results(result)
        results.update({"source": source, "model": self.spec.kind, "window": _window_label(self.window)})
        if self.spec.kind == "contextual":
            results["delay_exponent"] = self.spec.model.d
        return results

    async def _scan(self) -> Dict[str, Any]:
        config = self.config
        points = await ascan_correlation(self.spec, config.scan_deltas, config.n_pairs, self.window,
                                         config.seed, config.simultaneous_jobs)
        delta_deg = [math.degrees(p.delta) for p in points]
        e_hat = np.array([p.estimate.e_hat for p in points])
        errors = np.array([p.estimate.std_error for p in points])
        write_plot_csv(self.output_dir / "scan.csv", delta_deg, e_hat, e_hat - 1.96 * errors, e_hat + 1.96 * errors)
        write_plot_csv(self.output_dir / "scan_expected.csv", delta_deg, [p.expected for p in points])
        deviations = [abs(p.deviation) for p in points]
        scaled = [d / e if e > 0 else (0.0 if d == 0 else math.inf) for d, e in zip(deviations, errors)]
        return {
            "model": self.spec.kind,
            "window": _window_label(self.window),
            "points": [{"delta_rad": p.delta, "delta_deg": deg, "expected": p.expected, **asdict(p.estimate),
                        "deviation": p.deviation} for p, deg in zip(points, delta_deg)],
            "max_deviation": max(deviations),
            "max_deviation_in_std_errors": max(scaled),
        }

    async def _purity(self) -> Dict[str, Any]:
        section = self.config.purity
        if section.event_log is not None:
            log = read_event_log(section.event_log)
            stream = log.stream_a if section.station == "A" else log.stream_b
            report = outcome_stream_purity(stream.outcomes, section.splits, section.alpha)
            source = {"event_log": str(section.event_log), "station": section.station}
        else:
            series = read_csv_column(section.input, section.column)
            report = split_sample_purity(series, section.splits, section.alpha)
            source = {"input": str(section.input), "column": section.column}
        return {"source": source, "report": asdict(report)}

    def _load_series(self) -> Optional[TimeSeriesSample]:
        section = self.config.timeseries
        if section.simulate is not None:
            sim = section.simulate
            sample = simulate_ar(sim.model(), sim.n, self.config.seed, burn_in=sim.burn_in)
            write_series_csv(self.output_dir / "series.csv", sample.values)
            return sample
        if section.input is not None:
            return TimeSeriesSample(read_csv_column(section.input, section.column))
        return None

    def _analyse_series(self, sample: TimeSeriesSample) -> Dict[str, Any]:
        section = self.config.timeseries
        n = len(sample)
        out = self.output_dir
        results: Dict[str, Any] = {"descriptive": asdict(descriptive_stats(sample))}

        t, z = time_plot(sample)
        write_plot_csv(out / "time_plot.csv", t, z)
        for k in (1, 2):
            if k < n:
                write_plot_csv(out / f"lagged_{k}.csv", *zip(*lagged_pairs(sample, k)))
        try:
            hist = histogram(sample, section.bins)
            results["histogram"] = asdict(hist)
            write_plot_csv(out / "histogram.csv", 0.5 * (hist.edges[:-1] + hist.edges[1:]), hist.counts)
        except DegenerateSequence as e:
            logger.warning("Skipping histogram: %s", e.message)
            results["histogram"] = None
        if n >= 8:
            scores = normal_scores(sample)
            write_plot_csv(out / "normal_scores.csv", scores.theoretical, scores.ordered)

        max_lag = min(section.maxlag, n - 1)
        report = correlogram(sample, max_lag)
        results["correlogram"] = asdict(report)
        write_plot_csv(out / "acf.csv", report.lags, report.acf, -report.band, report.band)
        write_plot_csv(out / "pacf.csv", report.lags[1:], report.pacf[1:], -report.band, report.band)

        selection_lag = min(section.maxlag, math.ceil(n / 4) - 1)
        if selection_lag >= 1:
            results["selected_order"] = select_order(sample, selection_lag)
        else:
            logger.warning("Series of length %d is too short for order selection", n)
            results["selected_order"] = None
        order = section.fit if section.fit is not None else results["selected_order"]
        if order is not None:
            model = fit_ar(sample, order)
            results["fit"] = {"order": model.order, "coefficients": list(model.coefficients),
                              "noise_variance": model.noise_variance}
        return results

    async def _timeseries(self) -> Dict[str, Any]:
        section = self.config.timeseries
        results: Dict[str, Any] = {}
        sample = self._load_series()
        if sample is not None:
            results.update(self._analyse_series(sample))
        if section.reproduce:
            sim = section.simulate
            report = await areproduce_ar2_experiment(
                n_runs=section.reproduce, seed=self.config.seed,
                n=sim.n if sim else AR2_SAMPLE_SIZE,
                coefficients=sim.coefficients if sim else AR2_COEFFICIENTS,
                max_lag=section.maxlag, simultaneous_jobs=self.config.simultaneous_jobs,
                **({"burn_in": sim.burn_in} if sim else {}))
            results["reproduction"] = {**asdict(report), "order_hits": report.order_hits}
        if not results:
            raise DataError("Nothing to analyse.")
        return results

    async def _calibrate(self) -> Dict[str, Any]:
        config = self.config
        section = config.calibrate
        model = self.spec.model
        report = await acalibrate_contextual(model, section.exponents, section.windows, config.n_pairs,
                                             config.seed, CALIBRATION_DELTAS, config.simultaneous_jobs)
        if section.store is not None:
            CalibrationStore(section.store).add_report(report, model)
        return report.to_dict()


__all__ = ['ExperimentManager', 'event_log_name', 'TSIRELSON_BOUND', 'LOCAL_BOUND']
