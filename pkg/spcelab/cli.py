"""
Command-line front end: ``spcelab <subcommand> [options]``.

Exit codes: 0 on success, 2 on a usage or config error, 3 on a data or IO error.
"""
import argparse
import asyncio
from typing import Any, Dict, List, Optional, Sequence

from .config import ExperimentConfig, EXPERIMENT_KINDS, merge_config
from .logger import logger, set_verbosity
from .manager import ExperimentManager
from .utils import ConfigError, SpceLabError, parse_float_list
from .version import describe_version

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags given on the command line override it")
    parser.add_argument("--seed", type=int, help="master seed (required here or in the config)")
    parser.add_argument("--out", dest="output_dir", help="output directory (created if missing)")
    parser.add_argument("--jobs", dest="simultaneous_jobs", type=int, help="simultaneous worker jobs")
    parser.add_argument("--timing", action="store_true", default=None, help="include wall time in the report")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")


def _add_model(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", dest="model_kind", choices=("qt", "factorizable", "deterministic", "contextual"))
    parser.add_argument("--angles", help="four spin angles a,a',b,b' in degrees")
    parser.add_argument("--n", dest="n_pairs", type=int, help="pairs per setting pair")
    parser.add_argument("--t0", type=float, help="contextual model delay scale")
    parser.add_argument("--d", type=float, help="contextual model delay exponent")
    parser.add_argument("--pair-spacing", type=float, help="time between emitted pairs")
    parser.add_argument("--n-labels", type=int, help="hidden-variable labels of a random model")
    parser.add_argument("--model-seed", type=int, help="seed of a random model (default: --seed)")
    parser.add_argument("--model-index", type=int, help="index of a random model")


def _add_window(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--window", help="coincidence window width or 'unwindowed'")
    parser.add_argument("--calibration", help="calibration store to take d and W from (contextual model)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spcelab",
                                     description="Monte Carlo lab for spin polarization correlation experiments.")
    parser.add_argument("--version", action="version", version=describe_version())
    subparsers = parser.add_subparsers(dest="kind", metavar="{" + ",".join(EXPERIMENT_KINDS) + "}")
    subparsers.required = True

    simulate = subparsers.add_parser("simulate", help="write event logs for the four CHSH setting pairs")
    _add_common(simulate)
    _add_model(simulate)

    chsh = subparsers.add_parser("chsh", help="estimate the CHSH statistic")
    _add_common(chsh)
    _add_model(chsh)
    _add_window(chsh)
    chsh.add_argument("--logs", help="directory of event logs written by `simulate`")

    scan = subparsers.add_parser("scan", help="sweep the setting difference and estimate E(Δ)")
    _add_common(scan)
    _add_model(scan)
    _add_window(scan)
    scan.add_argument("--deltas", help="degrees as start:stop:count or a comma list")

    purity = subparsers.add_parser("purity", help="split-sample purity tests on a series")
    _add_common(purity)
    purity.add_argument("--input", help="CSV file with a header row")
    purity.add_argument("--column", help="column of --input to test")
    purity.add_argument("--event-log", help="event log whose outcome stream is tested")
    purity.add_argument("--station", choices=("A", "B"), help="station of --event-log")
    purity.add_argument("--splits", type=int, help="number of contiguous blocks")
    purity.add_argument("--alpha", type=float, help="family-wise level")

    timeseries = subparsers.add_parser("timeseries", help="descriptives, correlogram, order selection and AR fit")
    _add_common(timeseries)
    timeseries.add_argument("--input", help="CSV file with a header row")
    timeseries.add_argument("--column", help="column of --input")
    timeseries.add_argument("--maxlag", type=int, help="largest correlogram lag")
    timeseries.add_argument("--fit", type=int, help="AR order to fit (default: the selected order)")
    timeseries.add_argument("--bins", help="histogram bins: a count or a numpy rule")
    timeseries.add_argument("--simulate", help="AR coefficients to simulate instead of reading --input")
    timeseries.add_argument("--length", type=int, help="length of the simulated series")
    timeseries.add_argument("--burn-in", type=int, help="discarded warm-up values of the simulation")
    timeseries.add_argument("--reproduce", type=int, help="repeat simulate, select, fit over this many seeds")

    calibrate = subparsers.add_parser("calibrate", help="grid search (d, W) of the contextual model")
    _add_common(calibrate)
    _add_model(calibrate)
    calibrate.add_argument("--exponents", help="comma list of delay exponents")
    calibrate.add_argument("--windows", help="comma list of window widths, 'unwindowed' allowed")
    calibrate.add_argument("--store", help="msgpack calibration store to update")
    return parser


def _set(target: Dict[str, Any], key: str, value: Any) -> None:
    if value is not None:
        target[key] = value


def _window_value(text: str) -> Any:
    if text.strip().lower() == "unwindowed":
        return "unwindowed"
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"Invalid window: {text!r}")


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    """Raw config values given on the command line."""
    values = vars(args)
    raw: Dict[str, Any] = {"kind": args.kind}
    for key in ("seed", "output_dir", "simultaneous_jobs", "timing", "n_pairs", "logs", "calibration"):
        _set(raw, key, values.get(key))
    if values.get("angles") is not None:
        raw["angles"] = parse_float_list(args.angles, "angle")
    if values.get("window") is not None:
        raw["window"] = _window_value(args.window)

    model: Dict[str, Any] = {}
    for key, name in (("kind", "model_kind"), ("t0", "t0"), ("d", "d"), ("pair_spacing", "pair_spacing"),
                      ("n_labels", "n_labels"), ("model_seed", "model_seed"), ("model_index", "model_index")):
        _set(model, key, values.get(name))
    if model:
        raw["model"] = model

    if args.kind == "scan" and args.deltas is not None:
        raw["scan"] = {"deltas": args.deltas}
    elif args.kind == "purity":
        purity: Dict[str, Any] = {}
        for key in ("input", "column", "event_log", "station", "splits", "alpha"):
            _set(purity, key, values.get(key))
        raw["purity"] = purity
    elif args.kind == "timeseries":
        section: Dict[str, Any] = {}
        for key in ("input", "column", "maxlag", "fit", "reproduce"):
            _set(section, key, values.get(key))
        if args.bins is not None:
            section["bins"] = int(args.bins) if args.bins.isdigit() else args.bins
        simulate: Dict[str, Any] = {}
        if args.simulate is not None:
            simulate["coefficients"] = parse_float_list(args.simulate, "coefficient")
        _set(simulate, "n", args.length)
        _set(simulate, "burn_in", args.burn_in)
        if simulate:
            section["simulate"] = simulate
        raw["timeseries"] = section
    elif args.kind == "calibrate":
        calibrate: Dict[str, Any] = {}
        if args.exponents is not None:
            calibrate["exponents"] = parse_float_list(args.exponents, "exponent")
        if args.windows is not None:
            calibrate["windows"] = [_window_value(w) for w in args.windows.split(",") if w.strip()]
        _set(calibrate, "store", args.store)
        raw["calibrate"] = calibrate
        raw.setdefault("model", {}).setdefault("kind", "contextual")
    return raw


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    overrides = overrides_from_args(args)
    if args.config:
        return ExperimentConfig.from_file(args.config, overrides)
    return ExperimentConfig.from_dict(merge_config({}, overrides))


async def _run(config: ExperimentConfig) -> Dict[str, Any]:
    manager = await ExperimentManager(config)
    return await manager.run()


def run_cli(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_CONFIG
    set_verbosity(args.verbose, args.quiet)

    try:
        config = load_config(args)
    except (ConfigError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except OSError as e:
        logger.error("%s", e)
        return EXIT_DATA

    try:
        document = asyncio.run(_run(config))
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_CONFIG
    except (SpceLabError, OSError, ValueError) as e:
        logger.error("%s", e)
        return EXIT_DATA
    logger.info("%s finished, config hash %s", config.kind, document["config_hash"][:12])
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> None:
    raise SystemExit(run_cli(argv))


__all__ = ['run_cli', 'build_parser', 'overrides_from_args', 'load_config', 'main',
           'EXIT_OK', 'EXIT_CONFIG', 'EXIT_DATA']
