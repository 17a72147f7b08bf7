from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from .coincidence_analysis import UNWINDOWED
from .file_ops import read_msgpack, write_msgpack
from .hv_models import CalibrationReport, ContextualEventModel
from .logger import logger
from .utils import ConfigError, DataError

CalibrationEntry = Dict[str, Any]


def _entry_key(entry: CalibrationEntry) -> Tuple:
    return (entry["seed"], entry["n_pairs"], entry["t0"], entry["pair_spacing"],
            tuple(cell["exponent"] for cell in entry["cells"]),
            tuple(str(cell["window"]) for cell in entry["cells"]))


class CalibrationStore:
    def __init__(self, msgpack: Optional[Path]):
        """
        Keeps calibration tables of the contextual model between runs.

        :param msgpack: Path to the store file. If None, tables only live in memory.
        """
        self.msgpack = Path(msgpack) if msgpack is not None else None
        self.entries = self._load_entries()
        logger.debug("Loaded %s calibration tables",
                     len(self.entries) if self.msgpack else "0 (not storing data in a file)")

    def _load_entries(self) -> List[CalibrationEntry]:
        if self.msgpack and self.msgpack.exists() and self.msgpack.stat().st_size > 0:
            try:
                entries = read_msgpack(self.msgpack)
            except DataError:
                logger.warning("Failed to decode calibration store %s, starting empty.", self.msgpack)
                return []
            if not isinstance(entries, list):
                logger.warning("Calibration store %s has an unexpected layout, starting empty.", self.msgpack)
                return []
            return entries
        return []

    def _write_data(self):
        if self.msgpack:
            write_msgpack(self.msgpack, self.entries)

    def add_report(self, report: CalibrationReport, model: ContextualEventModel) -> CalibrationEntry:
        """Stores a calibration table; a table with the same seed, size, model and grid is replaced."""
        table = report.to_dict()
        entry = {
            "seed": report.seed,
            "n_pairs": report.n_pairs,
            "t0": model.t0,
            "pair_spacing": model.pair_spacing,
            "deltas": table["deltas_rad"],
            "cells": [{"exponent": c["exponent"], "window": c["window"], "max_deviation": c["max_deviation"],
                       "coincidence_fraction": c["coincidence_fraction"]} for c in table["cells"]],
            "best": table["best"],
        }
        key = _entry_key(entry)
        before = len(self.entries)
        self.entries = [e for e in self.entries if _entry_key(e) != key]
        self.entries.append(entry)
        logger.debug("Stored calibration table (%d replaced)", before - len(self.entries) + 1)
        self._write_data()
        return entry

    def best(self, t0: Optional[float] = None, pair_spacing: Optional[float] = None) -> Tuple[float, Optional[float]]:
        """
        (d, W) of the lowest max deviation over all stored cells.

        W is None for the unwindowed row. Only tables recorded with the given
        T0 and pair spacing are considered when those are passed.
        """
        candidates = [
            cell for entry in self.entries
            if (t0 is None or entry["t0"] == t0) and (pair_spacing is None or entry["pair_spacing"] == pair_spacing)
            for cell in entry["cells"]
        ]
        if not candidates:
            raise ConfigError("No calibration table matches this model; run `calibrate` first.")
        cell = min(candidates, key=lambda c: c["max_deviation"])
        window = None if cell["window"] == UNWINDOWED else float(cell["window"])
        logger.info("Using calibrated d = %g, W = %s (max deviation %.4f)",
                    cell["exponent"], UNWINDOWED if window is None else window, cell["max_deviation"])
        return float(cell["exponent"]), window

    def rm_all_entries(self):
        self.entries.clear()
        self._write_data()

    def __len__(self):
        return len(self.entries)


__all__ = ['CalibrationStore', 'CalibrationEntry']
