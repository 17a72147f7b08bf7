import csv
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import msgpack
import numpy as np
import orjson

from .hv_models import StationRecord, StationStream
from .logger import logger
from .utils import DataError
from .version import describe_version

EVENT_LOG_HEADER = ("pair_id", "station", "setting_label", "setting_rad", "outcome", "time_tag")
REPORT_SCHEMA = 1
REPORT_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_APPEND_NEWLINE

PathLike = Union[str, Path]


def _format_float(value: float) -> str:
    # repr round-trips a float64 exactly (17 significant digits at most)
    return repr(float(value))


@dataclass(frozen=True)
class EventLog:
    """Both stations of one experiment; rows are ordered by (station, pair_id)."""
    stream_a: StationStream
    stream_b: StationStream

    def __post_init__(self):
        if self.stream_a.station != "A" or self.stream_b.station != "B":
            raise DataError("An event log holds station A then station B.")

    def records(self) -> Iterator[StationRecord]:
        yield from self.stream_a
        yield from self.stream_b

    def __len__(self) -> int:
        return len(self.stream_a) + len(self.stream_b)

    @property
    def streams(self) -> Tuple[StationStream, StationStream]:
        return self.stream_a, self.stream_b


def write_event_log(file: PathLike, log: EventLog) -> None:
    """Writes an event log as CSV, creating parent directories."""
    file = Path(file)
    file.parent.mkdir(parents=True, exist_ok=True)
    with open(file, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(EVENT_LOG_HEADER)
        for stream in log.streams:
            pair_ids = stream.pair_ids.tolist()
            labels = stream.setting_labels.tolist()
            settings = stream.settings.tolist()
            outcomes = stream.outcomes.tolist()
            tags = stream.time_tags.tolist()
            for i in range(len(stream)):
                writer.writerow((pair_ids[i], stream.station, labels[i], _format_float(settings[i]),
                                 outcomes[i], _format_float(tags[i])))
    logger.debug("Wrote %d records to %s", len(log), file)


def _parse_row(row: List[str], line: int) -> StationRecord:
    if len(row) != len(EVENT_LOG_HEADER):
        raise DataError(f"Expected {len(EVENT_LOG_HEADER)} fields, got {len(row)}", line=line)
    pair_id, station, label, setting, outcome, tag = row
    try:
        pair_id = int(pair_id)
    except ValueError:
        raise DataError(f"pair_id is not an integer: {pair_id!r}", line=line)
    if station not in ("A", "B"):
        raise DataError(f"station must be A or B, got {station!r}", line=line)
    if outcome not in ("1", "-1"):
        raise DataError(f"outcome must be 1 or -1, got {outcome!r}", line=line)
    try:
        setting, tag = float(setting), float(tag)
    except ValueError:
        raise DataError("setting_rad and time_tag must be numbers", line=line)
    if not (math.isfinite(setting) and math.isfinite(tag)):
        raise DataError("setting_rad and time_tag must be finite", line=line)
    return StationRecord(pair_id=pair_id, station=station, setting_label=label, setting=setting,
                         outcome=int(outcome), time_tag=tag)


def read_event_log(file: PathLike) -> EventLog:
    """
    Reads an event log written by ``write_event_log``.

    Raises:
        FileNotFoundError: If the file does not exist.
        DataError: On a wrong header or a malformed row, naming its line.
    """
    file = Path(file)
    records: Dict[str, List[StationRecord]] = {"A": [], "B": []}
    with open(file, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(header) != EVENT_LOG_HEADER:
            raise DataError(f"Event log header must be {','.join(EVENT_LOG_HEADER)}", line=1)
        last: Optional[Tuple[str, int]] = None
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            record = _parse_row(row, line)
            key = (record.station, record.pair_id)
            if last is not None and key <= last:
                raise DataError("Rows must be sorted by (station, pair_id) without duplicates", line=line)
            last = key
            records[record.station].append(record)
    logger.debug("Read %d records from %s", len(records["A"]) + len(records["B"]), file)
    return EventLog(StationStream.from_records("A", records["A"]), StationStream.from_records("B", records["B"]))


def read_csv_column(file: PathLike, column: Optional[str] = None) -> np.ndarray:
    """
    One numeric column of a CSV file with a header row.

    Without ``column`` the file must have exactly one column.
    """
    file = Path(file)
    with open(file, "r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header:
            raise DataError(f"{file} has no header row", line=1)
        header = [h.strip() for h in header]
        if column is None:
            if len(header) != 1:
                raise DataError(f"{file} has {len(header)} columns, name one of {header}", line=1)
            index = 0
        elif column in header:
            index = header.index(column)
        else:
            raise DataError(f"Column {column!r} not in {header}", line=1)
        values = []
        for row in reader:
            if not row:
                continue
            try:
                value = float(row[index])
            except (IndexError, ValueError):
                raise DataError(f"Not a number in column {header[index]!r}", line=reader.line_num)
            if not math.isfinite(value):
                raise DataError(f"Non-finite value in column {header[index]!r}", line=reader.line_num)
            values.append(value)
    return np.asarray(values, dtype=float)


def write_series_csv(file: PathLike, values: Sequence[float], column: str = "z") -> None:
    file = Path(file)
    file.parent.mkdir(parents=True, exist_ok=True)
    with open(file, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow((column,))
        writer.writerows((_format_float(v),) for v in np.asarray(values, dtype=float).tolist())


def write_plot_csv(file: PathLike, x: Sequence[float], y: Sequence[float],
                   band_lo: Optional[Sequence[float]] = None, band_hi: Optional[Sequence[float]] = None) -> None:
    """Plot data with an ``x,y[,band_lo,band_hi]`` header."""
    columns = [np.asarray(x, dtype=float), np.asarray(y, dtype=float)]
    header = ["x", "y"]
    if (band_lo is None) != (band_hi is None):
        raise ValueError("band_lo and band_hi go together")
    if band_lo is not None:
        columns += [np.broadcast_to(np.asarray(band_lo, dtype=float), columns[0].shape),
                    np.broadcast_to(np.asarray(band_hi, dtype=float), columns[0].shape)]
        header += ["band_lo", "band_hi"]
    if any(c.shape != columns[0].shape for c in columns):
        raise ValueError("Plot columns must have equal length")
    file = Path(file)
    file.parent.mkdir(parents=True, exist_ok=True)
    with open(file, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in zip(*(c.tolist() for c in columns)):
            writer.writerow([_format_float(v) for v in row])


def _default(obj: Any) -> Any:
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"Type is not JSON serializable: {type(obj).__name__}")


def config_hash(config_echo: Dict[str, Any]) -> str:
    return hashlib.sha256(orjson.dumps(config_echo, default=_default, option=orjson.OPT_SORT_KEYS)).hexdigest()


def _label_non_finite(value: Any) -> Any:
    """JSON has no infinities; ±inf and NaN are written as "inf", "-inf" and "nan"."""
    if isinstance(value, dict):
        return {k: _label_non_finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_label_non_finite(v) for v in value]
    if isinstance(value, np.ndarray) and value.dtype.kind == "f" and not np.isfinite(value).all():
        return _label_non_finite(value.tolist())
    if isinstance(value, (float, np.floating)) and not math.isfinite(value):
        return "nan" if math.isnan(value) else "inf" if value > 0 else "-inf"
    return value


def build_report(results: Any, config_echo: Dict[str, Any], wall_time: Optional[float] = None) -> Dict[str, Any]:
    document = {
        "schema": REPORT_SCHEMA,
        "version": describe_version(),
        "config": config_echo,
        "config_hash": config_hash(config_echo),
        "results": _label_non_finite(results),
    }
    if wall_time is not None:
        document["wall_time"] = wall_time
    return document


def emit_report(results: Any, file: PathLike, config_echo: Dict[str, Any],
                wall_time: Optional[float] = None) -> Dict[str, Any]:
    """
    Writes a schema-1 report document as sorted, indented JSON.

    Wall time is only included when given, so reports without it are
    byte-identical across reruns with the same config.

    Returns:
        The document that was written.
    """
    document = build_report(results, config_echo, wall_time)
    file = Path(file)
    file.parent.mkdir(parents=True, exist_ok=True)
    file.write_bytes(orjson.dumps(document, default=_default, option=REPORT_OPTIONS))
    logger.info("Report written to %s", file)
    return document


def read_report(file: PathLike) -> Dict[str, Any]:
    try:
        document = orjson.loads(Path(file).read_bytes())
    except orjson.JSONDecodeError as e:
        raise DataError(f"Report {file} is not valid JSON: {e}")
    if not isinstance(document, dict) or document.get("schema") != REPORT_SCHEMA:
        raise DataError(f"Report {file} does not carry schema {REPORT_SCHEMA}")
    return document


def read_msgpack(file: PathLike) -> Any:
    """
    Unpacks a msgpack file.

    Raises:
        FileNotFoundError: If the file does not exist.
        DataError: If the file is corrupted.
    """
    file = Path(file)
    try:
        return msgpack.unpackb(file.read_bytes(), raw=False)
    except (msgpack.UnpackException, ValueError) as e:
        raise DataError(f"Failed to unpack msgpack file {file}: {e}")


def write_msgpack(file: PathLike, data: Any) -> None:
    file = Path(file)
    file.parent.mkdir(parents=True, exist_ok=True)
    file.write_bytes(msgpack.packb(data, use_bin_type=True))


__all__ = ['EventLog', 'EVENT_LOG_HEADER', 'REPORT_SCHEMA', 'write_event_log', 'read_event_log',
           'read_csv_column', 'write_series_csv', 'write_plot_csv', 'config_hash', 'build_report',
           'emit_report', 'read_report', 'read_msgpack', 'write_msgpack']
