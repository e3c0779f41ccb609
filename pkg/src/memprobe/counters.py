"""Hardware-counter sample ingestion and metric-space conversion.

The input interface is a CSV stream of per-interval counter deltas with the
exact header ``timestamp,host_id,cpu_id,fp_ops,cycles,l3_misses``. Valid
rows become CounterSample records; malformed rows are collected into a
rejects report instead of aborting the run. A sample maps to a point in the
two-dimensional metric space (flops per cycle, L3 miss bytes per cycle).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CSV_HEADER = ["timestamp", "host_id", "cpu_id", "fp_ops", "cycles", "l3_misses"]
DEFAULT_LINE_BYTES = 128

SCHEMA_VERSION = "1.0"


class CsvSchemaError(ValueError):
    """Header missing, renamed, or reordered: a hard error, not a reject."""


class PointSource(Enum):
    HARDWARE_SAMPLE = "hardware_sample"
    VIRTUAL_PROBE = "virtual_probe"
    VIRTUAL_KERNEL = "virtual_kernel"


@dataclass(frozen=True, slots=True)
class CounterSample:
    """Counter deltas for one host/cpu/interval."""

    timestamp: float
    host_id: str
    cpu_id: int
    fp_ops: int
    cycles: int
    l3_misses: int


@dataclass(frozen=True, slots=True)
class MetricPoint:
    flops_per_cycle: float
    miss_bytes_per_cycle: float
    source: PointSource
    label: str | None = None


@dataclass(frozen=True, slots=True)
class RejectedRow:
    line_number: int
    fields: tuple[str, ...]
    reason: str


@dataclass
class ParseResult:
    samples: list[CounterSample]
    rejects: list[RejectedRow]


def _reject_reason(row: list[str]) -> str:
    """Slow-path diagnosis for a row that failed the fast parse."""
    if len(row) != 6:
        return "wrong field count"
    try:
        float(row[0])
    except ValueError:
        return "malformed timestamp"
    for name, value in (("cpu_id", row[2]), ("fp_ops", row[3]),
                        ("cycles", row[4]), ("l3_misses", row[5])):
        try:
            int(value)
        except ValueError:
            return f"malformed {name}"
    return "invalid row"


def parse_samples(source: str | Path | io.TextIOBase) -> ParseResult:
    """Read counter CSV; valid rows in input order, bad rows as rejects."""
    if isinstance(source, (str, Path)):
        with open(source, "r", newline="") as fh:
            return parse_samples(fh)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise CsvSchemaError("empty input: missing header") from None
    if header != CSV_HEADER:
        raise CsvSchemaError(
            f"unexpected header {header!r}; required {CSV_HEADER!r}"
        )
    samples: list[CounterSample] = []
    rejects: list[RejectedRow] = []
    for lineno, row in enumerate(reader, start=2):
        try:
            ts = float(row[0])
            cpu = int(row[2])
            fp = int(row[3])
            cyc = int(row[4])
            miss = int(row[5])
            if len(row) != 6:
                raise ValueError
        except (ValueError, IndexError):
            rejects.append(RejectedRow(lineno, tuple(row), _reject_reason(row)))
            continue
        if cyc == 0:
            rejects.append(RejectedRow(lineno, tuple(row), "zero cycles"))
            continue
        if cyc < 0:
            rejects.append(RejectedRow(lineno, tuple(row), "negative cycles"))
            continue
        if fp < 0 or miss < 0:
            reason = "negative fp_ops" if fp < 0 else "negative l3_misses"
            rejects.append(RejectedRow(lineno, tuple(row), reason))
            continue
        samples.append(CounterSample(ts, row[1], cpu, fp, cyc, miss))
    return ParseResult(samples, rejects)


def serialize_samples(samples: Iterable[CounterSample],
                      dest: str | Path | io.TextIOBase) -> None:
    """Write samples back to the input CSV schema (round-trip safe)."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            serialize_samples(samples, fh)
            return
    writer = csv.writer(dest)
    writer.writerow(CSV_HEADER)
    for s in samples:
        writer.writerow([repr(s.timestamp), s.host_id, s.cpu_id,
                         s.fp_ops, s.cycles, s.l3_misses])


def write_rejects(rejects: Sequence[RejectedRow],
                  dest: str | Path | io.TextIOBase) -> None:
    """Rejects report: original row padded to schema width, plus reason."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            write_rejects(rejects, fh)
            return
    dest.write(f"# schema_version={SCHEMA_VERSION} kind=counter_rejects\n")
    writer = csv.writer(dest)
    writer.writerow(["line_number", *CSV_HEADER, "reason"])
    for r in rejects:
        row = list(r.fields)[:6]
        row += [""] * (6 - len(row))
        writer.writerow([r.line_number, *row, r.reason])


def to_metric(sample: CounterSample,
              line_bytes: int = DEFAULT_LINE_BYTES) -> MetricPoint:
    """Map one sample into the metric plane."""
    if sample.cycles <= 0:
        raise ValueError("cycles must be positive")
    return MetricPoint(
        flops_per_cycle=sample.fp_ops / sample.cycles,
        miss_bytes_per_cycle=sample.l3_misses * line_bytes / sample.cycles,
        source=PointSource.HARDWARE_SAMPLE,
        label=sample.host_id or None,
    )


def summed_metric(samples: Sequence[CounterSample],
                  line_bytes: int = DEFAULT_LINE_BYTES) -> MetricPoint:
    """Cycle-weighted aggregate: the metric of the summed deltas."""
    if not samples:
        raise ValueError("summed_metric of an empty sample set")
    fp = sum(s.fp_ops for s in samples)
    cyc = sum(s.cycles for s in samples)
    miss = sum(s.l3_misses for s in samples)
    if cyc <= 0:
        raise ValueError("cycles must sum to a positive value")
    return MetricPoint(fp / cyc, miss * line_bytes / cyc,
                       PointSource.HARDWARE_SAMPLE, label="aggregate")


def metric_array(samples: Sequence[CounterSample],
                 line_bytes: int = DEFAULT_LINE_BYTES) -> np.ndarray:
    """Bulk conversion: (N, 2) array of (miss_bytes_per_cycle, flops_per_cycle).

    Column order matches the binning convention (x, y).
    """
    n = len(samples)
    fp = np.fromiter((s.fp_ops for s in samples), dtype=np.float64, count=n)
    cyc = np.fromiter((s.cycles for s in samples), dtype=np.float64, count=n)
    miss = np.fromiter((s.l3_misses for s in samples), dtype=np.float64, count=n)
    out = np.empty((n, 2), dtype=np.float64)
    out[:, 0] = miss * line_bytes / cyc
    out[:, 1] = fp / cyc
    return out


POINTS_COLUMNS = ["miss_bytes_per_cycle", "flops_per_cycle", "source", "label"]
POINTS_MAGIC = f"# schema_version={SCHEMA_VERSION} kind=metric_points"


def write_points(points: Iterable[MetricPoint],
                 dest: str | Path | io.TextIOBase) -> None:
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="") as fh:
            write_points(points, fh)
            return
    dest.write(POINTS_MAGIC + "\n")
    writer = csv.writer(dest)
    writer.writerow(POINTS_COLUMNS)
    for p in points:
        writer.writerow([repr(p.miss_bytes_per_cycle), repr(p.flops_per_cycle),
                         p.source.value, p.label or ""])


def load_points(source: str | Path | io.TextIOBase) -> list[MetricPoint]:
    if isinstance(source, (str, Path)):
        with open(source, "r", newline="") as fh:
            return load_points(fh)
    magic = source.readline().strip()
    if not magic.startswith("# schema_version="):
        raise CsvSchemaError("points file lacks a schema_version line")
    version = magic.split("=", 1)[1].split()[0]
    if version.split(".", 1)[0] != SCHEMA_VERSION.split(".", 1)[0]:
        raise CsvSchemaError(f"unsupported schema_version {version!r}")
    reader = csv.reader(source)
    header = next(reader, None)
    if header != POINTS_COLUMNS:
        raise CsvSchemaError("points header does not match schema")
    return [
        MetricPoint(miss_bytes_per_cycle=float(row[0]),
                    flops_per_cycle=float(row[1]),
                    source=PointSource(row[2]),
                    label=row[3] or None)
        for row in reader if row
    ]
