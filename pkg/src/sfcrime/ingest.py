"""Ingestion of the San Francisco crime incident CSV.

Parses the raw export, encodes string attributes to ordinal integer codes,
decomposes timestamps, and computes class-frequency summaries. Everything in
here is pure with respect to its inputs: parsing the same file twice yields
identical records, and encoders are immutable once fitted.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

EXPECTED_HEADER = (
    "Dates",
    "Category",
    "Descript",
    "DayOfWeek",
    "PdDistrict",
    "Resolution",
    "Address",
    "X",
    "Y",
)

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"

# Sentinel latitude used by the SF export for unknown locations.
BAD_LATITUDE_SENTINEL = 90.0

# Time-of-day blocks. Midnight belongs to night: the early-morning block
# explicitly starts at 1 AM, so hour 0 closes the night block and every hour
# has exactly one owner.
EARLY_MORNING = 0  # 1 AM - 7 AM
LATE_MORNING = 1   # 8 AM - 1 PM
AFTERNOON = 2      # 2 PM - 7 PM
NIGHT = 3          # 8 PM - 12 AM

TIME_BLOCK_NAMES = ("early_morning", "late_morning", "afternoon", "night")

HISTOGRAM_AXES = ("month", "day_of_week", "hour", "district")


class IngestError(Exception):
    """Base class for ingestion failures."""


class SchemaError(IngestError):
    """Header row does not match the expected schema."""


class RowError(IngestError):
    """A single data row failed to parse.

    Attributes:
        row_number: 1-based data row index (header excluded).
        field: name of the offending column.
    """

    def __init__(self, row_number: int, field: str, message: str):
        super().__init__(f"row {row_number}, field {field!r}: {message}")
        self.row_number = row_number
        self.field = field
        self.message = message


class EncodingError(IngestError):
    """A value is unknown to the encoder it was presented to."""


@dataclass(frozen=True)
class RawRecord:
    """One incident exactly as it appears in the CSV, minimally typed."""

    dates: str
    category: str
    descript: str
    day_of_week: str
    pd_district: str
    resolution: str
    address: str
    x: float
    y: float


@dataclass(frozen=True)
class CrimeRecord:
    """One incident after encoding: all-integer codes plus coordinates."""

    year: int
    month: int
    date: int
    hour: int
    day_code: int
    district_code: int
    address_code: int
    x: float
    y: float
    label: int


class LabelEncoder:
    """Bijection between strings and consecutive integer codes.

    Codes are assigned by ascending byte-wise sort of the distinct values,
    starting at 0. Instances are immutable after construction and safe to
    share between workers.
    """

    __slots__ = ("classes", "_code_of")

    def __init__(self, classes: Sequence[str]):
        self.classes: tuple[str, ...] = tuple(classes)
        self._code_of = {c: i for i, c in enumerate(self.classes)}

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def encode(self, value: str) -> int:
        try:
            return self._code_of[value]
        except KeyError:
            raise EncodingError(f"unknown value {value!r}") from None

    def decode(self, code: int) -> str:
        if not 0 <= code < len(self.classes):
            raise EncodingError(f"code {code} out of range [0, {len(self.classes)})")
        return self.classes[code]

    def encode_many(self, values: Iterable[str]) -> np.ndarray:
        return np.array([self.encode(v) for v in values], dtype=np.int64)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelEncoder) and self.classes == other.classes

    def __repr__(self) -> str:
        return f"LabelEncoder(n_classes={self.n_classes})"


@dataclass(frozen=True)
class DatasetEncoders:
    """Encoders for the four string attributes that become features/labels."""

    category: LabelEncoder
    day_of_week: LabelEncoder
    district: LabelEncoder
    address: LabelEncoder


@dataclass(frozen=True)
class ClassFrequencyTable:
    """Per-class record counts; counts[i] is the count of class code i."""

    counts: tuple[int, ...]
    total: int

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")
        if sum(self.counts) != self.total:
            raise ValueError("counts must sum to total")

    @property
    def n_classes(self) -> int:
        return len(self.counts)

    def count_of(self, code: int) -> int:
        return self.counts[code]

    def majority_class(self) -> int:
        return int(np.argmax(self.counts))


@dataclass(frozen=True)
class ParseResult:
    """Outcome of parsing one CSV: accepted records plus per-row rejects."""

    records: list[RawRecord]
    rejected: list[RowError]

    @property
    def n_parsed(self) -> int:
        return len(self.records)

    @property
    def n_rejected(self) -> int:
        return len(self.rejected)


def _parse_row(row_number: int, row: Sequence[str]) -> RawRecord:
    if len(row) != len(EXPECTED_HEADER):
        raise RowError(
            row_number, "<row>",
            f"expected {len(EXPECTED_HEADER)} fields, got {len(row)}",
        )
    dates, category, descript, day_of_week, district, resolution, address, x_s, y_s = row

    try:
        datetime.strptime(dates, TIMESTAMP_FORMAT)
    except ValueError as exc:
        raise RowError(row_number, "Dates", str(exc)) from None

    if not category:
        raise RowError(row_number, "Category", "empty category")

    try:
        x = float(x_s)
    except ValueError:
        raise RowError(row_number, "X", f"not a number: {x_s!r}") from None
    if not -180.0 <= x <= 180.0:
        raise RowError(row_number, "X", f"longitude {x} outside [-180, 180]")

    try:
        y = float(y_s)
    except ValueError:
        raise RowError(row_number, "Y", f"not a number: {y_s!r}") from None
    if not -90.0 <= y <= 90.0:
        raise RowError(row_number, "Y", f"latitude {y} outside [-90, 90]")

    return RawRecord(dates, category, descript, day_of_week, district,
                     resolution, address, x, y)


def parse_csv(
    path: str | Path,
    schema: Sequence[str] = EXPECTED_HEADER,
    strict: bool = False,
) -> ParseResult:
    """Parse the incident CSV into RawRecords, preserving row order.

    Malformed rows are rejected and logged; with strict=True the first bad
    row aborts the parse instead. The header must match `schema` exactly.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")

    records: list[RawRecord] = []
    rejected: list[RowError] = []

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("file is empty, no header row") from None
        if list(header) != list(schema):
            missing = [c for c in schema if c not in header]
            extra = [c for c in header if c not in schema]
            raise SchemaError(
                f"header mismatch: missing columns {missing}, unexpected {extra}"
            )

        for row_number, row in enumerate(reader, start=1):
            try:
                records.append(_parse_row(row_number, row))
            except RowError as err:
                if strict:
                    raise
                logger.warning("rejected %s", err)
                rejected.append(err)

    logger.info("parsed %d rows, rejected %d", len(records), len(rejected))
    return ParseResult(records=records, rejected=rejected)


def drop_bad_coordinates(records: list[RawRecord]) -> list[RawRecord]:
    """Remove rows carrying the y = 90.0 unknown-location sentinel."""
    return [r for r in records if r.y != BAD_LATITUDE_SENTINEL]


def fit_label_encoder(values: Sequence[str]) -> LabelEncoder:
    """Fit an encoder over the distinct values, codes by ascending sort."""
    if len(values) == 0:
        raise ValueError("cannot fit an encoder on an empty value list")
    return LabelEncoder(sorted(set(values)))


def fit_encoders(records: list[RawRecord]) -> DatasetEncoders:
    """Fit the category, day, district, and address encoders in one pass."""
    return DatasetEncoders(
        category=fit_label_encoder([r.category for r in records]),
        day_of_week=fit_label_encoder([r.day_of_week for r in records]),
        district=fit_label_encoder([r.pd_district for r in records]),
        address=fit_label_encoder([r.address for r in records]),
    )


def extract_datetime_features(timestamp: str) -> tuple[int, int, int, int]:
    """Decompose "YYYY-MM-DD HH:MM:SS" into (year, month, date, hour).

    Minutes and seconds are discarded. Impossible calendar dates raise.
    """
    dt = datetime.strptime(timestamp, TIMESTAMP_FORMAT)
    return dt.year, dt.month, dt.day, dt.hour


def assign_time_block(hour: int) -> int:
    """Map an hour of day onto one of the four time-of-day blocks."""
    if not 0 <= hour <= 23:
        raise ValueError(f"hour {hour} outside [0, 23]")
    if 1 <= hour <= 7:
        return EARLY_MORNING
    if 8 <= hour <= 13:
        return LATE_MORNING
    if 14 <= hour <= 19:
        return AFTERNOON
    return NIGHT  # 20-23 and midnight


def encode_records(records: list[RawRecord], encoders: DatasetEncoders) -> list[CrimeRecord]:
    """Turn raw rows into all-integer CrimeRecords using fitted encoders."""
    out = []
    for r in records:
        year, month, date, hour = extract_datetime_features(r.dates)
        out.append(CrimeRecord(
            year=year,
            month=month,
            date=date,
            hour=hour,
            day_code=encoders.day_of_week.encode(r.day_of_week),
            district_code=encoders.district.encode(r.pd_district),
            address_code=encoders.address.encode(r.address),
            x=r.x,
            y=r.y,
            label=encoders.category.encode(r.category),
        ))
    return out


def class_frequencies(
    records: Sequence[CrimeRecord],
    n_classes: int | None = None,
) -> ClassFrequencyTable:
    """Exact per-class counts over the records' labels."""
    labels = [r.label for r in records]
    if n_classes is None:
        n_classes = (max(labels) + 1) if labels else 0
    counts = np.bincount(labels, minlength=n_classes) if labels else np.zeros(n_classes, dtype=np.int64)
    return ClassFrequencyTable(counts=tuple(int(c) for c in counts), total=len(labels))


def label_frequencies(labels: np.ndarray, n_classes: int | None = None) -> ClassFrequencyTable:
    """Like class_frequencies but straight from an integer label vector."""
    labels = np.asarray(labels, dtype=np.int64)
    if n_classes is None:
        n_classes = int(labels.max()) + 1 if labels.size else 0
    counts = np.bincount(labels, minlength=n_classes)
    return ClassFrequencyTable(counts=tuple(int(c) for c in counts), total=int(labels.size))


RARE, FREQUENT = 0, 1


def remap_binary(labels: np.ndarray, freq: ClassFrequencyTable, threshold: int) -> np.ndarray:
    """Collapse labels to {0=rare, 1=frequent} by per-class count threshold.

    Classes whose count is >= threshold become frequent; everything else is
    rare. Output length equals input length.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    labels = np.asarray(labels, dtype=np.int64)
    frequent_mask = np.array([c >= threshold for c in freq.counts], dtype=np.int64)
    return frequent_mask[labels]


def histogram(
    records: Sequence[CrimeRecord],
    axis: str,
    n_buckets: int | None = None,
) -> list[tuple[int, int]]:
    """Bucket counts along one axis, covering the full axis domain.

    For month and hour the domain is fixed (1-12 and 0-23); for day_of_week
    and district it is the encoder's code range, inferable from the data or
    passed explicitly via n_buckets.
    """
    if axis == "month":
        values = [r.month for r in records]
        domain = range(1, 13)
    elif axis == "hour":
        values = [r.hour for r in records]
        domain = range(0, 24)
    elif axis == "day_of_week":
        values = [r.day_code for r in records]
        size = n_buckets if n_buckets is not None else (max(values) + 1 if values else 0)
        domain = range(size)
    elif axis == "district":
        values = [r.district_code for r in records]
        size = n_buckets if n_buckets is not None else (max(values) + 1 if values else 0)
        domain = range(size)
    else:
        raise ValueError(f"unknown axis {axis!r}; expected one of {HISTOGRAM_AXES}")

    counts = {b: 0 for b in domain}
    for v in values:
        counts[v] += 1
    return sorted(counts.items())


def write_histogram_csv(
    pairs: Sequence[tuple[int, int]],
    path: str | Path,
    bucket_names: Sequence[str] | None = None,
) -> None:
    """Write (bucket,count) rows; buckets decoded to names when given."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bucket", "count"])
        for bucket, count in pairs:
            name = bucket_names[bucket] if bucket_names is not None else bucket
            writer.writerow([name, count])


def write_frequency_csv(
    freq: ClassFrequencyTable,
    encoder: LabelEncoder,
    path: str | Path,
) -> None:
    """Write per-class (category,count) rows, most frequent first."""
    order = sorted(range(freq.n_classes), key=lambda c: (-freq.counts[c], c))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["category", "count"])
        for code in order:
            writer.writerow([encoder.decode(code), freq.counts[code]])
