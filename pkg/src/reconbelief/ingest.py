"""Observation streams from pre-extracted feature CSVs.

Raw per-packet fields (observed TTL, TCP window size, ...) are mapped onto
the discrete feature domains of a :class:`~reconbelief.kb.FeatureSchema`.
Observed TTLs are snapped to the canonical initial TTL they decayed from;
window sizes are binned into right-open intervals.

Row-level problems (bad address, out-of-range value, value outside the
feature domain) drop the row and are counted in a :class:`ParseReport`.
A header column that cannot be mapped to any feature is fatal.
"""
from __future__ import annotations

import csv
import io
import os
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Mapping, Sequence

from . import _documents
from .errors import (
    InvalidAddress,
    MalformedRow,
    OutOfRange,
    SchemaViolation,
    UnknownField,
    ValidationError,
)
from .kb import FeatureSchema, LabelKind, Observation
from .spaces import NodeIdentity, validate_address

ADDRESS_COLUMN = "src_addr"
WINDOW_MAX = 65535
FIELD_KINDS = ("ttl", "window", "categorical")


@dataclass(frozen=True)
class WindowBin:
    lo: int
    hi: int
    label: str = ""

    def __post_init__(self):
        if not self.label:
            object.__setattr__(self, "label", f"{self.lo}-{self.hi}")

    def __contains__(self, ws: int) -> bool:
        return self.lo <= ws < self.hi


DEFAULT_WINDOW_BINS = (WindowBin(0, 8192), WindowBin(8192, 32768), WindowBin(32768, 65536))


@dataclass(frozen=True)
class IngestConfig:
    """How raw fields turn into schema features.

    ``field_mapping`` maps a raw column name to a feature name.
    ``field_kinds`` says how the raw value is transformed (``ttl``,
    ``window`` or ``categorical``); columns not listed there are ``ttl`` if
    named ``ttl``, ``window`` if named ``window`` / ``window_size`` and
    ``categorical`` otherwise. Columns already named after a schema feature
    pass through unchanged.
    """

    ttl_classes: tuple[int, ...] = (64, 128, 255)
    window_bins: tuple[WindowBin, ...] = DEFAULT_WINDOW_BINS
    field_mapping: Mapping[str, str] = field(default_factory=lambda: {"ttl": "ttl_class", "window": "window_bin"})
    field_kinds: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        ttl = tuple(int(t) for t in self.ttl_classes)
        if not ttl or any(b <= a for a, b in zip(ttl, ttl[1:])) or ttl[0] < 1 or ttl[-1] > 255:
            raise ValidationError("ttl_classes must be strictly increasing values in 1..255")
        bins = tuple(b if isinstance(b, WindowBin) else WindowBin(*b) for b in self.window_bins)
        if not bins or bins[0].lo != 0 or bins[-1].hi != WINDOW_MAX + 1:
            raise ValidationError("window_bins must cover [0, 65535]")
        for a, b in zip(bins, bins[1:]):
            if a.hi != b.lo:
                raise ValidationError(f"window bins {a.label} and {b.label} leave a gap or overlap")
        if any(b.hi <= b.lo for b in bins):
            raise ValidationError("every window bin must be non-empty")
        if len({b.label for b in bins}) != len(bins):
            raise ValidationError("window bin labels must be unique")
        for raw, kind in self.field_kinds.items():
            if kind not in FIELD_KINDS:
                raise ValidationError(f"field kind for {raw!r} must be one of {FIELD_KINDS}")
        object.__setattr__(self, "ttl_classes", ttl)
        object.__setattr__(self, "window_bins", bins)
        object.__setattr__(self, "field_mapping", dict(self.field_mapping))
        object.__setattr__(self, "field_kinds", dict(self.field_kinds))

    def kind_of(self, raw: str) -> str:
        if raw in self.field_kinds:
            return self.field_kinds[raw]
        if raw == "ttl":
            return "ttl"
        if raw in ("window", "window_size"):
            return "window"
        return "categorical"

    @property
    def window_labels(self) -> list[str]:
        return [b.label for b in self.window_bins]

    def to_dict(self) -> dict:
        return {
            "version": _documents.VERSION,
            "ttl_classes": list(self.ttl_classes),
            "window_bins": [[b.lo, b.hi, b.label] for b in self.window_bins],
            "field_mapping": dict(self.field_mapping),
            "field_kinds": dict(self.field_kinds),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "IngestConfig":
        _documents.check_document(doc, "ingest config", [], ["ttl_classes", "window_bins", "field_mapping", "field_kinds"])
        kwargs = {k: doc[k] for k in ("ttl_classes", "field_mapping", "field_kinds") if k in doc}
        if "window_bins" in doc:
            kwargs["window_bins"] = tuple(WindowBin(*b) for b in doc["window_bins"])
        return cls(**kwargs)

    def dumps(self) -> str:
        return _documents.dump_json(self.to_dict())

    @classmethod
    def loads(cls, text: str | bytes) -> "IngestConfig":
        return cls.from_dict(_documents.parse_json(text, "ingest config"))


def normalize_ttl(observed: int, classes: Sequence[int] = (64, 128, 255)) -> int:
    """Smallest canonical initial TTL that is >= the observed TTL."""
    if not 1 <= observed <= 255:
        raise OutOfRange(f"TTL {observed} outside 1..255")
    i = bisect_left(classes, observed)
    if i == len(classes):
        raise OutOfRange(f"TTL {observed} is above the largest class {classes[-1]}")
    return classes[i]


def discretize_window(ws: int, bins: Sequence[WindowBin] = DEFAULT_WINDOW_BINS) -> str:
    if not 0 <= ws <= WINDOW_MAX:
        raise OutOfRange(f"window size {ws} outside 0..{WINDOW_MAX}")
    for b in bins:
        if ws in b:
            return b.label
    raise OutOfRange(f"window size {ws} not covered by any bin")


@dataclass(frozen=True)
class RawRecord:
    address: str
    fields: Mapping[str, str]


@dataclass
class ParseReport:
    rows_read: int = 0
    rows_kept: int = 0
    dropped: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_dropped(self) -> int:
        return len(self.dropped)

    def reasons(self) -> Counter:
        return Counter(reason.split(":", 1)[0] for _, reason in self.dropped)


@dataclass
class ParseResult:
    streams: dict[NodeIdentity, list[Observation]]
    report: ParseReport


def _int(raw: str, name: str) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise MalformedRow(f"{name} value {raw!r} is not an integer") from None


class _Converter:
    """Resolves header columns to features once, then converts rows."""

    def __init__(self, columns: Sequence[str], config: IngestConfig, schema: FeatureSchema):
        self.config = config
        self.schema = schema
        self.columns = []
        for col in columns:
            if col in config.field_mapping:
                feature, kind = config.field_mapping[col], config.kind_of(col)
            elif col in schema.domains:
                feature, kind = col, "categorical"
            else:
                raise UnknownField(f"column {col!r} maps to no schema feature")
            if feature not in schema.domains:
                raise UnknownField(f"column {col!r} maps to unknown feature {feature!r}")
            self.columns.append((col, feature, kind))
        features = [f for _, f, _ in self.columns]
        if len(set(features)) != len(features):
            raise UnknownField("two columns map to the same feature")

    def convert(self, fields: Mapping[str, str]) -> dict[str, str]:
        values = {}
        for col, feature, kind in self.columns:
            raw = (fields.get(col) or "").strip()
            if raw == "":
                continue
            if kind == "ttl":
                value = str(normalize_ttl(_int(raw, col), self.config.ttl_classes))
            elif kind == "window":
                value = discretize_window(_int(raw, col), self.config.window_bins)
            else:
                value = raw
            values[feature] = value
        self.schema.validate_values(values)
        return values


def _open_text(source) -> tuple[IO[str], bool]:
    if isinstance(source, (str, os.PathLike)):
        return open(source, newline="", encoding="utf-8"), True
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8"), newline=""), True
    if isinstance(source, io.BufferedIOBase) or (hasattr(source, "mode") and "b" in getattr(source, "mode", "")):
        return io.TextIOWrapper(source, encoding="utf-8", newline=""), False
    return source, False


def _rows(source, leading: Sequence[str]):
    fh, close = _open_text(source)
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MalformedRow("input has no header row")
        header = [h.strip() for h in header]
        if header[: len(leading)] != list(leading):
            raise UnknownField(f"header must start with {','.join(leading)}")
        if len(set(header)) != len(header):
            raise UnknownField("duplicate columns in header")
        yield header
        for line, row in enumerate(reader, start=2):
            yield line, row
    finally:
        if close:
            fh.close()


def parse_stream(source: str | os.PathLike | bytes | IO, config: IngestConfig, schema: FeatureSchema) -> ParseResult:
    """Group CSV rows into per-node observation streams, preserving file order.

    The header is ``src_addr`` followed by raw field columns. Empty cells
    mean the feature was not observed.
    """
    rows = _rows(source, [ADDRESS_COLUMN])
    header = next(rows)
    conv = _Converter(header[1:], config, schema)
    report = ParseReport()
    streams: dict[NodeIdentity, list[Observation]] = {}
    for line, row in rows:
        if not row or all(not r.strip() for r in row):
            continue
        report.rows_read += 1
        try:
            if len(row) != len(header):
                raise MalformedRow(f"expected {len(header)} cells, got {len(row)}")
            address = validate_address(row[0].strip())
            values = conv.convert(dict(zip(header[1:], row[1:])))
            if not values:
                raise MalformedRow("no feature observed")
        except (MalformedRow, OutOfRange, SchemaViolation, InvalidAddress) as exc:
            report.dropped.append((line, f"{type(exc).__name__}: {exc}"))
            continue
        node = NodeIdentity.of(address)
        streams.setdefault(node, []).append(Observation(values, node))
        report.rows_kept += 1
    return ParseResult(streams, report)


def write_stream(streams: Mapping[NodeIdentity, Sequence[Observation]], schema: FeatureSchema) -> str:
    """Serialize discretized observations; :func:`parse_stream` reads it back unchanged."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([ADDRESS_COLUMN, *schema.features])
    for node, stream in streams.items():
        for obs in stream:
            w.writerow([node.primary, *(obs.values.get(f, "") for f in schema.features)])
    return buf.getvalue()


def parse_records(source, schema: FeatureSchema, config: IngestConfig | None = None) -> tuple[list[tuple[LabelKind, str, Observation]], ParseReport]:
    """Read labelled training records with header ``kind,label,<fields...>``.

    Unlike :func:`parse_stream`, bad rows are fatal: a knowledge base must not
    be estimated from a silently filtered corpus.
    """
    config = config or IngestConfig(field_mapping={})
    rows = _rows(source, ["kind", "label"])
    header = next(rows)
    conv = _Converter(header[2:], config, schema)
    report = ParseReport()
    records = []
    for line, row in rows:
        if not row or all(not r.strip() for r in row):
            continue
        report.rows_read += 1
        if len(row) != len(header):
            raise MalformedRow(f"line {line}: expected {len(header)} cells, got {len(row)}")
        try:
            kind = LabelKind(row[0].strip())
        except ValueError:
            raise SchemaViolation(f"line {line}: kind must be 'os' or 'software', got {row[0]!r}") from None
        label = row[1].strip()
        if not label:
            raise MalformedRow(f"line {line}: empty label")
        try:
            values = conv.convert(dict(zip(header[2:], row[2:])))
        except (MalformedRow, OutOfRange, SchemaViolation) as exc:
            raise type(exc)(f"line {line}: {exc}") from None
        records.append((kind, label, Observation(values)))
        report.rows_kept += 1
    return records, report
