"""Parsers for the public county tables (CDC SVI, BEA income, FEMA NRI) and
county geometry, plus the FIPS join that produces canonical county records.

Every parser accepts a filesystem path, raw bytes, or a binary/text stream.
Column names are never hard-coded here; they come from a :class:`SchemaMapping`
so that vintage-to-vintage renames in the source files only touch config.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import logging
import math
import os
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, BinaryIO, Iterable, Iterator, Mapping, Sequence, Union

from countydri.errors import (
    ConfigError,
    DuplicateFips,
    EmptyJoin,
    GeometryError,
    MissingColumn,
    ParseError,
)

log = logging.getLogger(__name__)

Source = Union[str, os.PathLike, bytes, bytearray, BinaryIO, io.TextIOBase]

FIPS_RE = re.compile(r"^\d{5}$")
POLYGONAL = ("Polygon", "MultiPolygon")

SVI_FIELDS = ("fips", "county_name", "state", "population", "svi")
INCOME_FIELDS = ("fips", "income")
NRI_FIELDS = ("fips", "risk_score", "risk_rating")

MISSING_SENTINEL = "missing sentinel"


@dataclass(frozen=True)
class CountyRecord:
    fips: str
    name: str
    state: str
    population: int
    income: float
    svi: float

    def __post_init__(self) -> None:
        if not FIPS_RE.match(self.fips):
            raise ValueError(f"malformed FIPS {self.fips!r}")
        if not 0.0 <= self.svi <= 1.0:
            raise ValueError(f"{self.fips}: svi {self.svi} outside [0, 1]")
        if self.population < 0:
            raise ValueError(f"{self.fips}: negative population")
        if not self.income > 0:
            raise ValueError(f"{self.fips}: income must be positive")


@dataclass(frozen=True)
class NriRecord:
    fips: str
    risk_score: float
    risk_rating: str

    def __post_init__(self) -> None:
        if not FIPS_RE.match(self.fips):
            raise ValueError(f"malformed FIPS {self.fips!r}")


@dataclass(frozen=True)
class CountyGeometry:
    fips: str
    geometry: dict


@dataclass(frozen=True)
class SviRow:
    fips: str
    name: str
    state: str
    population: int
    svi: float


@dataclass(frozen=True)
class IncomeRow:
    fips: str
    income: float


@dataclass(frozen=True)
class Rejection:
    line: int
    fips: str
    column: str
    raw: str
    reason: str


@dataclass
class ParsedTable:
    """Rows that survived parsing plus everything that was set aside."""

    rows: list = field(default_factory=list)
    rejected: list[Rejection] = field(default_factory=list)
    excluded_aggregates: int = 0
    filtered_out: int = 0
    skipped_notes: int = 0


@dataclass
class JoinDiagnostics:
    svi_only: list[str] = field(default_factory=list)
    income_only: list[str] = field(default_factory=list)
    filter_unmatched: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not (self.svi_only or self.income_only or self.filter_unmatched)


@dataclass
class SchemaMapping:
    """Maps canonical field names onto source column names."""

    svi_columns: dict[str, str]
    income_columns: dict[str, str]
    nri_columns: dict[str, str]
    missing_sentinels: list[str] = field(default_factory=lambda: ["-999"])
    income_row_filter: dict[str, str] = field(default_factory=dict)
    nri_rating_classes: dict[str, int] = field(default_factory=dict)
    delimiter: str = ","

    def __post_init__(self) -> None:
        for label, cols, required in (
            ("svi_columns", self.svi_columns, SVI_FIELDS),
            ("income_columns", self.income_columns, INCOME_FIELDS),
            ("nri_columns", self.nri_columns, NRI_FIELDS),
        ):
            for name in required:
                col = cols.get(name)
                if not isinstance(col, str) or not col:
                    raise ConfigError(f"{label}.{name} must name exactly one source column")
            extra = set(cols) - set(required)
            if extra:
                raise ConfigError(f"{label}: unknown canonical fields {sorted(extra)}")
        if len(self.delimiter) != 1:
            raise ConfigError("delimiter must be a single character")

    @classmethod
    def default(cls) -> SchemaMapping:
        text = resources.files("countydri.data").joinpath("default_mapping.json").read_text("utf-8")
        return cls.from_dict(json.loads(text))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base: SchemaMapping | None = None) -> SchemaMapping:
        """Build a mapping; with ``base``, keys in ``data`` override it field by field."""
        merged = base.to_dict() if base is not None else {}
        for key, value in data.items():
            if key not in cls.__dataclass_fields__:
                raise ConfigError(f"unknown schema mapping key {key!r}")
            if isinstance(value, dict) and key.endswith("_columns"):
                merged[key] = {**merged.get(key, {}), **value}
            else:
                merged[key] = copy.deepcopy(value)
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(f"incomplete schema mapping: {exc}") from None

    @classmethod
    def load(cls, path: str | os.PathLike, base: SchemaMapping | None = None) -> SchemaMapping:
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), base=base if base is not None else cls.default())

    def to_dict(self) -> dict[str, Any]:
        return {name: copy.deepcopy(getattr(self, name)) for name in self.__dataclass_fields__}


# --------------------------------------------------------------------------
# low-level cell handling


def read_source(source: Source) -> str:
    """Return the decoded text of ``source``."""
    if isinstance(source, (str, os.PathLike)):
        data: Any = Path(source).read_bytes()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    if isinstance(data, str):
        return data
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError:
        # BEA downloads are occasionally latin-1 (county names with accents)
        log.warning("input is not valid UTF-8; decoding as latin-1")
        return data.decode("latin-1")


def clean_cell(raw: str | None) -> str:
    if raw is None:
        return ""
    return raw.strip().strip('"').strip()


def normalize_fips(raw: Any) -> str | None:
    """Zero-pad a county FIPS to five digits; None if it is not one."""
    if isinstance(raw, bool):
        return None
    if isinstance(raw, int):
        raw = str(raw)
    if not isinstance(raw, str):
        return None
    text = clean_cell(raw)
    if not text.isdigit() or not 1 <= len(text) <= 5 or not text.isascii():
        return None
    return text.zfill(5)


def _parse_number(text: str) -> float:
    value = float(text.replace(",", ""))
    if not math.isfinite(value):
        raise ValueError("non-finite")
    return value


def _parse_count(text: str) -> int:
    text = text.replace(",", "")
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise
        return int(value)


class _Table:
    """Thin wrapper over csv.DictReader that checks columns and tracks lines."""

    def __init__(self, source: Source, delimiter: str, required: Iterable[str], sentinels: Sequence[str]):
        self.reader = csv.DictReader(io.StringIO(read_source(source), newline=""), delimiter=delimiter)
        header = self.reader.fieldnames or []
        self.reader.fieldnames = [clean_cell(h) for h in header]
        for col in required:
            if col not in self.reader.fieldnames:
                raise MissingColumn(col)
        self.sentinels = set(sentinels)
        self._numeric_sentinels = set()
        for s in sentinels:
            try:
                self._numeric_sentinels.add(float(s))
            except ValueError:
                pass

    def is_missing(self, text: str) -> bool:
        if text in self.sentinels:
            return True
        try:
            return float(text.replace(",", "")) in self._numeric_sentinels
        except ValueError:
            return False

    def rows(self, fips_col: str, mapped: Sequence[str], result: ParsedTable) -> Iterator[tuple[int, dict]]:
        for row in self.reader:
            line = self.reader.line_num
            if not any(clean_cell(v) for v in row.values() if isinstance(v, str)):
                continue
            if any(row.get(col) is None for col in mapped):
                # trailing footnotes ("Note: ...", "Last updated ...") in BEA downloads
                if normalize_fips(row.get(fips_col)) is None:
                    result.skipped_notes += 1
                    continue
                short = next(col for col in mapped if row.get(col) is None)
                raise ParseError(line, short, "", "row has too few fields")
            yield line, row


def _fips_of(row: dict, col: str, line: int) -> str:
    raw = row[col]
    fips = normalize_fips(raw)
    if fips is None:
        raise ParseError(line, col, raw, "not a county FIPS code")
    return fips


def _claim(seen: set[str], fips: str) -> None:
    if fips in seen:
        raise DuplicateFips(fips)
    seen.add(fips)


# --------------------------------------------------------------------------
# public parsers


def parse_svi_table(source: Source, mapping: SchemaMapping | None = None) -> ParsedTable:
    """Parse a CDC/ATSDR SVI county table into :class:`SviRow` entries.

    Rows whose population or SVI cell holds a missing-value sentinel are
    moved to ``rejected`` instead of raising; anything else that fails to
    convert raises :class:`ParseError`.
    """
    mapping = mapping or SchemaMapping.default()
    cols = mapping.svi_columns
    mapped = [cols[f] for f in SVI_FIELDS]
    table = _Table(source, mapping.delimiter, mapped, mapping.missing_sentinels)
    result = ParsedTable()
    seen: set[str] = set()
    for line, row in table.rows(cols["fips"], mapped, result):
        fips = _fips_of(row, cols["fips"], line)
        _claim(seen, fips)

        missing = [c for c in (cols["population"], cols["svi"]) if table.is_missing(clean_cell(row[c]))]
        if missing:
            for col in missing:
                result.rejected.append(Rejection(line, fips, col, row[col], MISSING_SENTINEL))
            continue

        raw_pop = clean_cell(row[cols["population"]])
        try:
            population = _parse_count(raw_pop)
        except ValueError:
            raise ParseError(line, cols["population"], raw_pop) from None
        if population < 0:
            raise ParseError(line, cols["population"], raw_pop, "population must be >= 0")

        raw_svi = clean_cell(row[cols["svi"]])
        try:
            svi = _parse_number(raw_svi)
        except ValueError:
            raise ParseError(line, cols["svi"], raw_svi) from None
        if not 0.0 <= svi <= 1.0:
            raise ParseError(line, cols["svi"], raw_svi, "svi must lie in [0, 1]")

        result.rows.append(
            SviRow(
                fips=fips,
                name=clean_cell(row[cols["county_name"]]),
                state=clean_cell(row[cols["state"]]),
                population=population,
                svi=svi,
            )
        )
    return result


def parse_income_table(source: Source, mapping: SchemaMapping | None = None) -> ParsedTable:
    """Parse a BEA per-capita personal income table into :class:`IncomeRow` entries.

    State and national aggregate rows (FIPS ending in ``000``) are dropped
    and counted in ``excluded_aggregates``. Rows not matching
    ``mapping.income_row_filter`` (e.g. other BEA line codes) are counted in
    ``filtered_out``.
    """
    mapping = mapping or SchemaMapping.default()
    cols = mapping.income_columns
    mapped = [cols[f] for f in INCOME_FIELDS]
    table = _Table(source, mapping.delimiter, [*mapped, *mapping.income_row_filter], mapping.missing_sentinels)
    result = ParsedTable()
    seen: set[str] = set()
    for line, row in table.rows(cols["fips"], mapped, result):
        if any(clean_cell(row.get(c)) != str(v) for c, v in mapping.income_row_filter.items()):
            result.filtered_out += 1
            continue
        fips = _fips_of(row, cols["fips"], line)
        if fips.endswith("000"):
            result.excluded_aggregates += 1
            continue
        _claim(seen, fips)

        raw = clean_cell(row[cols["income"]])
        if table.is_missing(raw):
            result.rejected.append(Rejection(line, fips, cols["income"], row[cols["income"]], MISSING_SENTINEL))
            continue
        try:
            income = _parse_number(raw)
        except ValueError:
            raise ParseError(line, cols["income"], raw) from None
        if income <= 0:
            raise ParseError(line, cols["income"], raw, "income must be positive")
        result.rows.append(IncomeRow(fips, income))
    return result


def parse_nri_table(source: Source, mapping: SchemaMapping | None = None) -> ParsedTable:
    mapping = mapping or SchemaMapping.default()
    cols = mapping.nri_columns
    mapped = [cols[f] for f in NRI_FIELDS]
    table = _Table(source, mapping.delimiter, mapped, mapping.missing_sentinels)
    result = ParsedTable()
    seen: set[str] = set()
    for line, row in table.rows(cols["fips"], mapped, result):
        fips = _fips_of(row, cols["fips"], line)
        _claim(seen, fips)
        raw = clean_cell(row[cols["risk_score"]])
        if table.is_missing(raw):
            result.rejected.append(Rejection(line, fips, cols["risk_score"], row[cols["risk_score"]], MISSING_SENTINEL))
            continue
        try:
            score = _parse_number(raw)
        except ValueError:
            raise ParseError(line, cols["risk_score"], raw) from None
        if score < 0:
            raise ParseError(line, cols["risk_score"], raw, "risk score must be >= 0")
        result.rows.append(NriRecord(fips, score, clean_cell(row[cols["risk_rating"]])))
    return result


def parse_geometry(source: Source, fips_property: str = "GEOID") -> list[CountyGeometry]:
    """Read county polygons from a GeoJSON FeatureCollection.

    The FIPS is looked up in each feature's properties, then on the feature
    itself (so ``fips_property="id"`` works for files keyed by feature id).
    """
    try:
        doc = json.loads(read_source(source))
    except json.JSONDecodeError as exc:
        raise GeometryError(f"invalid GeoJSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise GeometryError("expected a GeoJSON FeatureCollection")

    out = []
    seen: set[str] = set()
    for i, feature in enumerate(doc.get("features") or []):
        geom = feature.get("geometry") or {}
        if geom.get("type") not in POLYGONAL:
            raise GeometryError(f"feature {i}: geometry type {geom.get('type')!r} is not polygonal")
        props = feature.get("properties") or {}
        raw = props.get(fips_property, feature.get(fips_property))
        fips = normalize_fips(raw)
        if fips is None:
            raise GeometryError(f"feature {i}: property {fips_property!r} is not a county FIPS ({raw!r})")
        _claim(seen, fips)
        out.append(CountyGeometry(fips, geom))
    return out


def join_counties(
    svi_rows: Iterable[SviRow],
    income_rows: Iterable[IncomeRow],
    fips_filter: Iterable[str] | None = None,
) -> tuple[list[CountyRecord], JoinDiagnostics]:
    svi = {r.fips: r for r in svi_rows}
    income = {r.fips: r for r in income_rows}
    diag = JoinDiagnostics(
        svi_only=sorted(svi.keys() - income.keys()),
        income_only=sorted(income.keys() - svi.keys()),
    )
    keys = svi.keys() & income.keys()
    if fips_filter is not None:
        wanted = {normalize_fips(f) or str(f) for f in fips_filter}
        diag.filter_unmatched = sorted(wanted - keys)
        keys &= wanted
    if not keys:
        raise EmptyJoin("no county FIPS is present in both the SVI and income tables")

    records = []
    for fips in sorted(keys):
        s = svi[fips]
        records.append(CountyRecord(fips, s.name, s.state, s.population, income[fips].income, s.svi))
    return records, diag
