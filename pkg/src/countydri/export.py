"""Deterministic writers: results CSV, choropleth GeoJSON, comparison JSON, manifest.

Data outputs carry no timestamps and are rendered with shortest round-trip
float formatting, so identical inputs and config give byte-identical files.
Path sinks are written atomically (temp file + rename).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable, Mapping, Sequence, Union

from countydri.classify import ClassAssignment
from countydri.compare import ComparisonReport
from countydri.errors import ParseError, SinkError
from countydri.index_core import DriResult
from countydri.ingest import CountyGeometry, CountyRecord, Source, read_source

Sink = Union[str, os.PathLike, IO[str], IO[bytes]]

RESULT_COLUMNS = (
    "fips",
    "name",
    "population",
    "income",
    "svi",
    "pop_norm",
    "income_norm_inverted",
    "dri",
    "dri_complement",
    "dri_class_index",
    "dri_class_label",
)
COUNTY_COLUMNS = ("fips", "name", "state", "population", "income", "svi")

_UMASK = os.umask(0)
os.umask(_UMASK)

_FLOAT_COLUMNS = ("income", "svi", "pop_norm", "income_norm_inverted", "dri", "dri_complement")


def format_number(x: float | int) -> str:
    if isinstance(x, int) and not isinstance(x, bool):
        return str(x)
    x = float(x)
    if x == 0.0:
        x = 0.0  # drop the sign of -0.0
    return repr(x)


def emit(text: str, sink: Sink) -> int:
    """Write ``text`` as UTF-8 to ``sink`` and return the byte count."""
    data = text.encode("utf-8")
    try:
        if isinstance(sink, (str, os.PathLike)):
            path = Path(sink)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(data)
                os.chmod(tmp, 0o666 & ~_UMASK)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
        elif isinstance(sink, io.TextIOBase):
            sink.write(text)
        else:
            sink.write(data)  # type: ignore[arg-type]
    except (OSError, TypeError) as exc:
        raise SinkError(f"cannot write output: {exc}") from exc
    return len(data)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def result_rows(
    records: Iterable[CountyRecord],
    results: Iterable[DriResult],
    assignments: Iterable[ClassAssignment],
) -> list[dict[str, Any]]:
    """One typed row per result, FIPS-ascending; the single source for CSV and GeoJSON."""
    by_fips = {r.fips: r for r in records}
    classes = {a.fips: a for a in assignments}
    rows = []
    for res in sorted(results, key=lambda r: r.fips):
        rec = by_fips[res.fips]
        cls = classes.get(res.fips)
        rows.append(
            {
                "fips": res.fips,
                "name": rec.name,
                "population": rec.population,
                "income": rec.income,
                "svi": res.svi,
                "pop_norm": res.pop_norm,
                "income_norm_inverted": res.income_norm_inverted,
                "dri": res.dri,
                "dri_complement": res.dri_complement,
                "dri_class_index": cls.class_index if cls else None,
                "dri_class_label": cls.class_label if cls else None,
            }
        )
    return rows


def _render_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return format_number(value)
    return str(value)


def render_results_csv(records, results, assignments) -> str:
    rows = result_rows(records, results, assignments)
    return _csv_text(RESULT_COLUMNS, ([_render_cell(r[c]) for c in RESULT_COLUMNS] for r in rows))


def write_results_csv(
    records: Iterable[CountyRecord],
    results: Iterable[DriResult],
    assignments: Iterable[ClassAssignment],
    sink: Sink,
) -> int:
    return emit(render_results_csv(records, results, assignments), sink)


def read_results_csv(source: Source) -> list[dict[str, Any]]:
    """Parse a results CSV back into typed rows (floats recovered exactly)."""
    reader = csv.DictReader(io.StringIO(read_source(source), newline=""))
    if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
        raise ParseError(1, "<header>", ",".join(reader.fieldnames or ()), "not a results CSV header")
    out = []
    for row in reader:
        typed: dict[str, Any] = dict(row)
        typed["population"] = int(row["population"])
        for col in _FLOAT_COLUMNS:
            typed[col] = float(row[col])
        typed["dri_class_index"] = int(row["dri_class_index"]) if row["dri_class_index"] else None
        typed["dri_class_label"] = row["dri_class_label"] or None
        out.append(typed)
    return out


def write_counties_csv(records: Iterable[CountyRecord], sink: Sink) -> int:
    """Write the joined input records in canonical form."""
    rows = (
        [r.fips, r.name, r.state, format_number(r.population), format_number(r.income), format_number(r.svi)]
        for r in sorted(records, key=lambda r: r.fips)
    )
    return emit(_csv_text(COUNTY_COLUMNS, rows), sink)


def read_counties_csv(source: Source) -> list[CountyRecord]:
    reader = csv.DictReader(io.StringIO(read_source(source), newline=""))
    if tuple(reader.fieldnames or ()) != COUNTY_COLUMNS:
        raise ParseError(1, "<header>", ",".join(reader.fieldnames or ()), "not a canonical county CSV header")
    return [
        CountyRecord(
            fips=row["fips"],
            name=row["name"],
            state=row["state"],
            population=int(row["population"]),
            income=float(row["income"]),
            svi=float(row["svi"]),
        )
        for row in reader
    ]


def render_geojson(
    records: Iterable[CountyRecord],
    results: Iterable[DriResult],
    assignments: Iterable[ClassAssignment],
    geometries: Iterable[CountyGeometry],
) -> tuple[str, list[str]]:
    geom = {g.fips: g.geometry for g in geometries}
    features = []
    omitted = []
    for row in result_rows(records, results, assignments):
        shape = geom.get(row["fips"])
        if shape is None:
            omitted.append(row["fips"])
            continue
        features.append({"type": "Feature", "id": row["fips"], "properties": row, "geometry": shape})
    doc = {"type": "FeatureCollection", "features": features}
    return json.dumps(doc, ensure_ascii=False, allow_nan=False) + "\n", omitted


def write_geojson(records, results, assignments, geometries, sink: Sink) -> tuple[int, list[str]]:
    """Write the choropleth FeatureCollection.

    Returns the byte count and the FIPS of results that had no geometry
    (those features are left out).
    """
    text, omitted = render_geojson(records, results, assignments, geometries)
    return emit(text, sink), omitted


def comparison_to_dict(report: ComparisonReport) -> dict[str, Any]:
    return {
        "n": report.n,
        "k": report.k,
        "spearman_rho": report.spearman_rho,
        "nri_class_source": report.nri_class_source,
        "cross_tab": report.cross_tab,
        "divergence_threshold": report.divergence_threshold,
        "divergences": [asdict(d) for d in report.divergences],
        "diagnostics": {
            "dri_only": report.dri_only,
            "nri_only": report.nri_only,
            "notes": report.notes,
        },
    }


def dumps_stable(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def write_comparison_json(report: ComparisonReport, sink: Sink) -> int:
    return emit(dumps_stable(comparison_to_dict(report)), sink)


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


@dataclass
class RunManifest:
    tool_version: str
    config: Mapping[str, Any]
    inputs: Mapping[str, str]
    outputs: Mapping[str, str]
    counts: Mapping[str, int]
    diagnostics: Mapping[str, Any]
    timestamp: str = ""
    extra: dict[str, Any] = field(default_factory=dict)


def write_manifest(manifest: RunManifest, sink: Sink) -> int:
    return emit(dumps_stable(asdict(manifest)), sink)
