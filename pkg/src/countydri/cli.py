"""Command-line front end: ``countydri {validate,compute,compare} CONFIG``.

Exit codes: 0 success, 1 operational error, 2 validation findings.
Set ``DRI_LOG`` to ``off`` (default), ``info`` or ``debug`` for logs on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from countydri import __version__
from countydri.classify import ClassAssignment, classify
from countydri.compare import compare_with_nri
from countydri.errors import ConfigError, DriError
from countydri.export import (
    RunManifest,
    file_digest,
    write_comparison_json,
    write_counties_csv,
    write_geojson,
    write_manifest,
    write_results_csv,
)
from countydri.index_core import (
    ANALYSIS_SUBSET,
    EQUAL_WEIGHT,
    FULL_DATASET,
    LITERAL_WEIGHT,
    DriBatch,
    IndexConfig,
    compute_all,
)
from countydri.ingest import (
    CountyGeometry,
    CountyRecord,
    JoinDiagnostics,
    ParsedTable,
    SchemaMapping,
    join_counties,
    normalize_fips,
    parse_geometry,
    parse_income_table,
    parse_nri_table,
    parse_svi_table,
)

log = logging.getLogger("countydri")

EXIT_OK, EXIT_ERROR, EXIT_FINDINGS = 0, 1, 2

RESULTS_CSV = "dri_results.csv"
RESULTS_GEOJSON = "dri_results.geojson"
COUNTIES_CSV = "counties.csv"
MANIFEST = "manifest.json"
COMPARISON_JSON = "comparison.json"

_DOMAIN_ALIASES = {"full": FULL_DATASET, "subset": ANALYSIS_SUBSET, FULL_DATASET: FULL_DATASET, ANALYSIS_SUBSET: ANALYSIS_SUBSET}


@dataclass
class RunConfig:
    svi_path: Path
    income_path: Path
    output_dir: Path
    mapping: SchemaMapping
    index: IndexConfig
    nri_path: Path | None = None
    geometry_path: Path | None = None
    geometry_fips_property: str = "GEOID"
    class_labels: tuple[str, ...] | None = None
    divergence_threshold: int = 2
    paper_literal: bool = False
    state_fips: tuple[str, ...] | None = None
    source_file: Path | None = None

    def echo(self) -> dict[str, Any]:
        return {
            "weight": self.index.weight,
            "paper_literal": self.paper_literal,
            "class_count": self.index.class_count,
            "class_labels": list(self.class_labels) if self.class_labels else None,
            "normalization_domain": self.index.normalization_domain,
            "analysis_fips": list(self.index.analysis_fips) if self.index.analysis_fips else None,
            "divergence_threshold": self.divergence_threshold,
            "geometry_fips_property": self.geometry_fips_property,
            "state_fips": list(self.state_fips) if self.state_fips else None,
            "schema": self.mapping.to_dict(),
        }


def read_fips_list(path: str | os.PathLike) -> list[str]:
    """FIPS from a JSON array or a text file (one per line, commas allowed, ``#`` comments)."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("["):
        items = [str(x) for x in json.loads(text)]
    else:
        items = []
        for line in text.splitlines():
            line = line.split("#", 1)[0]
            items.extend(tok for tok in line.replace(",", " ").split() if tok)
    out = []
    for item in items:
        fips = normalize_fips(item)
        if fips is None:
            raise ConfigError(f"{path}: {item!r} is not a county FIPS")
        out.append(fips)
    return out


def _resolve(base: Path, value: str | None) -> Path | None:
    if not value:
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_run_config(path: str | os.PathLike, args: argparse.Namespace | None = None) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    base = path.parent
    inputs = raw.get("inputs", {})

    mapping = SchemaMapping.default()
    if raw.get("schema_file"):
        mapping = SchemaMapping.load(_resolve(base, raw["schema_file"]), base=mapping)
    if raw.get("schema"):
        mapping = SchemaMapping.from_dict(raw["schema"], base=mapping)

    idx = dict(raw.get("index", {}))
    weight = idx.get("weight")
    paper_literal = bool(raw.get("paper_literal", False))
    k = idx.get("class_count", 5)
    domain = idx.get("domain", "full")
    analysis = idx.get("analysis_fips")
    if idx.get("analysis_fips_file"):
        analysis = read_fips_list(_resolve(base, idx["analysis_fips_file"]))
    out_dir = _resolve(base, raw.get("output_dir", "out"))
    threshold = raw.get("divergence_threshold", 2)

    if args is not None:
        if args.paper_literal:
            paper_literal = True
        if args.weight is not None:
            weight = args.weight
        if args.classes is not None:
            k = args.classes
        if args.domain is not None:
            domain = args.domain
        if args.subset_fips is not None:
            analysis = read_fips_list(args.subset_fips)
        if args.out_dir is not None:
            out_dir = Path(args.out_dir)

    if paper_literal:
        if weight is not None and weight != LITERAL_WEIGHT:
            raise ConfigError("paper_literal fixes the weight at 0.33; drop the explicit weight")
        weight = LITERAL_WEIGHT
    if domain not in _DOMAIN_ALIASES:
        raise ConfigError(f"unknown domain {domain!r}; use 'full' or 'subset'")

    labels = raw.get("class_labels")
    states = raw.get("state_fips")
    if isinstance(states, str):
        states = [states]
    if states is not None:
        states = [str(x).zfill(2) for x in states]
        if not all(len(x) == 2 and x.isdigit() for x in states):
            raise ConfigError("state_fips entries must be 2-digit state codes")
    cfg = RunConfig(
        svi_path=_required(base, inputs, "svi"),
        income_path=_required(base, inputs, "income"),
        nri_path=_resolve(base, inputs.get("nri")),
        geometry_path=_resolve(base, inputs.get("geometry")),
        geometry_fips_property=raw.get("geometry_fips_property", "GEOID"),
        output_dir=out_dir,
        mapping=mapping,
        index=IndexConfig(
            weight=EQUAL_WEIGHT if weight is None else float(weight),
            class_count=k,
            normalization_domain=_DOMAIN_ALIASES[domain],
            analysis_fips=tuple(analysis) if analysis else None,
        ),
        class_labels=tuple(labels) if labels else None,
        divergence_threshold=int(threshold),
        paper_literal=paper_literal,
        state_fips=tuple(states) if states else None,
        source_file=path,
    )
    for p in (cfg.svi_path, cfg.income_path, cfg.nri_path, cfg.geometry_path):
        if p is not None and not os.access(p, os.R_OK):
            raise FileNotFoundError(f"input not readable: {p}")
    return cfg


def _required(base: Path, inputs: dict, key: str) -> Path:
    p = _resolve(base, inputs.get(key))
    if p is None:
        raise ConfigError(f"inputs.{key} is required")
    return p


# --------------------------------------------------------------------------
# pipeline


@dataclass
class Loaded:
    svi: ParsedTable
    income: ParsedTable
    records: list[CountyRecord]
    join: JoinDiagnostics
    geometries: list[CountyGeometry] | None = None
    nri: ParsedTable | None = None


def load_inputs(cfg: RunConfig, with_nri: bool = False) -> Loaded:
    """Parse and join the configured inputs, restricted to ``cfg.state_fips`` if set."""
    svi = parse_svi_table(cfg.svi_path, cfg.mapping)
    log.info("svi: %d rows, %d rejected", len(svi.rows), len(svi.rejected))
    income = parse_income_table(cfg.income_path, cfg.mapping)
    log.info(
        "income: %d rows, %d rejected, %d aggregates excluded",
        len(income.rows), len(income.rejected), income.excluded_aggregates,
    )
    if cfg.state_fips:
        for table in (svi, income):
            table.rows = [r for r in table.rows if r.fips[:2] in cfg.state_fips]
            table.rejected = [r for r in table.rejected if r.fips[:2] in cfg.state_fips]
    records, join = join_counties(svi.rows, income.rows)
    log.info("joined %d counties", len(records))
    loaded = Loaded(svi=svi, income=income, records=records, join=join)
    if cfg.geometry_path is not None:
        loaded.geometries = parse_geometry(cfg.geometry_path, cfg.geometry_fips_property)
    if with_nri and cfg.nri_path is not None:
        loaded.nri = parse_nri_table(cfg.nri_path, cfg.mapping)
        if cfg.state_fips:
            loaded.nri.rows = [r for r in loaded.nri.rows if r.fips[:2] in cfg.state_fips]
            loaded.nri.rejected = [r for r in loaded.nri.rejected if r.fips[:2] in cfg.state_fips]
    return loaded


def score(cfg: RunConfig, records: Sequence[CountyRecord]) -> tuple[DriBatch, list[ClassAssignment]]:
    batch = compute_all(records, cfg.index)
    classes = classify({r.fips: r.dri for r in batch.results}, cfg.index.class_count, cfg.class_labels)
    return batch, classes


def _rejections(table: ParsedTable) -> list[dict[str, Any]]:
    return [
        {"line": r.line, "fips": r.fips, "column": r.column, "raw": r.raw, "reason": r.reason}
        for r in table.rejected
    ]


def cmd_validate(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    loaded = load_inputs(cfg, with_nri=True)
    tables = [("svi", loaded.svi), ("income", loaded.income)]
    if loaded.nri is not None:
        tables.append(("nri", loaded.nri))

    findings = 0
    total_rejected = 0
    for name, table in tables:
        print(f"{name}: {len(table.rows)} rows, {len(table.rejected)} rejected", file=out)
        for r in table.rejected:
            print(f"  rejected line {r.line} fips {r.fips}: {r.column}={r.raw!r} ({r.reason})", file=out)
        total_rejected += len(table.rejected)
    if loaded.income.excluded_aggregates:
        print(f"income: {loaded.income.excluded_aggregates} aggregate rows excluded", file=out)
    findings += total_rejected

    print(f"joined: {len(loaded.records)} counties", file=out)
    for label, fips in (("svi only", loaded.join.svi_only), ("income only", loaded.join.income_only)):
        if fips:
            findings += len(fips)
            print(f"  {label}: {', '.join(fips)}", file=out)

    known = {r.fips for r in loaded.records}
    unknown = sorted(set(cfg.index.analysis_fips or ()) - known)
    if unknown:
        findings += len(unknown)
        print(f"analysis FIPS not in joined data: {', '.join(unknown)}", file=out)
    if loaded.geometries is not None:
        geo = {g.fips for g in loaded.geometries}
        wanted = set(cfg.index.analysis_fips or known) & known
        missing = sorted(wanted - geo)
        print(f"geometry: {len(geo)} features", file=out)
        if missing:
            findings += len(missing)
            print(f"  no geometry for: {', '.join(missing)}", file=out)

    print(f"{total_rejected} rejected rows", file=out)
    return EXIT_FINDINGS if findings else EXIT_OK


class _Staging:
    """Collects outputs in a scratch directory and publishes them together."""

    def __init__(self, out_dir: Path):
        out_dir.mkdir(parents=True, exist_ok=True)
        self.out_dir = out_dir
        self.dir = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_dir))
        self.names: list[str] = []

    def path(self, name: str) -> Path:
        self.names.append(name)
        return self.dir / name

    def publish(self) -> None:
        for name in self.names:
            os.replace(self.dir / name, self.out_dir / name)
        shutil.rmtree(self.dir, ignore_errors=True)

    def discard(self) -> None:
        shutil.rmtree(self.dir, ignore_errors=True)


def cmd_compute(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    loaded = load_inputs(cfg)
    batch, classes = score(cfg, loaded.records)
    stage = _Staging(cfg.output_dir)
    try:
        written = {}
        write_results_csv(loaded.records, batch.results, classes, stage.path(RESULTS_CSV))
        write_counties_csv(loaded.records, stage.path(COUNTIES_CSV))
        omitted: list[str] = []
        if loaded.geometries is not None:
            _, omitted = write_geojson(
                loaded.records, batch.results, classes, loaded.geometries, stage.path(RESULTS_GEOJSON)
            )
            if omitted:
                log.warning("no geometry for %d counties; features omitted", len(omitted))
        for name in stage.names:
            written[name] = file_digest(stage.dir / name)

        inputs = {"svi": file_digest(cfg.svi_path), "income": file_digest(cfg.income_path)}
        if cfg.geometry_path is not None:
            inputs["geometry"] = file_digest(cfg.geometry_path)
        manifest = RunManifest(
            tool_version=__version__,
            config=cfg.echo(),
            inputs=inputs,
            outputs=written,
            counts={
                "svi_rows": len(loaded.svi.rows),
                "svi_rejected": len(loaded.svi.rejected),
                "income_rows": len(loaded.income.rows),
                "income_rejected": len(loaded.income.rejected),
                "income_aggregates_excluded": loaded.income.excluded_aggregates,
                "joined": len(loaded.records),
                "results": len(batch.results),
                "normalization_domain_size": batch.context.domain_size,
            },
            diagnostics={
                "rejected": {"svi": _rejections(loaded.svi), "income": _rejections(loaded.income)},
                "svi_only": loaded.join.svi_only,
                "income_only": loaded.join.income_only,
                "unknown_analysis_fips": batch.unknown_fips,
                "clamped": batch.clamped,
                "geometry_omitted": omitted,
            },
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )
        write_manifest(manifest, stage.path(MANIFEST))
        stage.publish()
    except BaseException:
        stage.discard()
        raise
    print(f"wrote {len(batch.results)} results to {cfg.output_dir}", file=out)
    return EXIT_OK


def cmd_compare(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    if cfg.nri_path is None:
        raise ConfigError("compare needs inputs.nri (FEMA National Risk Index county table)")
    loaded = load_inputs(cfg, with_nri=True)
    batch, classes = score(cfg, loaded.records)
    assert loaded.nri is not None
    report = compare_with_nri(
        batch.results,
        classes,
        loaded.nri.rows,
        cfg.index.class_count,
        cfg.divergence_threshold,
        cfg.mapping.nri_rating_classes,
    )
    stage = _Staging(cfg.output_dir)
    try:
        write_comparison_json(report, stage.path(COMPARISON_JSON))
        stage.publish()
    except BaseException:
        stage.discard()
        raise
    rho = "null" if report.spearman_rho is None else f"{report.spearman_rho:.4f}"
    print(f"compared {report.n} counties, spearman rho {rho}, {len(report.divergences)} divergences", file=out)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "compute": cmd_compute, "compare": cmd_compare}


def configure_logging() -> None:
    level = os.environ.get("DRI_LOG", "off").strip().lower()
    levels = {"off": None, "info": logging.INFO, "debug": logging.DEBUG}
    root = logging.getLogger("countydri")
    root.handlers.clear()
    if levels.get(level) is None:
        root.addHandler(logging.NullHandler())
        root.propagate = False
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    root.setLevel(levels[level])
    root.propagate = False


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="countydri", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("validate", "parse and join inputs, report problems, write nothing"),
        ("compute", "compute and classify the index; write CSV, GeoJSON and manifest"),
        ("compare", "compare index classes and ranks against FEMA NRI"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="JSON run config")
        p.add_argument("--weight", type=float, help="common term weight (default 1/3)")
        p.add_argument("--classes", type=int, help="number of quantile classes (default 5)")
        p.add_argument("--paper-literal", action="store_true", help="use the published 0.33 coefficient")
        p.add_argument("--domain", choices=("full", "subset"), help="normalization bounds domain")
        p.add_argument("--subset-fips", metavar="PATH", help="file listing analysis FIPS")
        p.add_argument("--out-dir", metavar="DIR", help="override output directory")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = load_run_config(args.config, args)
        return COMMANDS[args.command](cfg)
    except (DriError, OSError, ValueError) as exc:
        print(f"countydri: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
