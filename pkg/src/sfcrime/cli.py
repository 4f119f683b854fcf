"""Command-line front end: ingest, explore, run, reproduce.

    sfcrime ingest --data incidents.csv --cache cache/
    sfcrime explore --cache cache/ --axis hour --out reports/
    sfcrime run --config configs/tree_entropy_300.toml --cache cache/ --out runs/
    sfcrime reproduce --cache cache/ --out runs/ --subsample 50000

`reproduce` is resumable: cells whose report already exists are not refit.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .features import FeatureMatrix, build_features, load_matrix, save_matrix
from .grid import TABLES, assemble_tables, build_grid
from .ingest import (
    IngestError,
    class_frequencies,
    drop_bad_coordinates,
    encode_records,
    fit_encoders,
    parse_csv,
    write_frequency_csv,
    write_histogram_csv,
)
from .runner import StageError, run_experiment, run_if_needed

logger = logging.getLogger(__name__)

CACHE_MATRIX = "features.bin"
CACHE_ENCODERS = "encoders.json"
CACHE_FREQUENCIES = "frequencies.csv"
CACHE_META = "ingest.json"

EXPLORE_AXES = ("month", "day_of_week", "hour", "district")


def cmd_ingest(args) -> int:
    cache = Path(args.cache)
    cache.mkdir(parents=True, exist_ok=True)

    try:
        result = parse_csv(args.data, strict=args.strict)
    except (IngestError, FileNotFoundError) as exc:
        print(f"ingest failed: {exc}", file=sys.stderr)
        return 2
    records = result.records
    if args.drop_bad_coords:
        kept = drop_bad_coordinates(records)
        logger.info("dropped %d rows with sentinel coordinates", len(records) - len(kept))
        records = kept
    if not records:
        print("no usable rows; nothing cached", file=sys.stderr)
        return 1

    encoders = fit_encoders(records)
    encoded = encode_records(records, encoders)
    freq = class_frequencies(encoded, n_classes=encoders.category.n_classes)
    matrix = build_features(encoded, use_time_block=True)

    save_matrix(matrix, cache / CACHE_MATRIX)
    (cache / CACHE_ENCODERS).write_text(json.dumps({
        "category": list(encoders.category.classes),
        "day_of_week": list(encoders.day_of_week.classes),
        "district": list(encoders.district.classes),
        "address": list(encoders.address.classes),
    }, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    write_frequency_csv(freq, encoders.category, cache / CACHE_FREQUENCIES)
    (cache / CACHE_META).write_text(json.dumps({
        "rows_parsed": result.n_parsed,
        "rows_rejected": result.n_rejected,
        "rows_cached": matrix.n,
        "n_classes": encoders.category.n_classes,
        "dropped_bad_coords": bool(args.drop_bad_coords),
    }, sort_keys=True, indent=1) + "\n", encoding="utf-8")

    print(f"parsed {result.n_parsed} rows ({result.n_rejected} rejected), "
          f"cached {matrix.n} x {matrix.d} matrix, "
          f"{encoders.category.n_classes} classes -> {cache}")
    return 0


def _load_cache(cache: str | Path) -> tuple[FeatureMatrix, dict[str, list[str]]]:
    cache = Path(cache)
    matrix = load_matrix(cache / CACHE_MATRIX)
    encoders = json.loads((cache / CACHE_ENCODERS).read_text(encoding="utf-8"))
    return matrix, encoders


def _axis_pairs(matrix: FeatureMatrix, axis: str, encoders: dict) -> tuple[list, list | None]:
    """(bucket,count) pairs straight off the cached matrix columns."""
    col = {"month": "month", "hour": "hour",
           "day_of_week": "day_code", "district": "district_code"}[axis]
    values = matrix.values[:, matrix.column_names.index(col)].astype(np.int64)
    if axis == "month":
        counts = np.bincount(values, minlength=13)[1:]
        return list(zip(range(1, 13), counts.tolist())), None
    if axis == "hour":
        counts = np.bincount(values, minlength=24)
        return list(zip(range(24), counts.tolist())), None
    names = encoders["day_of_week" if axis == "day_of_week" else "district"]
    counts = np.bincount(values, minlength=len(names))
    return list(zip(range(len(names)), counts.tolist())), names


def _write_svg_bars(pairs, names, path: Path, title: str) -> None:
    """Cosmetic bar chart; all acceptance-relevant output is the CSV."""
    width, height, pad = 640, 320, 40
    n = len(pairs)
    top = max((c for _, c in pairs), default=1) or 1
    bar_w = (width - 2 * pad) / max(n, 1)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{width / 2:.0f}" y="20" text-anchor="middle">{title}</text>']
    for i, (bucket, count) in enumerate(pairs):
        h = (height - 2 * pad) * count / top
        x = pad + i * bar_w
        y = height - pad - h
        label = names[bucket] if names else bucket
        parts.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w * 0.9:.1f}" '
                     f'height="{h:.1f}" fill="#4878a8"/>')
        parts.append(f'<text x="{x + bar_w * 0.45:.1f}" y="{height - pad + 14}" '
                     f'font-size="9" text-anchor="middle">{label}</text>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")


def cmd_explore(args) -> int:
    matrix, encoders = _load_cache(args.cache)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    axes = EXPLORE_AXES if args.axis == "all" else (args.axis,)
    for axis in axes:
        pairs, names = _axis_pairs(matrix, axis, encoders)
        csv_path = out / f"hist_{axis}.csv"
        write_histogram_csv(pairs, csv_path, bucket_names=names)
        if args.chart:
            _write_svg_bars(pairs, names, out / f"hist_{axis}.svg", f"count by {axis}")
        peak = max(pairs, key=lambda bc: bc[1])
        peak_name = names[peak[0]] if names else peak[0]
        print(f"{axis}: {len(pairs)} buckets, peak {peak_name} ({peak[1]}) -> {csv_path}")
    return 0


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, paper_protocol=True if args.paper_protocol else None)
    except ConfigError as exc:
        print(f"bad config: {exc}", file=sys.stderr)
        return 2
    matrix, _ = _load_cache(args.cache)
    try:
        record = run_experiment(cfg, matrix, args.out)
    except StageError as exc:
        print(f"run failed at {exc}", file=sys.stderr)
        return 1
    report = record["report"]
    print(f"{cfg.name}: accuracy {100 * report.accuracy:.2f}% "
          f"log_loss {report.log_loss:.4f} n_test {report.n_test} "
          f"-> {Path(args.out) / cfg.name}")
    return 0


def cmd_reproduce(args) -> int:
    tables = tuple(args.tables.split(",")) if args.tables else TABLES
    unknown = set(tables) - set(TABLES)
    if unknown:
        print(f"unknown tables: {sorted(unknown)}; choose from {TABLES}", file=sys.stderr)
        return 2
    subsample = None if args.subsample == 0 else args.subsample
    matrix, _ = _load_cache(args.cache)
    cells = build_grid(seed=args.seed, subsample=subsample, tables=tables)

    records: dict[str, dict | None] = {}
    failures = 0
    for cell in cells:
        try:
            record, ran = run_if_needed(cell.config, matrix, args.out)
        except StageError as exc:
            print(f"{cell.name}: FAILED at {exc}", file=sys.stderr)
            records[cell.name] = None
            failures += 1
            continue
        records[cell.name] = record
        report = record["report"]
        status = "ran" if ran else "cached"
        print(f"{cell.name}: accuracy {100 * report.accuracy:.2f}% "
              f"log_loss {report.log_loss:.4f} [{status}]")

    _check_shared_test_rows(cells, records)
    assemble_tables(cells, records, args.out)
    print(f"assembled per-table CSVs and discrepancies.md -> {args.out}")
    return 1 if failures else 0


def _check_shared_test_rows(cells, records) -> None:
    """Cells sharing seed and pre-split settings must see identical test rows."""
    fingerprints = {}
    for cell in cells:
        record = records.get(cell.name)
        if record is None:
            continue
        cfg = cell.config
        if cfg.resample.paper_protocol or cfg.binary_threshold is not None:
            continue  # these legitimately reshape the pre-split pool
        key = (cfg.seed, cfg.subsample, cfg.test_fraction, cfg.features.time_block)
        fp = record["params"]["test_fingerprint"]
        if key in fingerprints and fingerprints[key] != fp:
            raise AssertionError(
                f"test split differs across comparable cells ({cell.name}); "
                "fair comparison is broken")
        fingerprints[key] = fp


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sfcrime",
        description="Spatio-temporal crime classification pipeline")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse the incident CSV into the binary cache")
    p.add_argument("--data", required=True, help="path to the incident CSV")
    p.add_argument("--cache", required=True, help="cache directory to write")
    p.add_argument("--strict", action="store_true",
                   help="abort on the first malformed row instead of skipping")
    p.add_argument("--drop-bad-coords", action="store_true",
                   help="drop rows carrying the y=90 unknown-location sentinel")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("explore", help="emit (bucket,count) histogram CSVs")
    p.add_argument("--cache", required=True)
    p.add_argument("--axis", default="all", choices=EXPLORE_AXES + ("all",))
    p.add_argument("--out", required=True)
    p.add_argument("--chart", action="store_true", help="also render SVG bars")
    p.set_defaults(fn=cmd_explore)

    p = sub.add_parser("run", help="run one experiment cell from a config file")
    p.add_argument("--config", required=True, help="TOML experiment config")
    p.add_argument("--cache", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.add_argument("--paper-protocol", action="store_true",
                   help="resample before the split (leaky; reproduces the "
                        "published rebalancing numbers)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("reproduce", help="run the full reference grid and "
                                         "assemble comparison tables")
    p.add_argument("--cache", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--subsample", type=int, default=20_000,
                   help="stratified row cap per cell; 0 = use all rows")
    p.add_argument("--tables", default=None,
                   help=f"comma-separated subset of {','.join(TABLES)}")
    p.set_defaults(fn=cmd_reproduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
