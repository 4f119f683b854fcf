#!/usr/bin/env python3
"""One-command desk-scale reproduction.

Ingests an incident CSV (generating a synthetic stand-in when no --data is
given), emits the exploration histograms, runs the reference grid at a
desk-scale subsample, and assembles the comparison tables.

    python scripts/run_desk_reproduction.py --workdir out/
    python scripts/run_desk_reproduction.py --workdir out/ --data train.csv \
        --subsample 100000 --tables tree,knn

Reference bands are only meaningful against the real export; on the
synthetic stand-in the tables still demonstrate the trends (log loss
falling with split size and with neighbour count, ensembles improving
with more trees).
"""

from __future__ import annotations

import argparse
import subprocess
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from sfcrime.cli import main as sfcrime_main  # noqa: E402
from sfcrime.grid import TABLES  # noqa: E402


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--workdir", required=True, help="directory for cache and results")
    parser.add_argument("--data", default=None,
                        help="incident CSV; omitted -> synthetic stand-in")
    parser.add_argument("--rows", type=int, default=60_000,
                        help="stand-in size when generating")
    parser.add_argument("--subsample", type=int, default=20_000,
                        help="per-cell stratified row cap (0 = all rows)")
    parser.add_argument("--tables", default=",".join(TABLES))
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    workdir = Path(args.workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    data = args.data
    if data is None:
        data = str(workdir / "synthetic.csv")
        rc = subprocess.call([sys.executable, str(REPO / "scripts" / "generate_synthetic_data.py"),
                              "--rows", str(args.rows), "--seed", str(args.seed),
                              "--out", data])
        if rc:
            return rc

    cache = str(workdir / "cache")
    out = str(workdir / "results")
    for step in (
        ["ingest", "--data", data, "--cache", cache],
        ["explore", "--cache", cache, "--out", out, "--chart"],
        ["reproduce", "--cache", cache, "--out", out,
         "--seed", str(args.seed), "--subsample", str(args.subsample),
         "--tables", args.tables],
    ):
        print(f"\n== sfcrime {' '.join(step)}")
        rc = sfcrime_main(step)
        if rc:
            return rc
    print(f"\ntables and reports in {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
