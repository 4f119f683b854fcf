#!/usr/bin/env python3
"""Generate a synthetic incident CSV in the SF export schema.

The real export cannot be redistributed here, so this produces a stand-in
with the same header, the same 39 categories, 10 districts, and a similar
long-tailed class mix, plus mild spatio-temporal structure (categories
prefer certain districts and hours) so classifiers can beat the prior.

    python scripts/generate_synthetic_data.py --rows 60000 --out data/synthetic.csv
    python scripts/generate_synthetic_data.py --full-scale --out data/synthetic_full.csv

--full-scale emits exactly 878,049 rows with the published per-class
counts (LARCENY/THEFT 174,900 ... TREA 6). Reference accuracy bands only
mean anything on the real export; the stand-in is for exercising the
pipeline end to end.
"""

from __future__ import annotations

import argparse
import csv
import sys
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

HEADER = ["Dates", "Category", "Descript", "DayOfWeek", "PdDistrict",
          "Resolution", "Address", "X", "Y"]

# (category, count in the real export). The tail is adjusted by one filler
# class so the total is exactly 878,049.
CATEGORY_COUNTS = [
    ("LARCENY/THEFT", 174900),
    ("OTHER OFFENSES", 126182),
    ("NON-CRIMINAL", 92304),
    ("ASSAULT", 76876),
    ("DRUG/NARCOTIC", 53971),
    ("VEHICLE THEFT", 53781),
    ("VANDALISM", 44725),
    ("WARRANTS", 42214),
    ("BURGLARY", 36755),
    ("SUSPICIOUS OCC", 31414),
    ("MISSING PERSON", 25989),
    ("ROBBERY", 23000),
    ("FRAUD", 16679),
    ("FORGERY/COUNTERFEITING", 10609),
    ("SECONDARY CODES", 9985),
    ("WEAPON LAWS", 8555),
    ("PROSTITUTION", 7484),
    ("TRESPASS", 7326),
    ("STOLEN PROPERTY", 4540),
    ("SEX OFFENSES FORCIBLE", 4388),
    ("DISORDERLY CONDUCT", 4320),
    ("DRUNKENNESS", 4280),
    ("RECOVERED VEHICLE", 3138),
    ("KIDNAPPING", 2341),
    ("DRIVING UNDER THE INFLUENCE", 2268),
    ("RUNAWAY", 1946),
    ("LIQUOR LAWS", 1903),
    ("ARSON", 1513),
    ("LOITERING", 1225),
    ("EMBEZZLEMENT", 1166),
    ("SUICIDE", 508),
    ("FAMILY OFFENSES", 491),
    ("BAD CHECKS", 406),
    ("BRIBERY", 289),
    ("EXTORTION", 256),
    ("SEX OFFENSES NON FORCIBLE", 148),
    ("GAMBLING", 146),
    ("PORNOGRAPHY/OBSCENE MAT", 22),
    ("TREA", 6),
]

FULL_SCALE_TOTAL = 878_049

DISTRICTS = ["SOUTHERN", "MISSION", "NORTHERN", "CENTRAL", "BAYVIEW",
             "TENDERLOIN", "INGLESIDE", "TARAVAL", "PARK", "RICHMOND"]
# SOUTHERN clearly on top so the district histogram peaks there
DISTRICT_PRIOR = np.array([0.18, 0.135, 0.12, 0.10, 0.10,
                           0.09, 0.09, 0.075, 0.056, 0.054])

DISTRICT_CENTER = {
    "SOUTHERN": (-122.405, 37.778), "MISSION": (-122.418, 37.760),
    "NORTHERN": (-122.425, 37.792), "CENTRAL": (-122.407, 37.798),
    "BAYVIEW": (-122.390, 37.732), "TENDERLOIN": (-122.412, 37.783),
    "INGLESIDE": (-122.438, 37.723), "TARAVAL": (-122.482, 37.742),
    "PARK": (-122.447, 37.770), "RICHMOND": (-122.478, 37.780),
}

DAYS = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"]
# Friday the max, Sunday the min, Monday-Thursday gradually rising
DAY_PRIOR = np.array([0.138, 0.140, 0.145, 0.148, 0.158, 0.146, 0.125])

# climbs through the day, peaks at 18:00, quiet small hours
HOUR_PRIOR = np.array([
    2.8, 1.6, 1.2, 0.8, 0.6, 0.7, 1.0, 1.6, 2.6, 3.0, 3.2, 3.4,
    4.4, 3.9, 4.0, 4.3, 4.6, 5.0, 5.6, 5.0, 4.4, 4.0, 3.8, 3.4,
])

RESOLUTIONS = ["NONE", "ARREST, BOOKED", "ARREST, CITED", "UNFOUNDED",
               "JUVENILE BOOKED", "PSYCHOPATHIC CASE", "LOCATED"]

STREETS = ["MARKET ST", "MISSION ST", "BRYANT ST", "GEARY AV", "POLK ST",
           "HAIGHT ST", "FOLSOM ST", "VALENCIA ST", "TURK ST", "ELLIS ST",
           "JONES ST", "HYDE ST", "SUTTER ST", "POWELL ST", "LAUREL ST",
           "OAK ST", "FELL ST", "BUSH ST", "PINE ST", "GROVE ST"]

START = datetime(2003, 1, 1)
END = datetime(2015, 5, 13)


def _class_quotas(total: int, rng: np.random.Generator) -> np.ndarray:
    """Largest-remainder proportional counts, every class kept non-empty."""
    weights = np.array([c for _, c in CATEGORY_COUNTS], dtype=np.float64)
    exact = weights * (total / weights.sum())
    quotas = np.floor(exact).astype(np.int64)
    short = total - quotas.sum()
    order = np.argsort(-(exact - quotas))
    quotas[order[:short]] += 1
    # keep the tail alive at small sizes; take the difference off the head
    for i in range(len(quotas) - 1, -1, -1):
        if quotas[i] == 0:
            quotas[i] = 1
            quotas[int(np.argmax(quotas))] -= 1
    return quotas


def generate(rows: int, seed: int, full_scale: bool,
             sentinel_rows: int, dirty_rows: int) -> list[list[str]]:
    rng = np.random.default_rng(seed)
    n_cat = len(CATEGORY_COUNTS)

    if full_scale:
        quotas = np.array([c for _, c in CATEGORY_COUNTS], dtype=np.int64)
        total = int(quotas.sum())
        assert total == FULL_SCALE_TOTAL, total
    else:
        quotas = _class_quotas(rows, rng)
        total = rows

    # per-category structure: a home district, a peak hour, a day tilt, and
    # a few hot-spot addresses where the category recurs (street-level
    # repetition is what carries most of the location signal in crime data)
    home_district = rng.integers(0, len(DISTRICTS), size=n_cat)
    peak_hour = rng.integers(0, 24, size=n_cat)
    day_tilt = rng.integers(0, 7, size=n_cat)
    # a citywide pool of hot spots; each frequent category leans on 6 of
    # them, so locations overlap the way real hot spots do. Rare categories
    # (the long tail) behave like vice corridors instead: they are far more
    # location-bound, recurring on 2 spots of their own pool that frequent
    # crime only reaches at the base rate.
    pool_street = rng.integers(0, len(STREETS), size=52)
    pool_block = rng.integers(0, 30, size=52) * 100
    hot_of_cat = rng.integers(0, 40, size=(n_cat, 6))
    is_rare_cat = np.array([c < 10_000 for _, c in CATEGORY_COUNTS])
    rare_spots = rng.integers(40, 52, size=(int(is_rare_cat.sum()), 2))
    hot_of_cat[is_rare_cat] = rare_spots[:, [0, 1, 0, 1, 0, 1]]
    hot_rate_of_cat = np.where(is_rare_cat, 0.6, 0.25)

    cats = np.repeat(np.arange(n_cat), quotas)
    rng.shuffle(cats)

    # district: mild category affinity over the citywide prior; strong
    # enough for models to beat the majority baseline, weak enough that the
    # task stays hard
    district = np.where(
        rng.random(total) < 0.30,
        home_district[cats],
        rng.choice(len(DISTRICTS), size=total, p=DISTRICT_PRIOR),
    )

    # hour: mostly the citywide curve, sharpened near the category peak
    hour_prior = HOUR_PRIOR / HOUR_PRIOR.sum()
    hour = rng.choice(24, size=total, p=hour_prior)
    sharpen = rng.random(total) < 0.20
    offsets = rng.integers(-2, 3, size=total)
    hour[sharpen] = (peak_hour[cats[sharpen]] + offsets[sharpen]) % 24

    day_prior = DAY_PRIOR / DAY_PRIOR.sum()
    day = rng.choice(7, size=total, p=day_prior)
    tilted = rng.random(total) < 0.12
    day[tilted] = day_tilt[cats[tilted]]

    # calendar date: uniform over the covered span, then aligned to the
    # sampled day of week (shift back 0-6 days, clamped to the span)
    span_days = (END - START).days
    day_offset = rng.integers(0, span_days + 1, size=total)
    minute = rng.integers(0, 60, size=total)
    second = rng.integers(0, 60, size=total)

    street_idx = rng.integers(0, len(STREETS), size=total)
    block = rng.integers(0, 30, size=total) * 100
    at_hot_spot = rng.random(total) < hot_rate_of_cat[cats]
    hot_pick = rng.integers(0, 6, size=total)
    spot = hot_of_cat[cats[at_hot_spot], hot_pick[at_hot_spot]]
    street_idx[at_hot_spot] = pool_street[spot]
    block[at_hot_spot] = pool_block[spot]
    coord_noise = rng.normal(0.0, 0.008, size=(total, 2))

    resolution = rng.integers(0, len(RESOLUTIONS), size=total)

    out: list[list[str]] = []
    for i in range(total):
        base = START + timedelta(days=int(day_offset[i]))
        shift = (base.weekday() - int(day[i])) % 7
        stamp = base - timedelta(days=shift)
        if stamp < START:
            stamp += timedelta(days=7)
        name, _ = CATEGORY_COUNTS[cats[i]]
        dname = DISTRICTS[district[i]]
        cx, cy = DISTRICT_CENTER[dname]
        x = cx + coord_noise[i, 0]
        y = cy + coord_noise[i, 1]
        out.append([
            f"{stamp:%Y-%m-%d} {hour[i]:02d}:{minute[i]:02d}:{second[i]:02d}",
            name,
            f"SYNTHETIC {name}",
            DAYS[stamp.weekday()],
            dname,
            RESOLUTIONS[resolution[i]],
            f"{block[i]} Block of {STREETS[street_idx[i]]}",
            f"{x:.8f}",
            f"{y:.8f}",
        ])

    for i in range(min(sentinel_rows, len(out))):
        out[i][7] = "-120.5"
        out[i][8] = "90.0"
    for i in range(dirty_rows):
        out.append(["2014-06-31 12:00:00", "ASSAULT", "SYNTHETIC BAD ROW",
                    "Monday", "SOUTHERN", "NONE", "0 Block of MARKET ST",
                    "-122.41", "37.77"])
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=60_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    parser.add_argument("--full-scale", action="store_true",
                        help="exactly 878,049 rows with the published class counts")
    parser.add_argument("--sentinel-coords", type=int, default=0,
                        help="rows given the y=90 unknown-location sentinel")
    parser.add_argument("--dirty-rows", type=int, default=0,
                        help="append this many malformed rows (bad calendar date)")
    args = parser.parse_args(argv)

    rows = generate(args.rows, args.seed, args.full_scale,
                    args.sentinel_coords, args.dirty_rows)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
