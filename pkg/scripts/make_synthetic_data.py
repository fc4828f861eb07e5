"""Regenerate the bundled synthetic weather and demand-shape CSVs.

Clear-sky GHI follows the Haurwitz model at latitude 32.8 N (solar time, no
equation-of-time correction), scaled by a seeded daily cloudiness series.
The demand shape is a day-peaking sinusoid with lighter weekends.  Both files
are synthetic stand-ins with the same layout as real hourly data.
"""

import argparse
import math
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

LAT = math.radians(32.8)
YEARS = (2019, 2020, 2021)


def hours(year):
    t = datetime(year, 1, 1)
    end = datetime(year + 1, 1, 1)
    while t < end:
        yield t
        t += timedelta(hours=1)


def clear_sky_ghi(stamp):
    doy = stamp.timetuple().tm_yday
    decl = math.radians(23.45) * math.sin(2 * math.pi * (284 + doy) / 365)
    hour_angle = math.radians(15 * (stamp.hour + 0.5 - 12))
    cos_z = math.sin(LAT) * math.sin(decl) + math.cos(LAT) * math.cos(decl) * math.cos(hour_angle)
    if cos_z <= 0:
        return 0.0
    return 1098.0 * cos_z * math.exp(-0.057 / cos_z)


def weather_rows(seed):
    rng = np.random.default_rng(seed)
    for year in YEARS:
        stamps = list(hours(year))
        days = len(stamps) // 24
        cloud = np.empty(days)
        c = 0.8
        for d in range(days):
            c = 0.7 * c + 0.3 * rng.uniform(0.35, 1.0)
            cloud[d] = c
        for i, st in enumerate(stamps):
            doy = st.timetuple().tm_yday
            ghi = clear_sky_ghi(st) * cloud[i // 24]
            season = 18.0 - 7.0 * math.cos(2 * math.pi * (doy - 15) / 365)
            diurnal = 5.0 * math.sin(2 * math.pi * (st.hour - 9) / 24)
            temp = season + diurnal + rng.normal(0.0, 1.0)
            yield st, round(ghi, 2), round(temp, 2)


def shape_rows():
    for year in YEARS:
        for st in hours(year):
            daily = 1.0 + 0.45 * math.sin(2 * math.pi * (st.hour - 8) / 24)
            weekly = 0.75 if st.weekday() >= 5 else 1.0
            doy = st.timetuple().tm_yday
            seasonal = 1.0 + 0.15 * math.cos(2 * math.pi * (doy - 200) / 365)
            yield st, round(daily * weekly * seasonal, 6)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parents[1] / "src/h2supply/data"))
    ap.add_argument("--seed", type=int, default=20190101)
    args = ap.parse_args()
    out = Path(args.out)
    with open(out / "synthetic_weather.csv", "w") as fh:
        fh.write("timestamp,ghi_w_m2,temp_c\n")
        for st, ghi, temp in weather_rows(args.seed):
            fh.write(f"{st.isoformat()},{ghi},{temp}\n")
    with open(out / "synthetic_commercial_shape.csv", "w") as fh:
        fh.write("timestamp,demand_weight\n")
        for st, w in shape_rows():
            fh.write(f"{st.isoformat()},{w}\n")


if __name__ == "__main__":
    main()
