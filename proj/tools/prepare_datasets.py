#!/usr/bin/env python3
"""Extract the bike-sharing and concrete-strength datasets into numeric CSVs.

Both datasets ship inside packages on PyPI, so no direct internet access is
needed:

    pip download --no-deps ISLP rdatasets
    python3 tools/prepare_datasets.py --islp islp-*.whl --rdatasets rdatasets-*.whl --out data/

bike.csv      UCI bike sharing (hourly, 2011), response column "count".
              The casual/registered split of the count is dropped.
concrete.csv  UCI concrete compressive strength, response column "strength".
"""
import argparse
import io
import zipfile

import pandas as pd

MONTHS = {m: i + 1 for i, m in enumerate(
    ["Jan", "Feb", "March", "April", "May", "June", "July", "Aug", "Sept",
     "Oct", "Nov", "Dec"])}
WEATHER = {"clear": 1, "cloudy/misty": 2, "light rain/snow": 3,
           "heavy rain/snow": 4}


def bike(wheel):
    with zipfile.ZipFile(wheel) as z:
        df = pd.read_csv(io.BytesIO(z.read("ISLP/data/Bikeshare.csv")))
    df["mnth"] = df["mnth"].map(MONTHS)
    df["weathersit"] = df["weathersit"].map(WEATHER)
    df["hr"] = df["hr"].astype(int)
    df = df.drop(columns=["casual", "registered"]).rename(
        columns={"bikers": "count"})
    if df.isna().any().any():
        raise SystemExit("unmapped categorical level in Bikeshare.csv")
    return df


def concrete(wheel):
    with zipfile.ZipFile(wheel) as z:
        raw = z.read("rdatasets/_data/modeldata/concrete.pkl.compress")
    df = pd.read_pickle(io.BytesIO(raw), compression="xz")
    df = df.drop(columns=["rownames"], errors="ignore")
    return df.rename(columns={"compressive_strength": "strength"})


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--islp", required=True)
    ap.add_argument("--rdatasets", required=True)
    ap.add_argument("--out", default="data")
    args = ap.parse_args()
    bike(args.islp).to_csv(f"{args.out}/bike.csv", index=False)
    concrete(args.rdatasets).to_csv(f"{args.out}/concrete.csv", index=False)


if __name__ == "__main__":
    main()
